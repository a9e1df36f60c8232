"""Shared pieces of the acceptance suite: the result log and the overfit run."""

import numpy as np

from lapepi.synth import random_scene, synth_epi
from lapepi.train import TrainConfig, make_pairs, run_stage

RESULTS = []


def report(number, ok, detail):
    """Record and print one acceptance line; returns ``ok`` for the caller's assert."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


OVERFIT_STEPS = 5000
OVERFIT_PAIRS = 8


def overfit_config(seed=0):
    """Eight 3x16 -> 7x16 pairs memorised with the scaled initialisation and a cosine-decayed rate."""
    return TrainConfig(patch_in=(3, 16), batch=OVERFIT_PAIRS, max_steps=OVERFIT_STEPS, lr_conv=1e-3,
                       lr_deconv=1e-3, seed=seed, init="scaled", lr_schedule="cosine", trace_every=100)


def overfit_pairs(cfg, seed=0):
    rng = np.random.default_rng(seed)
    labels = [synth_epi(random_scene(rng, cfg.patch_label[0], cfg.patch_in[1], d_range=(0.0, 1.0),
                                     max_cycles_per_px=0.1)).data for _ in range(OVERFIT_PAIRS)]
    return make_pairs(np.stack(labels), cfg)


def run_overfit(seed=0):
    cfg = overfit_config(seed)
    return run_stage(overfit_pairs(cfg), cfg)


def block_means(trace, block):
    """Mean loss over consecutive ``block``-step blocks of a trace recorded every ``trace_every`` steps."""
    steps = np.array([s for s, _ in trace])
    losses = np.array([v for _, v in trace])
    every = int(steps[0])
    per = block // every
    n = len(losses) // per
    return steps[per - 1:n * per:per], losses[:n * per].reshape(n, per).mean(axis=1)
