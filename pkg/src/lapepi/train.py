"""Patch-pair extraction, initialisation and the two-stage training loop.

Training data are sub-EPI pairs: a label window of
``alpha_a (n_in - 1) + 1`` angular rows slides over a source array, and
the input is the label with every ``alpha_a``-th row kept.  Natural images
serve as EPIs by reading their vertical axis as the angular axis.
"""

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ._io import atomic_open
from .checkpoint import save_checkpoint
from .errors import LapEpiError, ShapeError, TrainingDiverged
from .lightfield import Epi, angular_decimate, upsampled_size
from .net.adam import AdamState, adam_step
from .net.loss import l2_loss
from .net.model import NetworkParams, backward_batch, forward_batch, layer_specs
from .pyramid import PyramidConfig, build_lapepi

INIT_STD = 1e-3
INIT_SLOPE = 0.1
INIT_SCHEMES = ("gaussian", "scaled")
LR_SCHEDULES = ("constant", "cosine")

STAGE_DEFAULTS = {
    "pretrain": {"strides": (14, 20), "lr_conv": 1e-4, "lr_deconv": 1e-5},
    "finetune": {"strides": (14, 23), "lr_conv": 1e-5, "lr_deconv": 1e-6},
}


class Stage(str, Enum):
    PRETRAIN = "pretrain"
    FINETUNE = "finetune"


@dataclass(frozen=True)
class TrainConfig:
    """One training stage.  Unset strides and learning rates take the stage defaults."""

    stage: Stage = Stage.PRETRAIN
    patch_in: tuple = (11, 44)
    alpha_a: int = 3
    batch: int = 28
    strides: tuple = None
    lr_conv: float = None
    lr_deconv: float = None
    max_steps: int = 1000
    seed: int = 0
    trace_every: int = 100
    checkpoint_every: int = 0
    init: str = "gaussian"
    lr_schedule: str = "constant"
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)

    def __post_init__(self):
        stage = Stage(self.stage)
        object.__setattr__(self, "stage", stage)
        defaults = STAGE_DEFAULTS[stage.value]
        for name in ("strides", "lr_conv", "lr_deconv"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, defaults[name])
        object.__setattr__(self, "patch_in", tuple(int(v) for v in self.patch_in))
        object.__setattr__(self, "strides", tuple(int(v) for v in self.strides))
        if self.alpha_a < 2:
            raise ValueError("alpha_a must be >= 2")
        if self.patch_in[0] < 2:
            raise ValueError("input patches need at least 2 angular rows")
        if self.patch_in[1] % self.pyramid.width_multiple:
            raise ValueError(
                f"patch width {self.patch_in[1]} must be a multiple of {self.pyramid.width_multiple}"
            )
        if self.batch < 1 or self.max_steps < 0 or self.trace_every < 1:
            raise ValueError("batch and trace_every must be positive, max_steps non-negative")
        if min(self.strides) < 1:
            raise ValueError("strides must be positive")
        if self.init not in INIT_SCHEMES:
            raise ValueError(f"init must be one of {INIT_SCHEMES}, got {self.init!r}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}, got {self.lr_schedule!r}")

    @property
    def patch_label(self):
        return (upsampled_size(self.patch_in[0], self.alpha_a), self.patch_in[1])


class SourceKind(str, Enum):
    NATURAL_IMAGE = "natural_image"
    EPI = "epi"


@dataclass(frozen=True)
class SampleSource:
    """Luma arrays of one kind.  Both kinds are read as (angular, spatial)."""

    kind: SourceKind
    arrays: tuple

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        arrays = []
        for a in self.arrays:
            a = a.data if isinstance(a, Epi) else np.asarray(a, dtype=np.float64)
            if a.ndim != 2:
                raise ShapeError(f"sources must be 2-D luma arrays, got shape {a.shape}")
            arrays.append(a)
        object.__setattr__(self, "arrays", tuple(arrays))


@dataclass
class PatchSet:
    """Stacked network inputs and labels for a set of patch pairs."""

    levels: list  # level arrays with a leading pair axis
    labels: np.ndarray  # (M, label rows, width)
    inputs: np.ndarray  # (M, input rows, width), the decimated labels
    skipped: int = 0

    def __len__(self):
        return self.labels.shape[0]

    def batch(self, idx):
        return [lv[idx] for lv in self.levels], self.labels[idx]

    @classmethod
    def concat(cls, sets):
        sets = [s for s in sets if len(s)]
        if not sets:
            raise LapEpiError("no patch pairs to concatenate")
        levels = [np.concatenate([s.levels[i] for s in sets]) for i in range(len(sets[0].levels))]
        return cls(levels, np.concatenate([s.labels for s in sets]),
                   np.concatenate([s.inputs for s in sets]), sum(s.skipped for s in sets))


def make_pairs(labels, cfg):
    """Build a :class:`PatchSet` from label windows of shape ``cfg.patch_label``."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim == 2:
        labels = labels[None]
    if labels.shape[1:] != cfg.patch_label:
        raise ShapeError(f"label patches must be {cfg.patch_label}, got {labels.shape[1:]}")
    inputs = np.stack([angular_decimate(Epi(lab), cfg.alpha_a).data for lab in labels])
    pyr = build_lapepi(inputs, cfg.pyramid)
    return PatchSet(pyr.levels(), labels, inputs)


def window_offsets(size, window, stride):
    """Start offsets of windows that fit entirely inside ``size`` samples."""
    if size < window:
        return []
    return list(range(0, size - window + 1, stride))


def extract_patch_pairs(src, cfg):
    """All in-bounds label windows of every source, in raster order.

    Windows that would cross a border are dropped; sources smaller than one
    window are skipped and counted in ``PatchSet.skipped``.  Shuffling is
    left to :func:`run_stage`.
    """
    la, lw = cfg.patch_label
    sa, sw = cfg.strides
    windows, skipped = [], 0
    for arr in src.arrays:
        rows = window_offsets(arr.shape[0], la, sa)
        cols = window_offsets(arr.shape[1], lw, sw)
        if not rows or not cols:
            skipped += 1
            continue
        for r in rows:
            for c in cols:
                windows.append(arr[r:r + la, c:c + lw])
    if not windows:
        empty = np.empty((0,) + cfg.patch_label)
        pairs = PatchSet([], empty, np.empty((0,) + tuple(cfg.patch_in)), skipped)
        return pairs
    pairs = make_pairs(np.stack(windows), cfg)
    pairs.skipped = skipped
    return pairs


def _fan_in(spec):
    """Inputs feeding one output sample; a strided deconvolution spreads them over its stride."""
    fan = spec.in_ch * spec.kernel[0] * spec.kernel[1]
    if spec.kind == "deconv":
        fan = max(1, fan // (spec.stride[0] * spec.stride[1]))
    return fan


def init_params(seed=0, pyramid=None, alpha_a=3, std=INIT_STD, slope=INIT_SLOPE, scheme="gaussian", **widths):
    """Zero biases, PReLU slopes ``slope`` and random weights.

    ``scheme="gaussian"`` draws every weight from N(0, std**2).
    ``scheme="scaled"`` uses ``std = sqrt(2 / ((1 + slope**2) fan_in))`` per
    layer (unit gain through a PReLU), which trains far faster on the short
    schedules used for tests.
    """
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}")
    pyramid = pyramid or PyramidConfig()
    rng = np.random.default_rng(seed)
    layers = {}
    for spec in layer_specs(pyramid, alpha_a, **widths):
        sd = std
        if scheme == "scaled":
            gain = 2.0 / (1.0 + slope ** 2) if spec.has_prelu else 1.0
            sd = math.sqrt(gain / _fan_in(spec))
        layer = {"weight": rng.normal(0.0, sd, size=spec.weight_shape), "bias": np.zeros(spec.out_ch)}
        if spec.has_prelu:
            layer["slope"] = np.full(spec.out_ch, slope)
        layers[spec.name] = layer
    return NetworkParams(layers, pyramid, alpha_a, **widths)


def lr_scale(step, max_steps, schedule):
    """Multiplier on the base learning rates at 1-based ``step``."""
    if schedule == "constant" or max_steps <= 1:
        return 1.0
    return 0.5 * (1.0 + math.cos(math.pi * (step - 1) / max_steps))


@dataclass
class StageResult:
    params: NetworkParams
    trace: list  # (step, mean loss over the preceding trace_every steps)
    state: AdamState
    seconds: float = 0.0

    def trace_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "loss"])
        for step, loss in self.trace:
            w.writerow([step, f"{loss:.12g}"])
        text = buf.getvalue()
        if path is not None:
            with atomic_open(path, "w") as fh:
                fh.write(text)
        return text


def _batches(n, batch, rng):
    """Endless index batches; each epoch is a fresh uniform permutation."""
    batch = min(batch, n)
    while True:
        perm = rng.permutation(n)
        for i in range(0, n - batch + 1, batch):
            yield perm[i:i + batch]


def run_stage(pairs, cfg, params=None, checkpoint_path=None, log=None):
    """Mini-batch ADAM on ``pairs`` for ``cfg.max_steps`` steps.

    A fine-tuning stage must start from ``params``; pre-training starts from
    :func:`init_params` when none are given.  A non-finite loss raises
    :class:`TrainingDiverged` carrying the last finite parameters (also
    written to ``checkpoint_path`` when one is set).
    """
    if len(pairs) == 0:
        raise LapEpiError("no training pairs")
    if params is None:
        if cfg.stage is Stage.FINETUNE:
            raise LapEpiError("fine-tuning needs initial parameters (the pre-trained model)")
        params = init_params(cfg.seed, cfg.pyramid, cfg.alpha_a, scheme=cfg.init)
    else:
        params = params.copy()
        params.alpha_a = cfg.alpha_a
    if params.pyramid != cfg.pyramid:
        raise ShapeError(f"params pyramid {params.pyramid} does not match config {cfg.pyramid}")
    state = AdamState(lr_conv=cfg.lr_conv, lr_deconv=cfg.lr_deconv)
    rng = np.random.default_rng(cfg.seed)
    batches = _batches(len(pairs), cfg.batch, rng)
    trace, window = [], []
    last_good = params.copy()
    t0 = time.perf_counter()
    for step in range(1, cfg.max_steps + 1):
        levels, labels = pairs.batch(next(batches))
        out, cache = forward_batch(levels, params, cfg.alpha_a)
        loss, dout = l2_loss(out, labels)
        if not math.isfinite(loss):
            if checkpoint_path is not None:
                save_checkpoint(last_good, checkpoint_path)
            raise TrainingDiverged(f"non-finite loss at step {step}", last_good=last_good, step=step)
        grads = backward_batch(dout, cache)
        last_good = params.copy()
        scale = lr_scale(step, cfg.max_steps, cfg.lr_schedule)
        state.lr_conv, state.lr_deconv = cfg.lr_conv * scale, cfg.lr_deconv * scale
        adam_step(params, grads, state)
        window.append(loss)
        if step % cfg.trace_every == 0:
            trace.append((step, float(np.mean(window))))
            window = []
            if log is not None:
                log(f"step {step} loss {trace[-1][1]:.6g}")
        if checkpoint_path is not None and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            save_checkpoint(params, checkpoint_path)
    if window and cfg.max_steps % cfg.trace_every:
        trace.append((cfg.max_steps, float(np.mean(window))))
    if checkpoint_path is not None:
        save_checkpoint(params, checkpoint_path)
    return StageResult(params, trace, state, time.perf_counter() - t0)


def with_overrides(cfg, **kw):
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def desk_config(max_steps=30000, seed=0, **overrides):
    """The scaled-down recipe used for the end-to-end checks.

    Three-row input patches (the geometry of a 3 -> 7 reconstruction), a
    small batch, variance-scaled initialisation and a cosine-decayed
    learning rate of 1e-3 so that tens of thousands of steps suffice.
    """
    base = dict(stage=Stage.PRETRAIN, patch_in=(3, 44), alpha_a=3, batch=4, strides=(14, 20),
                lr_conv=1e-3, lr_deconv=1e-3, max_steps=max_steps, seed=seed, trace_every=100,
                init="scaled", lr_schedule="cosine")
    base.update(overrides)
    return TrainConfig(**base)
