"""The small training corpus shipped with the package.

``data/synthetic_epis.png`` stacks dense synthetic EPIs vertically (see
``data/corpus.json`` for the generator settings) and ``data/natural/``
holds grayscale photographs whose vertical axis is read as the angular
axis during pre-training.  :func:`synthetic_epis` regenerates the EPIs
exactly from their seed.
"""

import json
from importlib import resources
from pathlib import Path

import numpy as np

from ._io import atomic_open, read_png, write_png
from .lightfield import LightField4D
from .synth import random_scene, synth_epi, synth_lightfield

CORPUS_SETTINGS = {
    "seed": 1,
    "n_scenes": 300,
    "n_views": 7,
    "width": 256,
    "d_range": [0.0, 3.0],
    "max_cycles_per_px": 0.1,
}


def data_dir():
    return Path(str(resources.files("lapepi") / "data"))


def synthetic_epis(seed=1, n_scenes=300, n_views=7, width=256, d_range=(0.0, 3.0), max_cycles_per_px=0.1):
    """Dense random-layer EPIs; ``d_range`` is the per-view disparity of the dense EPI."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_scenes):
        spec = random_scene(rng, n_views, width, d_range=tuple(d_range), max_cycles_per_px=max_cycles_per_px)
        out.append(synth_epi(spec).data)
    return out


def held_out_lightfield(seed=999, n_views=7, width=128, height=16, d_range=(0.0, 3.0), max_cycles_per_px=0.1):
    """A 3D light field drawn from the corpus distribution with a seed the corpus never uses."""
    rng = np.random.default_rng(seed)
    spec = random_scene(rng, n_views, width, d_range=tuple(d_range), max_cycles_per_px=max_cycles_per_px,
                        height=height)
    return synth_lightfield(spec)


def bundled_epis():
    """The bundled synthetic EPIs as a list of (n_views, width) arrays in [0, 1]."""
    meta = json.loads((data_dir() / "corpus.json").read_text())
    stack = read_png(data_dir() / "synthetic_epis.png", mode="L")
    rows = meta["n_views"]
    return [stack[i:i + rows] for i in range(0, stack.shape[0], rows)]


def bundled_images():
    """The bundled grayscale photographs, sorted by file name."""
    return [read_png(p, mode="L") for p in sorted((data_dir() / "natural").glob("*.png"))]


def write_synthetic_corpus(directory, **settings):
    """Render the synthetic EPIs and write the stacked PNG plus its settings file."""
    cfg = dict(CORPUS_SETTINGS, **settings)
    directory = Path(directory)
    epis = synthetic_epis(**cfg)
    write_png(directory / "synthetic_epis.png", np.concatenate(epis, axis=0))
    with atomic_open(directory / "corpus.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return len(epis)


__all__ = [
    "CORPUS_SETTINGS",
    "LightField4D",
    "bundled_epis",
    "bundled_images",
    "data_dir",
    "held_out_lightfield",
    "synthetic_epis",
    "write_synthetic_corpus",
]
