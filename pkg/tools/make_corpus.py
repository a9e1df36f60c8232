"""Regenerate the bundled training corpus under src/lapepi/data.

The photographs are 256x256 crops of CC0 sample images distributed with
scikit-image (needed only to run this script).
"""

from pathlib import Path

import numpy as np
import skimage.data

from lapepi._io import write_png
from lapepi.corpus import write_synthetic_corpus

DATA = Path(__file__).resolve().parents[1] / "src" / "lapepi" / "data"
CROPS = {"camera": (64, 128), "grass": (0, 0), "gravel": (128, 128), "brick": (200, 100)}


def main():
    for name, (r, c) in CROPS.items():
        img = getattr(skimage.data, name)()[r:r + 256, c:c + 256]
        write_png(DATA / "natural" / f"{name}.png", img.astype(np.float64) / 255.0)
    n = write_synthetic_corpus(DATA)
    print(f"wrote {len(CROPS)} photographs and {n} synthetic EPIs to {DATA}")


if __name__ == "__main__":
    main()
