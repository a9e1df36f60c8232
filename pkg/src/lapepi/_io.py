"""Small file helpers: atomic writes and 8- or 16-bit PNG conversion."""

import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from PIL import Image


def _default_mode():
    umask = os.umask(0)
    os.umask(umask)
    return 0o666 & ~umask


@contextmanager
def atomic_open(path, mode="w", **kwargs):
    """Open a temp file next to ``path`` and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.chmod(tmp, _default_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_uint8(img):
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_png(path, img, bits=8):
    """Write a float image in [0, 1] (HxW or HxWx3) as a PNG, atomically.

    ``bits=16`` stores grayscale images at 16-bit depth.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if bits == 16:
        if img.ndim != 2:
            raise ValueError("16-bit PNGs are grayscale only")
        arr = np.clip(np.rint(img * 65535.0), 0, 65535).astype(np.uint16)
    elif bits == 8:
        arr = to_uint8(img)
    else:
        raise ValueError(f"bits must be 8 or 16, got {bits}")
    with atomic_open(path, "wb") as fh:
        Image.fromarray(arr).save(fh, format="PNG")


def read_png(path, mode=None):
    """Read an image as float64 in [0, 1]; ``mode`` is a PIL mode such as "L" or "RGB".

    16-bit grayscale files keep their full precision when read as "L".
    """
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I") and mode in (None, "L"):
            return np.asarray(im).astype(np.float64) / 65535.0
        if mode is not None:
            im = im.convert(mode)
        arr = np.asarray(im)
    return arr.astype(np.float64) / 255.0
