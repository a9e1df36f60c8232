"""Light-field and EPI data model.

A light field is stored as a float64 array indexed ``(t, s, v, u, channel)``:
two angular axes (t rows, s columns of the camera grid), two spatial axes
(v rows, u columns of each view) and a trailing channel axis.  An epipolar
plane image (EPI) fixes one spatial and one angular coordinate:

* ``Axis.US``: ``E[s, u] = L(u, v*, s, t*)`` -- a horizontal line of pixels
  gathered across the views of one camera row.
* ``Axis.VT``: ``E[t, v] = L(u*, v, s*, t)`` -- the vertical counterpart.
"""

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_open, read_png, write_png
from .errors import ColorspaceError, ManifestError, ShapeError


class Colorspace(str, enum.Enum):
    RGB = "RGB"
    YCBCR = "YCBCR"
    LUMA = "LUMA"


class Axis(str, enum.Enum):
    US = "US"
    VT = "VT"


@dataclass(frozen=True)
class Epi:
    """A 2D slice of a light field, indexed (angular, spatial)."""

    data: np.ndarray
    axis_tag: Axis = Axis.US

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ShapeError(f"EPI data must be 2D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("EPI data contains non-finite values")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "axis_tag", Axis(self.axis_tag))

    @property
    def n_a(self):
        return self.data.shape[0]

    @property
    def n_w(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def replace(self, data):
        return Epi(data, self.axis_tag)


@dataclass(frozen=True)
class LightField4D:
    samples: np.ndarray
    colorspace: Colorspace = Colorspace.RGB

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 4:
            samples = samples[..., None]
        if samples.ndim != 5:
            raise ShapeError(f"light field must be (t, s, v, u, c), got shape {samples.shape}")
        if min(samples.shape) < 1:
            raise ShapeError(f"empty light field axis in shape {samples.shape}")
        cs = Colorspace(self.colorspace)
        expected = 1 if cs is Colorspace.LUMA else 3
        if samples.shape[4] != expected:
            raise ShapeError(f"{cs.value} light field needs {expected} channels, got {samples.shape[4]}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("light field contains non-finite samples")
        if samples.min() < 0.0 or samples.max() > 1.0:
            raise ValueError("light field samples must lie in [0, 1]")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "colorspace", cs)

    @property
    def n_t(self):
        return self.samples.shape[0]

    @property
    def n_s(self):
        return self.samples.shape[1]

    @property
    def n_v(self):
        return self.samples.shape[2]

    @property
    def n_u(self):
        return self.samples.shape[3]

    @property
    def channels(self):
        return self.samples.shape[4]

    @property
    def grid(self):
        return self.n_t, self.n_s

    def view(self, t, s):
        return self.samples[t, s]


# BT.601 full range, chroma offset 0.5 for unit-range data.
_KR, _KG, _KB = 0.299, 0.587, 0.114


def _rgb_to_ycbcr(rgb):
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = _KR * r + _KG * g + _KB * b
    cb = 0.5 + (b - y) / (2.0 * (1.0 - _KB))
    cr = 0.5 + (r - y) / (2.0 * (1.0 - _KR))
    return np.stack([y, cb, cr], axis=-1)


def _ycbcr_to_rgb(ycc):
    y, cb, cr = ycc[..., 0], ycc[..., 1] - 0.5, ycc[..., 2] - 0.5
    r = y + 2.0 * (1.0 - _KR) * cr
    b = y + 2.0 * (1.0 - _KB) * cb
    g = (y - _KR * r - _KB * b) / _KG
    return np.stack([r, g, b], axis=-1)


def rgb_to_luma(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    return _KR * rgb[..., 0] + _KG * rgb[..., 1] + _KB * rgb[..., 2]


def rgb_to_ycbcr(lf):
    if lf.colorspace is not Colorspace.RGB:
        raise ColorspaceError(f"expected an RGB light field, got {lf.colorspace.value}")
    return LightField4D(np.clip(_rgb_to_ycbcr(lf.samples), 0.0, 1.0), Colorspace.YCBCR)


def ycbcr_to_rgb(lf):
    if lf.colorspace is not Colorspace.YCBCR:
        raise ColorspaceError(f"expected a YCbCr light field, got {lf.colorspace.value}")
    return LightField4D(np.clip(_ycbcr_to_rgb(lf.samples), 0.0, 1.0), Colorspace.RGB)


def luma(lf):
    """Return the luma-only light field (Y of YCbCr for colour input)."""
    if lf.colorspace is Colorspace.LUMA:
        return lf
    if lf.colorspace is Colorspace.YCBCR:
        return LightField4D(lf.samples[..., :1], Colorspace.LUMA)
    return LightField4D(np.clip(rgb_to_luma(lf.samples)[..., None], 0.0, 1.0), Colorspace.LUMA)


def _check_index(name, value, size):
    if not 0 <= value < size:
        raise IndexError(f"{name}={value} out of range [0, {size})")


def _slice_index(lf, axis, fixed_spatial, fixed_angular, channel):
    axis = Axis(axis)
    _check_index("channel", channel, lf.channels)
    if axis is Axis.US:
        _check_index("fixed_spatial (v)", fixed_spatial, lf.n_v)
        _check_index("fixed_angular (t)", fixed_angular, lf.n_t)
        return (fixed_angular, slice(None), fixed_spatial, slice(None), channel)
    _check_index("fixed_spatial (u)", fixed_spatial, lf.n_u)
    _check_index("fixed_angular (s)", fixed_angular, lf.n_s)
    return (slice(None), fixed_angular, slice(None), fixed_spatial, channel)


def extract_epi(lf, axis, fixed_spatial, fixed_angular, channel=0):
    """Slice an EPI out of ``lf``.

    For ``Axis.US`` the EPI is ``L(u, v=fixed_spatial, s, t=fixed_angular)``
    indexed ``[s, u]``; for ``Axis.VT`` it is ``L(u=fixed_spatial, v, s=fixed_angular, t)``
    indexed ``[t, v]``.
    """
    idx = _slice_index(lf, axis, fixed_spatial, fixed_angular, channel)
    return Epi(lf.samples[idx].copy(), Axis(axis))


def insert_epi(lf, epi, axis, fixed_spatial, fixed_angular, channel=0, inplace=False):
    """Write ``epi`` into the slice addressed like :func:`extract_epi`.

    Returns a new light field unless ``inplace`` is set, in which case the
    samples array of ``lf`` is modified and ``lf`` itself is returned.
    """
    idx = _slice_index(lf, axis, fixed_spatial, fixed_angular, channel)
    target = lf.samples[idx]
    if epi.shape != target.shape:
        raise ShapeError(f"EPI shape {epi.shape} does not match slice shape {target.shape}")
    if epi.data.min() < 0.0 or epi.data.max() > 1.0:
        raise ValueError("EPI values must lie in [0, 1] to be written into a light field")
    if inplace:
        lf.samples[idx] = epi.data
        return lf
    samples = lf.samples.copy()
    samples[idx] = epi.data
    return LightField4D(samples, lf.colorspace)


def angular_decimate(epi, rate):
    """Keep angular rows 0, rate, 2*rate, ... (nearest sampling)."""
    if rate < 1:
        raise ValueError(f"rate must be >= 1, got {rate}")
    if (epi.n_a - 1) % rate:
        raise ShapeError(f"angular size {epi.n_a} - 1 is not divisible by rate {rate}")
    return epi.replace(epi.data[::rate])


def decimated_size(n, rate):
    return (n - 1) // rate + 1


def upsampled_size(n, rate):
    return rate * (n - 1) + 1


# --- on-disk format -------------------------------------------------------

MANIFEST_NAME = "manifest.json"
DEFAULT_PATTERN = "view_{t:02d}_{s:02d}.png"


def _read_manifest(path):
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from None
    if not isinstance(manifest, dict):
        raise ManifestError(f"malformed manifest {path}: expected an object")
    for key in ("rows", "cols", "pattern"):
        if key not in manifest:
            raise ManifestError(f"malformed manifest {path}: missing field '{key}'")
    rows, cols = manifest["rows"], manifest["cols"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 1 and cols >= 1):
        raise ManifestError(f"malformed manifest {path}: rows/cols must be positive integers")
    cs = manifest.get("colorspace", "RGB")
    if cs not in ("RGB", "LUMA"):
        raise ManifestError(f"malformed manifest {path}: unsupported colorspace {cs!r}")
    try:
        manifest["pattern"].format(t=0, s=0)
    except (KeyError, IndexError, ValueError, AttributeError):
        raise ManifestError(f"malformed manifest {path}: bad pattern {manifest['pattern']!r}") from None
    return rows, cols, manifest["pattern"], Colorspace(cs)


def load_lightfield(path):
    """Load a light field from a directory holding ``manifest.json`` and PNG views.

    The manifest carries ``rows`` (n_t), ``cols`` (n_s), ``pattern`` (a
    ``str.format`` template with ``t`` and ``s`` fields) and ``colorspace``
    (``RGB`` or ``LUMA``).
    """
    root = Path(path)
    rows, cols, pattern, cs = _read_manifest(root / MANIFEST_NAME)
    mode = "L" if cs is Colorspace.LUMA else "RGB"
    views = {}
    size = None
    for t in range(rows):
        for s in range(cols):
            f = root / pattern.format(t=t, s=s)
            if not f.is_file():
                raise ManifestError(f"missing view ({t},{s}): {f.name}")
            img = read_png(f, mode)
            if size is None:
                size = img.shape[:2]
            elif img.shape[:2] != size:
                raise ShapeError(
                    f"inconsistent spatial size: view ({t},{s}) is {img.shape[:2]}, expected {size}"
                )
            views[t, s] = img
    samples = np.empty((rows, cols) + size + (1 if cs is Colorspace.LUMA else 3,))
    for (t, s), img in views.items():
        samples[t, s] = img.reshape(samples.shape[2:])
    return LightField4D(samples, cs)


def save_lightfield(lf, path, pattern=DEFAULT_PATTERN):
    """Write ``lf`` as 8-bit PNG views plus a manifest; YCbCr is stored as RGB."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if lf.colorspace is Colorspace.YCBCR:
        lf = ycbcr_to_rgb(lf)
    for t in range(lf.n_t):
        for s in range(lf.n_s):
            write_png(root / pattern.format(t=t, s=s), lf.samples[t, s])
    manifest = {"rows": lf.n_t, "cols": lf.n_s, "pattern": pattern, "colorspace": lf.colorspace.value}
    with atomic_open(root / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return root
