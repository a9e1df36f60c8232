"""Laplacian-pyramid EPI (LapEPI) decomposition.

Only the spatial axis of an EPI is resampled; the angular axis is never
touched.  For ``P`` levels and scale gap ``alpha_s``:

* ``G^p = E downsampled by alpha_s**(P - p)``  (Gaussian pyramid, ``G^P = E``)
* level 1 is ``G^1``
* level p >= 2 is the pair ``(R^p, R^p * k^p)`` with
  ``R^p = G^p - upsample(G^(p-1), alpha_s)``

so ``G^p = upsample(G^(p-1)) + R^p`` and :func:`collapse` recovers ``E``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from .errors import ShapeError
from .lightfield import Epi

DECIMATION_KERNEL_SIZE = 5


def gaussian_kernel_1d(size):
    """Normalised Gaussian taps with ``sigma = (size - 1) / 8``.

    The half-width is then four standard deviations, i.e. the kernel is a
    Gaussian truncated at +-4 sigma.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {size}")
    if size == 1:
        return np.ones(1)
    sigma = (size - 1) / 8.0
    x = np.arange(size) - (size - 1) / 2
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def kernel_sigma(size):
    return (size - 1) / 8.0


def blur_spatial(data, size):
    """Convolve along the last (spatial) axis with a reflect-padded Gaussian."""
    if size == 1:
        return np.array(data, dtype=np.float64, copy=True)
    return convolve1d(np.asarray(data, dtype=np.float64), gaussian_kernel_1d(size), axis=-1, mode="reflect")


def _as_data(x):
    return x.data if isinstance(x, Epi) else np.asarray(x, dtype=np.float64)


def _wrap(template, data):
    return template.replace(data) if isinstance(template, Epi) else data


def _octaves(factor, alpha_s):
    n, f = 0, 1
    while f < factor:
        f *= alpha_s
        n += 1
    if f != factor:
        raise ValueError(f"factor {factor} is not a power of alpha_s={alpha_s}")
    return n


def spatial_downsample(epi, factor, alpha_s=2):
    """Blur with the 5-tap Gaussian and keep every ``alpha_s``-th column, per octave."""
    data = _as_data(epi)
    n_oct = _octaves(factor, alpha_s)
    if data.shape[-1] % factor:
        raise ShapeError(f"spatial width {data.shape[-1]} is not divisible by {factor}")
    for _ in range(n_oct):
        data = blur_spatial(data, DECIMATION_KERNEL_SIZE)[..., ::alpha_s]
    return _wrap(epi, data)


def spatial_upsample(epi, factor):
    """Linear interpolation to ``width * factor`` samples, clamped past the last one.

    Coarse sample ``i`` sits at fine position ``i * factor`` so original
    samples are reproduced exactly.
    """
    data = _as_data(epi)
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return _wrap(epi, data.copy())
    n = data.shape[-1]
    pos = np.arange(n * factor) / factor
    i0 = np.minimum(np.floor(pos).astype(int), n - 1)
    i1 = np.minimum(i0 + 1, n - 1)
    w = pos - i0
    w[i0 == n - 1] = 0.0
    out = data[..., i0] * (1.0 - w) + data[..., i1] * w
    return _wrap(epi, out)


@dataclass(frozen=True)
class PyramidConfig:
    P: int = 3
    alpha_s: int = 2
    level_kernel_sizes: tuple = (5, 13)

    def __post_init__(self):
        sizes = tuple(int(k) for k in self.level_kernel_sizes)
        object.__setattr__(self, "level_kernel_sizes", sizes)
        if self.P < 2:
            raise ValueError("P must be >= 2")
        if self.alpha_s < 2:
            raise ValueError("alpha_s must be >= 2")
        if len(sizes) != self.P - 1:
            raise ValueError(f"need {self.P - 1} level kernel sizes, got {len(sizes)}")
        if any(k < 3 or k % 2 == 0 for k in sizes):
            raise ValueError("level kernel sizes must be odd and >= 3")
        if list(sizes) != sorted(sizes):
            raise ValueError("level kernel sizes must be nondecreasing with the level")

    @property
    def width_multiple(self):
        return self.alpha_s ** (self.P - 1)

    def level_factor(self, p):
        """Spatial downsampling factor of level ``p`` (1-based)."""
        return self.alpha_s ** (self.P - p)

    def kernel_size(self, p):
        return self.level_kernel_sizes[p - 2]


@dataclass(frozen=True)
class LapEpiPyramid:
    level1: np.ndarray
    residuals: tuple  # ((R_p, R_p_blurred) for p = 2..P)
    config: PyramidConfig = field(default_factory=PyramidConfig)
    axis_tag: str = "US"

    @property
    def n_a(self):
        return self.level1.shape[-2]

    @property
    def width(self):
        return self.residuals[-1][0].shape[-1]

    def levels(self):
        """Network inputs: level 1 as (n_a, w1), then (n_a, w_p, 2) residual pairs."""
        out = [self.level1]
        out.extend(np.stack(pair, axis=-1) for pair in self.residuals)
        return out

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def scaled(self, a):
        return LapEpiPyramid(
            a * self.level1,
            tuple((a * r, a * rb) for r, rb in self.residuals),
            self.config,
            self.axis_tag,
        )

    def _combine(self, other, a, b):
        return LapEpiPyramid(
            a * self.level1 + b * other.level1,
            tuple(
                (a * r1 + b * r2, a * b1 + b * b2)
                for (r1, b1), (r2, b2) in zip(self.residuals, other.residuals)
            ),
            self.config,
            self.axis_tag,
        )


def pad_width(data, multiple):
    """Reflect-pad the last axis up to a multiple; returns (padded, (left, right))."""
    data = _as_data(data)
    w = data.shape[-1]
    total = (-w) % multiple
    left, right = total // 2, total - total // 2
    if total == 0:
        return data, (0, 0)
    pad = [(0, 0)] * (data.ndim - 1) + [(left, right)]
    mode = "reflect" if w > max(left, right) else "symmetric"
    return np.pad(data, pad, mode=mode), (left, right)


def crop_width(data, pads):
    left, right = pads
    arr = _as_data(data)
    return _wrap(data, arr[..., left:arr.shape[-1] - right])


def build_lapepi(epi, cfg=None):
    cfg = cfg or PyramidConfig()
    data = _as_data(epi)
    if data.shape[-1] % cfg.width_multiple:
        raise ShapeError(
            f"spatial width {data.shape[-1]} must be padded to a multiple of {cfg.width_multiple}"
        )
    gauss = {p: spatial_downsample(data, cfg.level_factor(p), cfg.alpha_s) for p in range(1, cfg.P + 1)}
    residuals = []
    for p in range(2, cfg.P + 1):
        r = gauss[p] - spatial_upsample(gauss[p - 1], cfg.alpha_s)
        residuals.append((r, blur_spatial(r, cfg.kernel_size(p))))
    tag = epi.axis_tag.value if isinstance(epi, Epi) else "US"
    return LapEpiPyramid(gauss[1], tuple(residuals), cfg, tag)


def collapse(pyr):
    """Invert :func:`build_lapepi` using the unblurred residuals."""
    g = pyr.level1
    for r, _ in pyr.residuals:
        g = spatial_upsample(g, pyr.config.alpha_s) + r
    return Epi(g, pyr.axis_tag) if g.ndim == 2 else g
