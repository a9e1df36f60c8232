"""Fourier-domain aliasing analysis of angularly undersampled EPIs.

Conventions
-----------
Spectra are centred (zero frequency at row ``n_a // 2``, column
``c = n_w // 2``).  Spatial frequencies are measured in bins, i.e. cycles
per EPI width, so the spatial coordinate the Gaussian pre-filter acts on is
normalised to the EPI width.  With that choice the pre-filter pair is::

    kappa(u) ~ exp(-u**2 / (2 sigma**2))   <->   F(omega) = exp(-2 pi**2 sigma**2 (omega - c)**2)

and a window of +-4 sigma in normalised units spans ``16 * sigma * c`` pixels.

A line of disparity ``d`` (pixels per view of the undersampled EPI) has its
first spectral replica crossing the spatial-frequency axis at ``1 / d``
cycles per pixel, i.e. ``n_w / d`` bins from the centre.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_open
from .errors import LapEpiError, NoAliasingError
from .lightfield import Epi, angular_decimate
from .pyramid import spatial_downsample

BETA_RANGE = (10.0, 300.0)
REFINE_BINS = 2


class PrefilterUnnecessary(LapEpiError):
    """The replica is already below ``amp_a / beta``; the filter degenerates to sigma = 0."""

    sigma = 0.0


def _data(epi):
    return epi.data if isinstance(epi, Epi) else np.asarray(epi, dtype=np.float64)


def dft2_amplitude(epi, window=None):
    """Centred magnitude of the 2D DFT of an EPI.

    ``window="hann"`` tapers the spatial axis first (for non-periodic, real
    image EPIs).
    """
    data = _data(epi)
    if data.shape[0] < 2 or data.shape[1] < 2:
        raise ValueError(f"EPI must be at least 2x2, got {data.shape}")
    if window == "hann":
        data = data * np.hanning(data.shape[1] + 2)[1:-1][None, :]
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    return np.abs(np.fft.fftshift(np.fft.fft2(data)))


@dataclass(frozen=True)
class SpectralPoints:
    p_a: tuple  # (row, col) of the spectrum centre
    p_b: tuple  # (row, col) of the lowest-frequency aliased sample
    amp_a: float
    amp_b: float
    c_u: int
    width: int
    angular_rate: int = 1

    @property
    def offset_bins(self):
        """``Omega_u(P_b) - c`` in cycles per EPI width."""
        return self.p_b[1] - self.c_u


def replica_crossing_bins(width, d_max):
    """Analytic bin offset where the first replica of a slope-``d_max`` line meets the axis."""
    return width / d_max


def locate_points(spectrum, angular_rate, d_max, c_u=None):
    """Find the spectrum centre and the lowest-frequency aliased sample.

    ``d_max`` is the largest disparity of the undersampled EPI, in pixels
    per view.  The dense EPI it came from had disparity ``d_max /
    angular_rate`` and a replica period of ``1 / angular_rate`` in its own
    angular units, so the replica crossing ``F_s / d`` lands at ``1 / d_max``
    cycles per pixel either way.  The seed bin is refined to the strongest
    bin within +-2 bins on the ``Omega_s = 0`` row.
    """
    spectrum = np.asarray(spectrum, dtype=np.float64)
    if angular_rate < 1:
        raise ValueError(f"angular_rate must be >= 1, got {angular_rate}")
    if d_max <= 0:
        raise ValueError(f"d_max must be positive, got {d_max}")
    n_a, width = spectrum.shape
    row = n_a // 2
    c = width // 2 if c_u is None else int(c_u)
    offset = replica_crossing_bins(width, d_max)
    nyquist = width - 1 - c  # largest positive bin offset present
    if offset > nyquist:
        raise NoAliasingError(
            f"no aliasing: replica crossing at {offset:.3f} bins lies beyond Nyquist ({nyquist} bins); sigma undefined"
        )
    seed = c + int(round(offset))
    lo = max(c + 1, seed - REFINE_BINS)
    hi = min(width - 1, seed + REFINE_BINS)
    window = spectrum[row, lo:hi + 1]
    col = lo + int(np.argmax(window))
    amp_a = float(spectrum[row, c])
    amp_b = float(spectrum[row, col])
    if amp_a <= 0.0:
        raise LapEpiError("spectrum centre has zero amplitude")
    if amp_b <= 0.0:
        raise NoAliasingError("no aliasing: replica band carries no energy; sigma undefined")
    return SpectralPoints((row, c), (row, col), amp_a, amp_b, c, width, angular_rate)


def shape_param(points, beta):
    """Gaussian shape parameter that brings ``|F(P_b)|`` down to ``|F(P_a)| / beta``.

    ``sigma = sqrt(-ln(amp_a / (beta * amp_b)) / (2 pi^2 (Omega_u(P_b) - c)^2))``,
    in units of the EPI width.
    """
    if not BETA_RANGE[0] <= beta <= BETA_RANGE[1]:
        raise ValueError(f"beta must lie in {list(BETA_RANGE)}, got {beta}")
    ratio = points.amp_a / (beta * points.amp_b)
    if ratio >= 1.0:
        raise PrefilterUnnecessary(f"pre-filter unnecessary at beta={beta} (amp_a / (beta amp_b) = {ratio:.4g})")
    return math.sqrt(-math.log(ratio) / (2.0 * math.pi ** 2 * points.offset_bins ** 2))


def filter_response(offset_bins, sigma):
    """Fourier-domain Gaussian evaluated ``offset_bins`` from the centre."""
    return np.exp(-2.0 * np.pi ** 2 * sigma ** 2 * np.asarray(offset_bins, dtype=np.float64) ** 2)


def kernel_span(sigma, c_u):
    """The continuous ``16 sigma c`` term of the pixel kernel size."""
    return 16.0 * sigma * c_u


def kernel_size_px(sigma, c_u):
    """Pixel kernel size ``round(16 sigma c)``, bumped to the next odd integer."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if c_u < 1:
        raise ValueError("c_u must be >= 1")
    n = int(round(kernel_span(sigma, c_u)))
    return n if n % 2 else n + 1


def prefilter_spectrum(spectrum, sigma, c_u=None):
    """Hadamard product of a centred spectrum with the Gaussian filter along Omega_u."""
    spectrum = np.asarray(spectrum, dtype=np.float64)
    width = spectrum.shape[1]
    c = width // 2 if c_u is None else c_u
    return spectrum * filter_response(np.arange(width) - c, sigma)[None, :]


def gaussian_prefilter(epi, sigma):
    """Blur an EPI along its spatial axis with the image-domain version of the filter.

    ``sigma`` is in EPI-width units; the sampled kernel has standard
    deviation ``sigma * n_w`` pixels, spans :func:`kernel_size_px` taps, and
    is applied circularly (the toy EPIs are periodic).
    """
    data = _data(epi)
    width = data.shape[1]
    size = kernel_size_px(sigma, width / 2)
    if size == 1:
        return data.copy()
    sigma_px = sigma * width
    x = np.arange(size) - (size - 1) / 2
    k = np.exp(-0.5 * (x / sigma_px) ** 2)
    k /= k.sum()
    out = np.zeros_like(data)
    for tap, shift in zip(k, x.astype(int)):
        out += tap * np.roll(data, shift, axis=1)
    return out


@dataclass(frozen=True)
class AliasRow:
    scale: int
    beta: float
    sigma: float
    kernel_size: int
    span: float
    offset_bins: int
    amp_a: float
    amp_b: float


@dataclass
class AliasReport:
    rows: list = field(default_factory=list)
    angular_rate: int = 1
    d_max: float = 0.0
    windowed: bool = False

    def get(self, scale, beta):
        for r in self.rows:
            if r.scale == scale and r.beta == beta:
                return r
        raise KeyError((scale, beta))

    def scales(self):
        return sorted({r.scale for r in self.rows})

    def betas(self):
        return sorted({r.beta for r in self.rows})

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "beta", "sigma", "kernel_size"])
        for r in self.rows:
            w.writerow([r.scale, f"{r.beta:.12g}", f"{r.sigma:.12g}", r.kernel_size])
        text = buf.getvalue()
        if path is not None:
            with atomic_open(path, "w") as fh:
                fh.write(text)
        return text


def sweep(epi, scales, betas, angular_rate, d_max, window=None):
    """Shape parameter and kernel size over spatial downsampling scales and betas.

    ``epi`` is the dense EPI; it is decimated by ``angular_rate`` (nearest
    rows) and then, per scale, spatially downsampled with the pyramid's
    Gaussian decimator.  Downsampling by ``s`` divides the disparity by ``s``.
    """
    scales = [int(s) for s in scales]
    if not scales or scales[0] != 1 or any(b != 2 * a for a, b in zip(scales, scales[1:])):
        raise ValueError(f"scales must be successive powers of two starting at 1, got {scales}")
    data = _data(epi)
    if angular_rate > 1:
        data = angular_decimate(Epi(data), angular_rate).data
    report = AliasReport(angular_rate=angular_rate, d_max=d_max, windowed=window is not None)
    for s in scales:
        low = spatial_downsample(data, s, 2)
        spec = dft2_amplitude(low, window)
        pts = locate_points(spec, angular_rate, d_max / s)
        for beta in betas:
            try:
                sigma = shape_param(pts, beta)
            except PrefilterUnnecessary:
                sigma = 0.0
            report.rows.append(AliasRow(
                s, float(beta), sigma, kernel_size_px(sigma, pts.c_u), kernel_span(sigma, pts.c_u),
                pts.offset_bins, pts.amp_a, pts.amp_b,
            ))
    return report
