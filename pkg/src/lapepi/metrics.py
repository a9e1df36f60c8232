"""PSNR and SSIM on luma, and per-view evaluation reports.

A PSNR of two identical images has no finite value; :func:`psnr` returns
``math.inf`` for that case and reports print it as ``identical``.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from ._io import atomic_open
from .errors import ShapeError
from .lightfield import luma

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak=1.0):
    """``10 log10(peak**2 / MSE)``; ``inf`` when the images are identical."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def is_identical(value):
    return math.isinf(value) and value > 0


def ssim_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _local_mean(img, g):
    return convolve1d(convolve1d(img, g, axis=0, mode="reflect"), g, axis=1, mode="reflect")


def ssim_map(a, b, peak=1.0):
    """Per-pixel SSIM with a separable 11x11 Gaussian window and reflected borders."""
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise ShapeError(f"ssim expects 2-D luma images, got shape {a.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError(f"image {a.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    g = ssim_window()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a = _local_mean(a, g)
    mu_b = _local_mean(b, g)
    var_a = _local_mean(a * a, g) - mu_a * mu_a
    var_b = _local_mean(b * b, g) - mu_b * mu_b
    cov = _local_mean(a * b, g) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, peak=1.0):
    return float(np.mean(ssim_map(a, b, peak)))


def input_lattice(n_t, n_s, alpha_a):
    """Grid positions of the sparse input views after densifying by ``alpha_a``.

    A grid with a single row is treated as a 3D light field: only ``s`` was
    densified.
    """
    return {
        (t, s)
        for t in range(n_t)
        for s in range(n_s)
        if s % alpha_a == 0 and (n_t == 1 or t % alpha_a == 0)
    }


def synthesized_mask(n_t, n_s, alpha_a):
    inputs = input_lattice(n_t, n_s, alpha_a)
    return [(t, s) for t in range(n_t) for s in range(n_s) if (t, s) not in inputs]


@dataclass(frozen=True)
class ViewScore:
    t: int
    s: int
    psnr_db: float
    ssim: float


def _mean(values):
    return float(np.mean(values)) if values else math.nan


def _fmt(v):
    return "identical" if is_identical(v) else f"{v:.12g}"


@dataclass
class EvalReport:
    views: list
    metadata: dict = field(default_factory=dict)

    @property
    def mean_psnr(self):
        return _mean([v.psnr_db for v in self.views])

    @property
    def mean_ssim(self):
        return _mean([v.ssim for v in self.views])

    def summary(self):
        return (f"views={len(self.views)} mean_psnr={_fmt(self.mean_psnr)} dB "
                f"mean_ssim={_fmt(self.mean_ssim)}")

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["view_t", "view_s", "psnr", "ssim"])
        for v in self.views:
            w.writerow([v.t, v.s, _fmt(v.psnr_db), _fmt(v.ssim)])
        text = buf.getvalue()
        if path is not None:
            with atomic_open(path, "w") as fh:
                fh.write(text)
        return text


def evaluate(recon, truth, mask=None, peak=1.0, metadata=None):
    """Luma PSNR/SSIM for each view in ``mask`` (every view when ``mask`` is None).

    SSIM is skipped (NaN) for views smaller than the SSIM window, which
    happens for the single-row light fields used in 3D experiments.
    """
    if recon.samples.shape[:4] != truth.samples.shape[:4]:
        raise ShapeError(f"light field shapes differ: {recon.samples.shape} vs {truth.samples.shape}")
    y_r = luma(recon).samples[..., 0]
    y_t = luma(truth).samples[..., 0]
    if mask is None:
        mask = [(t, s) for t in range(recon.n_t) for s in range(recon.n_s)]
    views = []
    for t, s in mask:
        a, b = y_r[t, s], y_t[t, s]
        q = ssim(a, b, peak) if min(a.shape) >= SSIM_WINDOW else math.nan
        views.append(ViewScore(int(t), int(s), psnr(a, b, peak), q))
    return EvalReport(views, dict(metadata or {}))
