"""Angular densification of EPIs, 3D light fields and 4D light fields.

The network only sees luma.  Under the default channel policy colour light
fields are split into YCbCr; Y goes through the network and the chroma
planes are interpolated linearly along the angular axes.  4D grids are
densified in two passes:

1. every input camera row is densified along ``s`` and every input camera
   column along ``t``; a view reachable both ways keeps the ``s`` result;
2. each remaining hole column is densified along ``t`` from the views that
   pass 1 produced on the input rows.

Every output view is written exactly once; :class:`Coverage` records it.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import LapEpiError, ShapeError
from .lightfield import Axis, Colorspace, Epi, LightField4D, _rgb_to_ycbcr, _ycbcr_to_rgb, upsampled_size
from .net.model import forward_batch
from .pyramid import PyramidConfig, build_lapepi, crop_width, pad_width

SUPPORTED_STRIDES = (2, 3, 4, 8)


class ChannelPolicy(str, Enum):
    LUMA = "luma"  # Y through the network, chroma interpolated linearly
    RGB = "rgb"  # every RGB channel through the network


@dataclass(frozen=True)
class ReconConfig:
    alpha_a: int = 3
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    channel_policy: ChannelPolicy = ChannelPolicy.LUMA
    copy_inputs: bool = False
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "channel_policy", ChannelPolicy(self.channel_policy))
        if self.alpha_a not in SUPPORTED_STRIDES:
            raise ValueError(f"alpha_a must be one of {SUPPORTED_STRIDES}, got {self.alpha_a}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def _pmap(fn, items, threads):
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _check_params(params, cfg):
    if params.pyramid != cfg.pyramid:
        raise ShapeError(f"network pyramid {params.pyramid} does not match config {cfg.pyramid}")


def reconstruct_array(data, params, cfg):
    """Densify one (n_a, width) array; returns the clamped (n_a', width) result."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError(f"expected a 2-D EPI, got shape {data.shape}")
    if data.shape[0] < 2:
        raise ShapeError(f"EPI needs at least 2 angular rows, got {data.shape[0]}")
    padded, pads = pad_width(data, cfg.pyramid.width_multiple)
    pyr = build_lapepi(padded, cfg.pyramid)
    out, _ = forward_batch(pyr.levels(), params, cfg.alpha_a, keep_cache=False)
    out = np.clip(crop_width(out[0], pads), 0.0, 1.0)
    if cfg.copy_inputs:
        out[::cfg.alpha_a] = data
    return out


def reconstruct_epi(epi, params, cfg=None):
    """Densify an EPI along its angular axis: ``n_a`` rows become ``alpha_a (n_a - 1) + 1``."""
    cfg = cfg or ReconConfig()
    _check_params(params, cfg)
    return epi.replace(reconstruct_array(epi.data, params, cfg))


# --- angular interpolation (chroma and baselines) -------------------------

def _keys(x, a=-0.5):
    x = np.abs(x)
    return np.where(
        x <= 1, (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1,
        np.where(x < 2, a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a, 0.0),
    )


def angular_upsample(arr, alpha, axis=0, kind="linear"):
    """Interpolate ``arr`` along ``axis`` from ``n`` to ``alpha (n - 1) + 1`` samples.

    ``kind="linear"`` is piecewise linear; ``kind="cubic"`` is the Keys cubic
    convolution kernel (a = -0.5) with replicated end samples, i.e. the 1-D
    bicubic interpolator.  Both reproduce the input samples exactly.
    """
    arr = np.moveaxis(np.asarray(arr, dtype=np.float64), axis, 0)
    n = arr.shape[0]
    if n < 2:
        raise ShapeError("angular interpolation needs at least 2 samples")
    pos = np.arange(upsampled_size(n, alpha)) / alpha
    base = np.minimum(np.floor(pos).astype(int), n - 2)
    frac = pos - base
    if kind == "linear":
        out = (1 - frac).reshape((-1,) + (1,) * (arr.ndim - 1)) * arr[base]
        out = out + frac.reshape((-1,) + (1,) * (arr.ndim - 1)) * arr[base + 1]
    elif kind == "cubic":
        out = 0.0
        for off in (-1, 0, 1, 2):
            idx = np.clip(base + off, 0, n - 1)
            wgt = _keys(frac - off).reshape((-1,) + (1,) * (arr.ndim - 1))
            out = out + wgt * arr[idx]
    else:
        raise ValueError(f"unknown interpolation kind {kind!r}")
    return np.moveaxis(out, 0, axis)


def interpolate_lf(lf, alpha, kind="cubic"):
    """Angular interpolation baseline over both angular axes (``t`` only when ``n_t > 1``)."""
    out = angular_upsample(lf.samples, alpha, axis=1, kind=kind)
    if lf.n_t > 1:
        out = angular_upsample(out, alpha, axis=0, kind=kind)
    return LightField4D(np.clip(out, 0.0, 1.0), lf.colorspace)


# --- light fields ---------------------------------------------------------

def _planes(lf, cfg):
    """Split into (planes through the network, planes interpolated, reassembly)."""
    if lf.colorspace is Colorspace.LUMA:
        return [lf.samples[..., 0]], [], lambda net, interp: net[0][..., None], Colorspace.LUMA
    if cfg.channel_policy is ChannelPolicy.RGB:
        rgb = lf.samples if lf.colorspace is Colorspace.RGB else _ycbcr_to_rgb(lf.samples)
        planes = [rgb[..., c] for c in range(3)]
        return planes, [], lambda net, interp: np.stack(net, axis=-1), Colorspace.RGB
    ycc = lf.samples if lf.colorspace is Colorspace.YCBCR else _rgb_to_ycbcr(lf.samples)
    to_rgb = lf.colorspace is Colorspace.RGB

    def join(net, interp):
        out = np.stack([net[0]] + interp, axis=-1)
        return _ycbcr_to_rgb(out) if to_rgb else out

    return [ycc[..., 0]], [ycc[..., 1], ycc[..., 2]], join, lf.colorspace


def _densify_s(plane, params, cfg):
    """(n_t, n_s, n_v, n_u) -> (n_t, n_s', n_v, n_u) through the network, one EPI at a time."""
    n_t, n_s, n_v, n_u = plane.shape
    jobs = [(t, v) for t in range(n_t) for v in range(n_v)]
    results = _pmap(lambda job: reconstruct_array(plane[job[0], :, job[1], :], params, cfg), jobs, cfg.threads)
    out = np.empty((n_t, upsampled_size(n_s, cfg.alpha_a), n_v, n_u))
    for (t, v), r in zip(jobs, results):
        out[t, :, v, :] = r
    return out


def _densify_t(plane, params, cfg):
    """(n_t, n_s, n_v, n_u) -> (n_t', n_s, n_v, n_u) through VT EPIs."""
    swapped = plane.transpose(1, 0, 3, 2)  # (s, t, u, v): VT EPIs E[t, v] at fixed (s, u)
    return _densify_s(swapped, params, cfg).transpose(1, 0, 3, 2)


def reconstruct_lf3d(lf, params, cfg=None):
    """Densify a single-row light field along ``s`` (EPIs ``E_v*(u, s)``)."""
    cfg = cfg or ReconConfig()
    _check_params(params, cfg)
    if lf.n_t != 1:
        raise ShapeError(f"reconstruct_lf3d needs n_t = 1, got {lf.n_t}")
    if lf.n_s < 2:
        raise ShapeError("need at least 2 views along s")
    net_in, interp_in, join, cs = _planes(lf, cfg)
    net = [_densify_s(p, params, cfg) for p in net_in]
    interp = [angular_upsample(p, cfg.alpha_a, axis=1) for p in interp_in]
    return LightField4D(np.clip(join(net, interp), 0.0, 1.0), cs)


@dataclass
class Coverage:
    """Write counts per output view and the pass that produced each one."""

    counts: np.ndarray
    source: np.ndarray  # 1 = pass 1 along s, 2 = pass 1 along t, 3 = pass 2

    @classmethod
    def empty(cls, n_t, n_s):
        return cls(np.zeros((n_t, n_s), dtype=int), np.zeros((n_t, n_s), dtype=int))

    def mark(self, t, s, tag):
        self.counts[t, s] += 1
        self.source[t, s] = tag

    def complete(self):
        return bool(np.all(self.counts == 1))


def _densify_4d_plane(plane, params, cfg, coverage=None):
    a = cfg.alpha_a
    n_t, n_s = plane.shape[:2]
    big_t, big_s = upsampled_size(n_t, a), upsampled_size(n_s, a)
    out = np.empty((big_t, big_s) + plane.shape[2:])
    rows_in = range(0, big_t, a)
    cols_in = range(0, big_s, a)
    holes_t = [t for t in range(big_t) if t % a]
    # pass 1: input rows along s, input columns along t (s wins where both reach)
    along_s = _densify_s(plane, params, cfg)  # (n_t, big_s, ...)
    along_t = _densify_t(plane, params, cfg)  # (big_t, n_s, ...)
    for i, t in enumerate(rows_in):
        out[t] = along_s[i]
        if coverage is not None:
            for s in range(big_s):
                coverage.mark(t, s, 1)
    for j, s in enumerate(cols_in):
        for t in holes_t:
            out[t, s] = along_t[t, j]
            if coverage is not None:
                coverage.mark(t, s, 2)
    # pass 2: hole columns along t, from the pass-1 rows (all written above)
    hole_cols = [s for s in range(big_s) if s % a]
    if hole_cols:
        src = out[list(rows_in)][:, hole_cols]  # (n_t, n_holes, ...)
        dense = _densify_t(src, params, cfg)  # (big_t, n_holes, ...)
        for k, s in enumerate(hole_cols):
            for t in holes_t:
                out[t, s] = dense[t, k]
                if coverage is not None:
                    coverage.mark(t, s, 3)
    return out


def reconstruct_lf4d(lf, params, cfg=None, coverage=None):
    """Hierarchical two-pass densification of an ``n_t x n_s`` grid.

    Pass a :class:`Coverage` (see :meth:`Coverage.empty`) to record which
    pass wrote each output view.
    """
    cfg = cfg or ReconConfig()
    _check_params(params, cfg)
    if lf.n_t < 2 or lf.n_s < 2:
        raise ShapeError(f"reconstruct_lf4d needs a grid of at least 2x2, got {lf.grid}")
    net_in, interp_in, join, cs = _planes(lf, cfg)
    net = []
    for i, p in enumerate(net_in):
        net.append(_densify_4d_plane(p, params, cfg, coverage if i == 0 else None))
    interp = [angular_upsample(angular_upsample(p, cfg.alpha_a, axis=1), cfg.alpha_a, axis=0) for p in interp_in]
    return LightField4D(np.clip(join(net, interp), 0.0, 1.0), cs)


# --- rates beyond a single stride -----------------------------------------

@dataclass(frozen=True)
class UpscaleResult:
    epi: Epi
    passes: tuple
    mode: str  # "single" or "cascade"


def plan_passes(rate):
    """Strides whose product is ``rate``: one pass when supported, else the fewest passes."""
    if rate in SUPPORTED_STRIDES:
        return (rate,)
    best = None
    stack = [((), rate)]
    while stack:
        seq, rest = stack.pop()
        if rest == 1:
            if best is None or len(seq) < len(best) or (len(seq) == len(best) and seq > best):
                best = seq
            continue
        if best is not None and len(seq) >= len(best):
            continue
        for s in SUPPORTED_STRIDES:
            if rest % s == 0:
                stack.append((seq + (s,), rest // s))
    if best is None or rate < 2:
        raise LapEpiError(f"rate {rate} cannot be factored into strides {SUPPORTED_STRIDES}")
    return tuple(sorted(best, reverse=True))


def upscale_multi(epi, params, target_rate, cfg=None):
    """Densify by ``target_rate``: a single pass (2, 3, 4, 8) or a cascade (for example 9 = 3 x 3)."""
    cfg = cfg or ReconConfig()
    passes = plan_passes(int(target_rate))
    out = epi
    for stride in passes:
        out = reconstruct_epi(out, params, ReconConfig(stride, cfg.pyramid, cfg.channel_policy, cfg.copy_inputs,
                                                       cfg.threads))
    return UpscaleResult(out, passes, "single" if len(passes) == 1 else "cascade")


__all__ = [
    "Axis",
    "ChannelPolicy",
    "Coverage",
    "ReconConfig",
    "UpscaleResult",
    "angular_upsample",
    "interpolate_lf",
    "plan_passes",
    "reconstruct_array",
    "reconstruct_epi",
    "reconstruct_lf3d",
    "reconstruct_lf4d",
    "upscale_multi",
]
