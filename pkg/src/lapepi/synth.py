"""Analytic synthetic light fields used as ground truth.

Every layer is a periodic profile evaluated at continuous coordinates, so a
sub-pixel translation by ``k * disparity`` is exact: view ``k`` samples the
same analytic function at ``u - k * d``.  Layers are alpha-composited back
to front (ascending disparity).
"""

from dataclasses import dataclass, field

import numpy as np

from .lightfield import Axis, Colorspace, Epi, LightField4D

MAX_SINUSOIDS = 5


@dataclass(frozen=True)
class Sinusoids:
    """``offset + sum(a * cos(2*pi*k*x/period + phase))`` with integer ``k``."""

    offset: float
    terms: tuple = ()

    def __post_init__(self):
        terms = tuple((float(a), int(k), float(p)) for a, k, p in self.terms)
        if len(terms) > MAX_SINUSOIDS:
            raise ValueError(f"at most {MAX_SINUSOIDS} sinusoids per profile, got {len(terms)}")
        swing = sum(abs(a) for a, _, _ in terms)
        if self.offset - swing < 0.0 or self.offset + swing > 1.0:
            raise ValueError("sinusoid profile must stay within [0, 1]")
        object.__setattr__(self, "terms", terms)

    def __call__(self, x, period):
        out = np.full(np.shape(x), float(self.offset))
        for a, k, p in self.terms:
            out += a * np.cos(2.0 * np.pi * k * np.asarray(x) / period + p)
        return out


@dataclass(frozen=True)
class Interval:
    """Periodic box ``[start, start + length)`` box-filtered over unit pixels.

    Each sample is the fraction of the pixel footprint ``[x-1/2, x+1/2]``
    covered by the box, which gives anti-aliased edges that shift exactly.
    """

    start: float
    length: float

    def __call__(self, x, period):
        x = np.asarray(x, dtype=np.float64)
        if self.length >= period:
            return np.ones_like(x)
        rel = np.mod(x - self.start, period)
        cov = np.zeros_like(rel)
        # footprint [rel - 1/2, rel + 1/2] against the box copies at -period, 0, +period
        for k in (-1, 0, 1):
            lo = np.maximum(rel - 0.5, k * period)
            hi = np.minimum(rel + 0.5, k * period + self.length)
            cov += np.clip(hi - lo, 0.0, None)
        return np.clip(cov, 0.0, 1.0)


@dataclass(frozen=True)
class Bump:
    """Wrapped Gaussian of peak ``height`` centred at ``center``; a thin EPI line."""

    center: float
    sigma: float = 1.0
    height: float = 1.0

    def __call__(self, x, period):
        x = np.asarray(x, dtype=np.float64)
        rel = np.mod(x - self.center + 0.5 * period, period) - 0.5 * period
        out = np.zeros_like(rel)
        for k in (-1, 0, 1):
            out += np.exp(-0.5 * ((rel + k * period) / self.sigma) ** 2)
        return np.clip(self.height * out, 0.0, 1.0)


def _eval(profile, x, period):
    if profile is None:
        return np.ones(np.shape(x))
    if isinstance(profile, (int, float)):
        return np.full(np.shape(x), float(profile))
    return profile(x, period)


@dataclass(frozen=True)
class Layer:
    """One fronto-parallel scene layer.

    ``texture`` and ``coverage`` are profiles along u; the optional ``*_v``
    profiles make the layer vary along v as well (texture averaged, coverage
    multiplied).  ``tint`` scales the luminance per RGB channel.
    """

    disparity: float
    texture: object = 0.5
    coverage: object = None
    texture_v: object = None
    coverage_v: object = None
    tint: tuple = (1.0, 1.0, 1.0)

    def render(self, u, v, s, t, width, height):
        x = u - s * self.disparity
        y = v - t * self.disparity
        tex = _eval(self.texture, x, width)
        if self.texture_v is not None:
            tex = 0.5 * (tex + _eval(self.texture_v, y, height))
        alpha = _eval(self.coverage, x, width)
        if self.coverage_v is not None:
            alpha = alpha * _eval(self.coverage_v, y, height)
        return tex, alpha


@dataclass(frozen=True)
class SceneSpec:
    layers: tuple
    n_views: int
    width: int
    n_views_t: int = 1
    height: int = 1
    background: float = 0.0
    rgb: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if self.n_views < 1 or self.n_views_t < 1 or self.width < 1 or self.height < 1:
            raise ValueError("scene extents must be positive")
        ds = [layer.disparity for layer in layers]
        if ds != sorted(ds):
            raise ValueError("layers must be sorted back-to-front (ascending disparity)")
        for d in ds:
            if abs(d) > self.width / 4:
                raise ValueError(f"|disparity| {abs(d)} exceeds width/4 = {self.width / 4}")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError("background must lie in [0, 1]")


def synth_lightfield(spec):
    """Render ``spec`` into a :class:`LightField4D` (LUMA, or RGB when ``spec.rgb``)."""
    t = np.arange(spec.n_views_t, dtype=np.float64)[:, None, None, None]
    s = np.arange(spec.n_views, dtype=np.float64)[None, :, None, None]
    v = np.arange(spec.height, dtype=np.float64)[None, None, :, None]
    u = np.arange(spec.width, dtype=np.float64)[None, None, None, :]
    shape = (spec.n_views_t, spec.n_views, spec.height, spec.width)
    nc = 3 if spec.rgb else 1
    out = np.full(shape + (nc,), float(spec.background))
    for layer in spec.layers:
        tex, alpha = layer.render(u, v, s, t, spec.width, spec.height)
        tex = np.broadcast_to(tex, shape)
        alpha = np.broadcast_to(alpha, shape)[..., None]
        color = tex[..., None] * (np.asarray(layer.tint)[:nc] if spec.rgb else 1.0)
        out = alpha * color + (1.0 - alpha) * out
    cs = Colorspace.RGB if spec.rgb else Colorspace.LUMA
    return LightField4D(np.clip(out, 0.0, 1.0), cs)


def synth_epi(spec):
    """The (s, u) EPI of a 1-row scene, as an :class:`Epi`."""
    lf = synth_lightfield(spec)
    return Epi(lf.samples[0, :, 0, :, 0], Axis.US)


def toy_scene(d_max=9.0, rate=3, n_input=11, width=1152, line_sigma=1.5):
    """Three Lambertian lines plus a two-line non-Lambertian object.

    Disparities are chosen so that after angular decimation by ``rate`` the
    largest one equals ``d_max`` pixels per input view.  The dense EPI has
    ``rate * (n_input - 1) + 1`` rows.
    """
    scale = d_max / rate
    specs = [
        # (disparity / (d_max / rate), centre as fraction of width, height)
        (-0.3, 0.15, 1.0),   # D
        (0.4, 0.35, 1.0),    # C
        (0.6, 0.55, 0.5),    # B, first component
        (0.75, 0.58, 0.5),   # B, second component
        (1.0, 0.8, 1.0),     # A, the largest disparity
    ]
    layers = tuple(
        Layer(disparity=f * scale, texture=h, coverage=Bump(c * width, line_sigma))
        for f, c, h in specs
    )
    return SceneSpec(layers, rate * (n_input - 1) + 1, width, background=0.0)


def random_texture(rng, max_freq, n_terms=None, swing=0.45):
    """Random band-limited profile with integer frequencies in ``[1, max_freq]``."""
    n = int(rng.integers(1, MAX_SINUSOIDS + 1)) if n_terms is None else n_terms
    amps = rng.dirichlet(np.ones(n)) * swing * rng.uniform(0.5, 1.0)
    freqs = rng.integers(1, max_freq + 1, size=n)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    offset = rng.uniform(0.5 - (0.5 - amps.sum()), 0.5 + (0.5 - amps.sum()))
    return Sinusoids(offset, tuple(zip(amps, freqs, phases)))


def random_scene(rng, n_views, width, d_range=(0.0, 3.0), n_layers=3, max_cycles_per_px=0.2,
                 n_views_t=1, height=1):
    """A random layered scene: a full background plus partially covering layers."""
    max_freq = max(1, int(max_cycles_per_px * width))
    ds = np.sort(rng.uniform(d_range[0], d_range[1], size=n_layers))
    layers = []
    for i, d in enumerate(ds):
        tex = random_texture(rng, max_freq)
        if i == 0:
            cov = None
        else:
            cov = Interval(rng.uniform(0, width), rng.uniform(0.15, 0.6) * width)
        tex_v = cov_v = None
        if height > 1:
            tex_v = random_texture(rng, max(1, int(max_cycles_per_px * height)))
            if cov is not None:
                cov_v = Interval(rng.uniform(0, height), rng.uniform(0.3, 0.8) * height)
        layers.append(Layer(float(d), tex, cov, tex_v, cov_v))
    return SceneSpec(tuple(layers), n_views, width, n_views_t=n_views_t, height=height)
