"""LapEPI-net: per-level branches, an hourglass body and an angular deconvolution.

Data flow for ``P`` pyramid levels (``alpha_s`` spatial gap, ``alpha_a``
angular upsampling)::

    level 1 (1 ch)      -> conv_fe1 -> deconv_s1 (stride [1, alpha_s**(P-1)])
    level p (2 ch)      -> conv_fe{p} -> deconv_s{p} (stride [1, alpha_s**(P-p)]) -> conv_pe{p}
    level P (2 ch)      -> conv_fe{P} -> conv_pe{P}
    concat (56 P ch)    -> conv_s -> conv_m1..conv_m4 -> conv_e -> deconv_a (stride [alpha_a, 1])

Every layer except ``deconv_a`` is followed by a PReLU.  A strided spatial
deconvolution returns ``s (n - 1) + 1`` samples; the last sample is
replicated ``s - 1`` times so every branch ends at the full width.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from ..lightfield import Epi
from ..pyramid import LapEpiPyramid, PyramidConfig
from . import ops

N_FEATURES = 56
N_SHRINK = 24
N_MAPPING = 4
FE_KERNEL = (5, 5)
DECONV_S_KERNEL = (5, 5)
MAP_KERNEL = (3, 3)
DECONV_A_KERNEL = (9, 9)


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str  # "conv" | "deconv"
    kernel: tuple
    in_ch: int
    out_ch: int
    stride: tuple = (1, 1)
    has_prelu: bool = True

    @property
    def weight_shape(self):
        return (self.out_ch, self.in_ch) + tuple(self.kernel)

    @property
    def n_params(self):
        n = int(np.prod(self.weight_shape)) + self.out_ch
        return n + (self.out_ch if self.has_prelu else 0)


def layer_specs(pyramid=None, alpha_a=3, n_features=N_FEATURES, n_shrink=N_SHRINK, n_mapping=N_MAPPING):
    """The layer table, in declaration order.

    ``n_features``/``n_shrink``/``n_mapping`` default to the published
    widths; smaller values are only used to make exhaustive gradient checks
    affordable.
    """
    cfg = pyramid or PyramidConfig()
    P, a_s = cfg.P, cfg.alpha_s
    f = n_features
    specs = []
    for p in range(1, P + 1):
        specs.append(LayerSpec(f"conv_fe{p}", "conv", FE_KERNEL, 1 if p == 1 else 2, f))
    for p in range(1, P):
        specs.append(LayerSpec(f"deconv_s{p}", "deconv", DECONV_S_KERNEL, f, f, (1, a_s ** (P - p))))
    for p in range(2, P + 1):
        specs.append(LayerSpec(f"conv_pe{p}", "conv", (1, cfg.kernel_size(p)), f, f))
    specs.append(LayerSpec("conv_s", "conv", (1, 1), f * P, n_shrink))
    for m in range(1, n_mapping + 1):
        specs.append(LayerSpec(f"conv_m{m}", "conv", MAP_KERNEL, n_shrink, n_shrink))
    specs.append(LayerSpec("conv_e", "conv", (1, 1), n_shrink, f))
    specs.append(LayerSpec("deconv_a", "deconv", DECONV_A_KERNEL, f, 1, (alpha_a, 1), has_prelu=False))
    return specs


@dataclass
class NetworkParams:
    """Learned arrays keyed ``{layer: {"weight", "bias"[, "slope"]}}``.

    ``alpha_a`` is the angular stride the model was trained with; inference
    may override it because the stride does not change any weight shape.
    """

    layers: dict
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    alpha_a: int = 3
    n_features: int = N_FEATURES
    n_shrink: int = N_SHRINK
    n_mapping: int = N_MAPPING

    @property
    def P(self):
        return self.pyramid.P

    @property
    def alpha_s(self):
        return self.pyramid.alpha_s

    def specs(self, alpha_a=None):
        return layer_specs(self.pyramid, alpha_a or self.alpha_a, self.n_features, self.n_shrink, self.n_mapping)

    def arrays(self):
        """``(layer, key, array)`` triples in declaration order."""
        for spec in self.specs():
            layer = self.layers[spec.name]
            for key in ("weight", "bias", "slope"):
                if key in layer:
                    yield spec.name, key, layer[key]

    def n_params(self):
        return sum(a.size for _, _, a in self.arrays())

    def copy(self):
        return NetworkParams(
            {k: {kk: vv.copy() for kk, vv in v.items()} for k, v in self.layers.items()},
            self.pyramid, self.alpha_a, self.n_features, self.n_shrink, self.n_mapping,
        )

    def validate(self):
        for spec in self.specs():
            layer = self.layers.get(spec.name)
            if layer is None:
                raise ShapeError(f"missing layer {spec.name}")
            if layer["weight"].shape != spec.weight_shape:
                raise ShapeError(f"{spec.name}: weight shape {layer['weight'].shape} != {spec.weight_shape}")
            if layer["bias"].shape != (spec.out_ch,):
                raise ShapeError(f"{spec.name}: bias shape {layer['bias'].shape}")
            if spec.has_prelu and layer.get("slope", np.empty(0)).shape != (spec.out_ch,):
                raise ShapeError(f"{spec.name}: PReLU slope missing or misshaped")
            for a in layer.values():
                if not np.all(np.isfinite(a)):
                    raise ValueError(f"{spec.name}: non-finite parameters")


def zeros_like_params(params):
    return {k: {kk: np.zeros_like(vv) for kk, vv in v.items()} for k, v in params.layers.items()}


def _layer(spec, params, x, stride=None):
    """Apply one layer (+ PReLU); returns (out, cache)."""
    p = params.layers[spec.name]
    stride = stride or spec.stride
    if spec.kind == "conv":
        y, c = ops.conv_nhwc_forward(x, p["weight"], p["bias"], stride)
    else:
        y, c = ops.deconv_nhwc_forward(x, p["weight"], p["bias"], stride)
    pc = None
    if spec.has_prelu:
        y, pc = ops.prelu_nhwc_forward(y, p["slope"])
    return y, (spec, stride, c, pc)


def _layer_backward(dy, cache, grads, need_dx=True):
    spec, stride, c, pc = cache
    if pc is not None:
        dy, dslope = ops.prelu_nhwc_backward(dy, pc)
        grads[spec.name]["slope"] += dslope
    if spec.kind == "conv":
        dx, dw, db = ops.conv_nhwc_backward(dy, c, need_dx)
    else:
        dx, dw, db = ops.deconv_nhwc_backward(dy, c, need_dx)
    grads[spec.name]["weight"] += dw
    grads[spec.name]["bias"] += db
    return dx


def _prepare_levels(levels, cfg):
    """Batched channels-last network inputs; accepts unbatched level arrays too."""
    if len(levels) != cfg.P:
        raise ShapeError(f"expected {cfg.P} pyramid levels, got {len(levels)}")
    l1 = np.asarray(levels[0], dtype=np.float64)
    if l1.ndim == 2:
        l1 = l1[None]
    xs = [l1[..., None]]
    for lv in levels[1:]:
        lv = np.asarray(lv, dtype=np.float64)
        if lv.ndim == 3:
            lv = lv[None]
        if lv.shape[-1] != 2:
            raise ShapeError("residual levels must carry the (R, R*kappa) pair on the last axis")
        xs.append(lv)
    n, n_a, w1, _ = xs[0].shape
    for p, x in enumerate(xs, start=1):
        expected = w1 * cfg.alpha_s ** (p - 1)
        if x.shape[0] != n or x.shape[1] != n_a or x.shape[2] != expected:
            raise ShapeError(f"level {p} has shape {x.shape[1:3]}, expected ({n_a}, {expected})")
    return xs


def forward_batch(levels, params, alpha_a=None, keep_cache=True):
    """Run the network on batched pyramid levels.

    ``levels[0]`` has shape (N, n_a, w1); ``levels[p-1]`` for p >= 2 has
    shape (N, n_a, w_p, 2).  Returns ``(out, cache)`` with ``out`` of shape
    (N, alpha_a (n_a - 1) + 1, W).
    """
    cfg = params.pyramid
    alpha_a = alpha_a or params.alpha_a
    specs = {s.name: s for s in params.specs(alpha_a)}
    xs = _prepare_levels(levels, cfg)
    if xs[0].shape[1] < 2:
        raise ShapeError("angular size must be >= 2")
    width = xs[-1].shape[2]
    caches = {}
    branches = []
    for p in range(1, cfg.P + 1):
        chain = []
        y, c = _layer(specs[f"conv_fe{p}"], params, xs[p - 1])
        chain.append(("layer", c))
        if p < cfg.P:
            y, c = _layer(specs[f"deconv_s{p}"], params, y)
            chain.append(("layer", c))
            extra = width - y.shape[2]
            y = ops.pad_right_edge(y, extra)
            chain.append(("pad", extra))
        if p > 1:
            y, c = _layer(specs[f"conv_pe{p}"], params, y)
            chain.append(("layer", c))
        if y.shape[2] != width:
            raise ShapeError(f"branch {p} ends at width {y.shape[2]}, expected {width}")
        branches.append(y)
        caches[p] = chain
    y = np.concatenate(branches, axis=-1)
    body = []
    for name in ["conv_s"] + [f"conv_m{m}" for m in range(1, params.n_mapping + 1)] + ["conv_e", "deconv_a"]:
        y, c = _layer(specs[name], params, y)
        body.append(c)
    out = y[..., 0]
    cache = None
    if keep_cache:
        cache = {"branches": caches, "body": body, "widths": [b.shape[-1] for b in branches], "params": params}
    return out, cache


def backward_batch(dout, cache, need_input_grads=False):
    """Reverse-mode gradients of ``sum(dout * out)`` w.r.t. parameters (and inputs)."""
    if cache is None:
        raise ValueError("backward needs the cache from forward_batch(keep_cache=True)")
    params = cache["params"]
    grads = zeros_like_params(params)
    dy = np.asarray(dout, dtype=np.float64)[..., None]
    for c in reversed(cache["body"]):
        dy = _layer_backward(dy, c, grads)
    splits = np.cumsum(cache["widths"])[:-1]
    dbranches = np.split(dy, splits, axis=-1)
    input_grads = []
    for p in range(1, params.P + 1):
        d = dbranches[p - 1]
        chain = cache["branches"][p]
        for i in range(len(chain) - 1, -1, -1):
            kind, c = chain[i]
            first = i == 0
            if kind == "pad":
                d = ops.pad_right_edge_backward(d, c)
            else:
                d = _layer_backward(d, c, grads, need_dx=not first or need_input_grads)
        input_grads.append(d)
    if need_input_grads:
        gi = [input_grads[0][..., 0]] + input_grads[1:]
        return grads, gi
    return grads


def forward(pyr, params, alpha_a=None):
    """Reconstruct one EPI from its LapEPI pyramid."""
    if pyr.config != params.pyramid:
        raise ShapeError(f"pyramid config {pyr.config} does not match the network's {params.pyramid}")
    out, _ = forward_batch(pyr.levels(), params, alpha_a, keep_cache=False)
    return Epi(out[0], pyr.axis_tag)


def backward(pyr, params, grad_output, alpha_a=None):
    """Gradients of ``<grad_output, forward(pyr)>``: (param grads, level grads)."""
    _, cache = forward_batch(pyr.levels(), params, alpha_a)
    g = grad_output.data if isinstance(grad_output, Epi) else np.asarray(grad_output)
    grads, gi = backward_batch(g[None], cache, need_input_grads=True)
    return grads, [x[0] for x in gi]


def output_shape(n_a, width, alpha_a):
    return alpha_a * (n_a - 1) + 1, width
