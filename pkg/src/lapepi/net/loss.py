import numpy as np

from ..errors import ShapeError
from ..lightfield import Epi


def l2_loss(pred, label):
    """Mean over the batch of the per-sample L2 norm of ``pred - label``.

    Accepts (N, H, W) arrays or single EPIs.  Returns ``(loss, dloss/dpred)``;
    a sample whose residual is exactly zero contributes a zero gradient.
    """
    p = pred.data if isinstance(pred, Epi) else np.asarray(pred, dtype=np.float64)
    t = label.data if isinstance(label, Epi) else np.asarray(label, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"l2_loss: prediction {p.shape} vs label {t.shape}")
    single = p.ndim == 2
    if single:
        p, t = p[None], t[None]
    r = p - t
    n = r.shape[0]
    norms = np.sqrt(np.einsum("nij,nij->n", r, r))
    loss = norms.sum() / n
    safe = np.where(norms > 0, norms, 1.0)
    grad = np.where(norms[:, None, None] > 0, r / (n * safe[:, None, None]), 0.0)
    return float(loss), (grad[0] if single else grad)
