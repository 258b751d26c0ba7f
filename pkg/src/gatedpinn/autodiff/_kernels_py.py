"""Pure-numpy versions of the packed hyper-dual activation kernels.

Same contract as the compiled ``_hdkernels`` module; also hosts the
activations that never got a compiled path (relu, softplus).
"""
import numpy as np


def _derivs(kind: str, z0: np.ndarray):
    """Return (f, f', f'', f''') at z0; f''' only used by backward."""
    if kind == "tanh":
        t = np.tanh(z0)
        s1 = 1.0 - t * t
        s2 = -2.0 * t * s1
        return t, s1, s2, s1 * (6.0 * t * t - 2.0)
    if kind == "relu":
        step = (z0 > 0.0).astype(np.float64)
        zero = np.zeros_like(z0)
        return z0 * step, step, zero, zero
    if kind == "softplus":
        e = np.exp(-np.abs(z0))
        s = np.where(z0 >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        f = np.log1p(e) + np.maximum(z0, 0.0)
        s2 = s * (1.0 - s)
        return f, s, s2, s2 * (1.0 - 2.0 * s)
    raise ValueError(f"unknown activation {kind!r}")


def activation_forward(kind, z, n_first, dd_src):
    f, s1, s2, _ = _derivs(kind, z[0])
    y = np.empty_like(z)
    y[0] = f
    y[1 : n_first + 1] = s1 * z[1 : n_first + 1]
    base = 1 + n_first
    for j, src in enumerate(dd_src):
        y[base + j] = s1 * z[base + j] + s2 * z[src] * z[src]
    return y


def activation_backward(kind, g, z, n_first, dd_src):
    _, s1, s2, s3 = _derivs(kind, z[0])
    gz = np.empty_like(z)
    first = slice(1, n_first + 1)
    gz[first] = g[first] * s1
    acc = g[0] * s1 + (g[first] * z[first]).sum(axis=0) * s2
    base = 1 + n_first
    for j, src in enumerate(dd_src):
        row = base + j
        gdd = g[row]
        gz[row] = gdd * s1
        acc += gdd * (z[row] * s2 + z[src] * z[src] * s3)
        gz[src] += 2.0 * gdd * s2 * z[src]
    gz[0] = acc
    return gz


def tanh_forward(z, n_first, dd_src):
    y = activation_forward("tanh", z, n_first, dd_src)
    return y, y[0].copy()


def tanh_backward(g, z, tv, n_first, dd_src):
    return activation_backward("tanh", g, z, n_first, dd_src)
