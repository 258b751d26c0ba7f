"""Backend selection for the packed hyper-dual activation kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation.  :func:`set_backend` switches at runtime (tests and the
kernel benchmark compare the two).
"""
from __future__ import annotations

import numpy as np

from . import _kernels_py

try:
    from . import _hdkernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("compiled", "python")
_active = "compiled" if _compiled is not None else "python"


def compiled_available() -> bool:
    return _compiled is not None


def backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}")
    if name == "compiled" and _compiled is None:
        raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
    _active = name


def _flat(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.reshape(a.shape[0], -1))


def activation_forward(kind: str, z: np.ndarray, n_first: int, dd_src: np.ndarray):
    """Apply ``kind`` to a packed stack; returns ``(y, saved)``.

    ``saved`` is whatever :func:`activation_backward` needs besides ``z``.
    """
    if kind == "tanh":
        impl = _compiled if _active == "compiled" else _kernels_py
        y, tv = impl.tanh_forward(_flat(z), n_first, dd_src)
        return y.reshape(z.shape), tv
    return _kernels_py.activation_forward(kind, z, n_first, dd_src), None


def activation_backward(kind: str, g: np.ndarray, z: np.ndarray, saved, n_first: int, dd_src: np.ndarray):
    if kind == "tanh":
        impl = _compiled if _active == "compiled" else _kernels_py
        gz = impl.tanh_backward(_flat(g), _flat(z), saved, n_first, dd_src)
        return gz.reshape(z.shape)
    return _kernels_py.activation_backward(kind, g, z, n_first, dd_src)
