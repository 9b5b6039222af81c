"""Backend selection for the hot kernels.

The compiled extension (``dkvc._native``) is used when it imported cleanly;
otherwise the numpy fallback takes over. Set ``DKVC_BACKEND=pure`` or
``DKVC_BACKEND=native`` to force one side (the latter raises if the extension
is missing). Both implement:

- ``scaled_sqdist(a, b, inv_scale)``: pairwise scaled squared distances,
- ``dtw(dist)``: dynamic time warping cost and path.
"""

import os

import numpy as np

from . import _pure
from .errors import ConfigError

try:
    from . import _native
except ImportError:
    _native = None

_requested = os.environ.get("DKVC_BACKEND", "").strip().lower()
if _requested == "pure":
    _impl = _pure
elif _requested == "native":
    if _native is None:
        raise ConfigError("DKVC_BACKEND=native but the compiled extension is missing")
    _impl = _native
elif _requested == "":
    _impl = _native if _native is not None else _pure
else:
    raise ConfigError(f"unknown DKVC_BACKEND value: {_requested!r}")


def backend_name() -> str:
    return _impl.NAME


def have_native() -> bool:
    return _native is not None


def scaled_sqdist(a: np.ndarray, b: np.ndarray, inv_scale: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    inv_scale = np.ascontiguousarray(inv_scale, dtype=np.float64)
    return _impl.scaled_sqdist(a, b, inv_scale)


def dtw(dist: np.ndarray) -> tuple[float, np.ndarray]:
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    return _impl.dtw(dist)
