"""Backend selection for the LSTM recurrence.

The compiled kernel is used when it imports; set ``RULETAG_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

import numpy as np

from ruletag.autodiff import _lstm_py

if os.environ.get("RULETAG_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from ruletag.autodiff import _lstm_cy as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _lstm_py


def backends():
    """Available implementations keyed by name."""
    found = {"python": _lstm_py}
    if _compiled is not None:
        found["cython"] = _compiled
    return found


def recurrence_forward(zx, wh, impl=None):
    impl = impl or _impl
    return impl.recurrence_forward(np.ascontiguousarray(zx, dtype=np.float64),
                                   np.ascontiguousarray(wh, dtype=np.float64))


def recurrence_backward(dhs, acts, cs, wh, impl=None):
    impl = impl or _impl
    return impl.recurrence_backward(np.ascontiguousarray(dhs, dtype=np.float64), acts, cs,
                                    np.ascontiguousarray(wh, dtype=np.float64))
