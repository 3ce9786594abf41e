"""Hot-kernel backend selection.

The compiled Cython core (``_native``) is preferred; the numpy fallback
(``_python``) implements identical semantics.  ``COVERSCAN_KERNELS`` forces
one of ``native``/``python``; with no override, the compiled core is used
when it imported cleanly.

``python -m coverscan.kernels.bench`` times one backend against the other.
"""

import os

from . import _python

_choice = os.environ.get("COVERSCAN_KERNELS", "").strip().lower()

if _choice == "python":
    _impl = _python
elif _choice == "native":
    from . import _native as _impl
else:
    if _choice:
        raise ValueError(
            f"COVERSCAN_KERNELS must be 'native' or 'python', got {_choice!r}")
    try:
        from . import _native as _impl
    except ImportError:
        _impl = _python

BACKEND = _impl.BACKEND_NAME

conv_sep_replicate = _impl.conv_sep_replicate
fed_step = _impl.fed_step
fast_score_map = _impl.fast_score_map
hamming_knn = _impl.hamming_knn
hamming_select = _impl.hamming_select

CIRCLE_DX = _python.CIRCLE_DX
CIRCLE_DY = _python.CIRCLE_DY


def backends():
    """All importable backend modules, keyed by name."""
    out = {"python": _python}
    try:
        from . import _native
        out["native"] = _native
    except ImportError:
        pass
    return out
