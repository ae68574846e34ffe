"""Kernel backend selection.

The compiled extension ``demiclosure._kernels`` is used when it imports;
otherwise the numpy twin in ``demiclosure._kernels_py`` is used. Setting
``DEMICLOSURE_PURE_PYTHON=1`` forces the fallback.

All kernels take 2-D C-contiguous float64 arrays (one point per row).
"""
import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)

NAMES = (
    "soft_threshold",
    "project_ball",
    "project_box",
    "project_halfspace",
    "project_affine",
    "fne_margins",
    "ne_margins",
    "monotone_min_margin",
)


def _load_compiled():
    if os.environ.get("DEMICLOSURE_PURE_PYTHON", "") not in ("", "0"):
        return None
    try:
        from . import _kernels
    except ImportError as exc:
        log.debug("compiled kernels unavailable: %s", exc)
        return None
    return _kernels


_compiled = _load_compiled()
_impl = _compiled if _compiled is not None else _kernels_py

BACKEND = "cython" if _compiled is not None else "python"
HAVE_COMPILED = _compiled is not None

soft_threshold = _impl.soft_threshold
project_ball = _impl.project_ball
project_box = _impl.project_box
project_halfspace = _impl.project_halfspace
project_affine = _impl.project_affine
fne_margins = _impl.fne_margins
ne_margins = _impl.ne_margins
monotone_min_margin = _impl.monotone_min_margin


def backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    else:
        try:
            from . import _kernels
            out["cython"] = _kernels
        except ImportError:
            pass
    return out
