"""Backend selection for the hot ECM kernels.

The compiled extension is used when importable; setting the environment
variable ``UNKSIZE_PURE_PYTHON=1`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"

if os.environ.get("UNKSIZE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

estep = _impl.estep
index_newton_terms = _impl.index_newton_terms
t2_beta_part = _impl.t2_beta_part
log_factorials = _impl.log_factorials

__all__ = ["BACKEND", "estep", "index_newton_terms", "t2_beta_part", "log_factorials"]
