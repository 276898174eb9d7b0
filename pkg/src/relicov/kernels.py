"""Backend selection for the numerical hot kernels.

The compiled Cython module is preferred when it was built; otherwise the
pure-Python implementations take over transparently.  Setting the
environment variable ``RELICOV_PURE_PYTHON=1`` forces the fallback, which
is mainly useful for benchmarking (see benchmarks/bench_kernels.py) and
for debugging.
"""

import os

from relicov import _kernels_py

if os.environ.get("RELICOV_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from relicov import _kernels_c as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

lgamma_lanczos = _impl.lgamma_lanczos
betainc_reg = _impl.betainc_reg
gammainc_lower = _impl.gammainc_lower
log_joint = _impl.log_joint
accept_log_ratio = _impl.accept_log_ratio
run_chain = _impl.run_chain

__all__ = [
    "BACKEND",
    "lgamma_lanczos",
    "betainc_reg",
    "gammainc_lower",
    "log_joint",
    "accept_log_ratio",
    "run_chain",
]
