"""Select the compiled event kernel when available, else the pure twin.

Set FARMSIM_PURE_PYTHON=1 to force the fallback (used by the benchmark
and the backend-parity tests).
"""

import os

if os.environ.get("FARMSIM_PURE_PYTHON") == "1":
    from . import _core_py as impl
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _core_py as impl

COMPILED = impl.COMPILED
FarmKernel = impl.FarmKernel
erlang_a_metrics = impl.erlang_a_metrics
