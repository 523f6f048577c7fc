"""farmsim: capacity planning and simulation for energy-aware server farms.

Analytical Erlang-A queueing, energy-proportional power economics,
arrival-rate forecasting, staffing policies (Static / QED / Adaptive)
and a trace-driven discrete-event simulator with exact energy
accounting.
"""

from ._backend import COMPILED
from .economics import Active, EconomicModel, Off, SettingUp, net_revenue_rate, server_power
from .estimators import Ewma, Margin, Oracle, Trend, Window, estimate, evaluate_estimator
from .policies import (
    Adaptive,
    PolicySpec,
    Qed,
    StaffingDecision,
    Static,
    adaptive_staffing,
    decide,
    qed_staffing,
)
from .queueing import (
    PerformanceMetrics,
    QueueParams,
    SteadyStateDistribution,
    analyze,
    erlang_c_reference,
    performance_metrics,
    steady_state,
)
from .simulation import (
    SimConfig,
    SimResult,
    StationaryWorkload,
    TraceWorkload,
    make_workload,
    run,
    run_replications,
)
from .traces import ArrivalTrace, aggregate_log, load_binned, synthetic_diurnal_trace, write_binned

__version__ = "0.1.0"
