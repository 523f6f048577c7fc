"""Command-line interface: analyze | staff | simulate | compare | estimate.

Exit codes: 0 success, 2 invalid parameters or configuration, 1 runtime
failure.  Summary numbers print with 6 significant digits; output files
store full precision.
"""

import argparse
import json
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import asdict
from pathlib import Path

from .economics import EconomicModel
from .errors import FarmsimError
from .estimators import Ewma, Margin, Oracle, Trend, Window, evaluate_estimator
from .policies import Adaptive, PolicySpec, Qed, Static, adaptive_staffing, qed_staffing
from .queueing import QueueParams, analyze as analyze_queue
from .simulation import EPOCH_CSV_HEADER, SimConfig, make_workload, run, run_replications
from .traces import load_binned, synthetic_diurnal_trace

SUMMARY_HEADER = "policy,served,abandoned,p_abandon,energy_kwh,net_revenue,ci_halfwidth"


def _fmt(x):
    return f"{x:.6g}"


# -- analyze ---------------------------------------------------------------

def _cmd_analyze(args):
    params = QueueParams(lam=args.lam, mu=args.mu, theta=args.theta, n=args.servers)
    m = analyze_queue(params, args.tolerance)
    for key, value in asdict(m).items():
        print(f"{key} {_fmt(value)}")
    return 0


# -- staff ------------------------------------------------------------------

def _load_econ(path):
    if path is None:
        return EconomicModel(reward_per_job=1.0, electricity_price=0.0, p_peak=200.0)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    block = data.get("economics", data)
    return _econ_from_dict(block)


def _econ_from_dict(block):
    return EconomicModel(
        reward_per_job=block.get("reward_per_job", 0.0),
        electricity_price=block.get("electricity_price", 0.0),
        p_peak=block.get("p_peak", 200.0),
        idle_fraction=block.get("idle_fraction", 0.65),
        p_setup=block.get("p_setup"),
        setup_duration=block.get("setup_duration", 0.0),
        sla_penalty_per_abandon=block.get("sla_penalty_per_abandon", 0.0),
    )


def _cmd_staff(args):
    if args.policy == "static":
        if args.servers is None:
            raise FarmsimError("--servers is required for the static policy")
        print(f"target_n {args.servers}")
        return 0
    if args.policy == "qed":
        n = qed_staffing(args.lam, args.mu, args.beta)
        print(f"target_n {n}")
        return 0
    if args.policy == "adaptive":
        econ = _load_econ(args.econ)
        decision = adaptive_staffing(args.lam, args.mu, args.theta, econ, args.n_max)
        print(f"target_n {decision.target_n}")
        print(f"predicted_revenue_rate {_fmt(decision.predicted_revenue_rate)}")
        return 0
    raise FarmsimError(f"unknown policy {args.policy!r}")


# -- estimate -----------------------------------------------------------------

def _estimator_from_args(name, window, alpha, oracle_rate, margin_k):
    if name == "oracle":
        base = Oracle(rate=oracle_rate)
    elif name == "window":
        base = Window(w=window)
    elif name == "ewma":
        base = Ewma(alpha=alpha)
    elif name == "trend":
        base = Trend(w=window)
    else:
        raise FarmsimError(f"unknown estimator {name!r}")
    if margin_k and margin_k > 0:
        return Margin(base=base, k=margin_k)
    return base


def _cmd_estimate(args):
    trace = load_binned(args.trace)
    spec = _estimator_from_args(args.estimator, args.window, args.alpha,
                                args.oracle_rate, args.margin_k)
    report = evaluate_estimator(spec, trace)
    print(f"estimator {args.estimator}")
    print(f"mape {_fmt(report.mape)}")
    print(f"rmse {_fmt(report.rmse)}")
    print(f"mean_bias {_fmt(report.mean_bias)}")
    print(f"n_scored {report.n_scored}")
    return 0


# -- experiment configuration ---------------------------------------------------

def load_experiment(path, seed_override=None):
    """Parse and validate a TOML experiment file; see README for the schema.

    Returns (config, workload, [(name, PolicySpec), ...]).  Everything is
    validated before any simulation starts.
    """
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    try:
        wl_block = data["workload"]
        service = data["service"]
        sim = data["simulation"]
        econ = _econ_from_dict(data["economics"])
        policy_blocks = data["policies"]
    except KeyError as exc:
        raise FarmsimError(f"missing config section {exc}") from None
    if not policy_blocks:
        raise FarmsimError("at least one [[policies]] block is required")

    kind = wl_block.get("kind", "stationary")
    if kind == "stationary":
        workload = make_workload("stationary", rate=wl_block["rate"])
    elif kind == "trace":
        trace_path = Path(wl_block["path"])
        if not trace_path.is_absolute():
            trace_path = Path(path).parent / trace_path
        if not trace_path.exists():
            raise FarmsimError(f"trace file not found: {trace_path}")
        workload = make_workload("trace", trace=load_binned(trace_path),
                                 mode=wl_block.get("mode", "poisson"))
    elif kind == "synthetic-diurnal":
        workload = make_workload("trace", trace=synthetic_diurnal_trace(
            mean_rate=wl_block.get("mean_rate", 100.0),
            amplitude=wl_block.get("amplitude", 50.0),
            period=wl_block.get("period", 86400.0),
            bin_width=wl_block.get("bin_width", 300.0),
            duration=wl_block.get("duration", 86400.0),
            seed=wl_block.get("seed", 0),
        ), mode=wl_block.get("mode", "poisson"))
    else:
        raise FarmsimError(f"unknown workload kind {kind!r}")

    seed = seed_override if seed_override is not None else sim.get("seed", 0)
    config = SimConfig(
        duration=float(sim["duration"]),
        warmup=float(sim.get("warmup", 0.0)),
        seed=int(seed),
        epoch_length=float(sim.get("epoch_length", 300.0)),
        mu=float(service["mu"]),
        theta=float(service.get("theta", 0.0)),
        econ=econ,
        initial_n=int(sim.get("initial_n", 0)),
    )
    workload.check_covers(config.duration)

    policies = []
    seen = set()
    for block in policy_blocks:
        name = block.get("name")
        if not name:
            raise FarmsimError("every policy block needs a name")
        if name in seen:
            raise FarmsimError(f"duplicate policy name {name!r}")
        seen.add(name)
        policies.append((name, _policy_from_dict(block, config)))
    reps = int(sim.get("reps", 1))
    if reps < 1:
        raise FarmsimError("reps must be >= 1")
    for _, spec in policies:
        spec.validate_against(econ)
    return config, workload, policies, reps


def _policy_from_dict(block, config):
    kind_name = block.get("kind", "static")
    if kind_name == "static":
        kind = Static(n=int(block["n"]))
    elif kind_name == "qed":
        kind = Qed(beta=float(block.get("beta", 1.0)))
    elif kind_name == "adaptive":
        kind = Adaptive(n_max=int(block.get("n_max", 1000)))
    else:
        raise FarmsimError(f"unknown policy kind {kind_name!r}")
    estimator = _estimator_from_args(
        block.get("estimator", "window"),
        int(block.get("estimator_window", 5)),
        float(block.get("estimator_alpha", 0.3)),
        float(block.get("oracle_rate", 0.0)),
        float(block.get("margin_k", 0.0)),
    )
    return PolicySpec(
        kind=kind,
        estimator=estimator,
        epoch_length=float(block.get("epoch_length", config.epoch_length)),
        switching_guard=bool(block.get("switching_guard", True)),
    )


# -- simulate / compare --------------------------------------------------------

def _result_dict(res):
    return {
        "arrivals": res.arrivals,
        "served": res.served,
        "abandoned": res.abandoned,
        "in_system_at_end": res.in_system_at_end,
        "energy_wh": res.energy_wh,
        "energy_kwh_total": res.energy_kwh_total,
        "net_revenue": res.net_revenue,
        "mean_wait_served": res.mean_wait_served,
        "mean_sojourn": res.mean_sojourn,
        "mean_jobs_in_system": res.mean_jobs_in_system,
        "p_abandon_empirical": res.p_abandon_empirical,
        "measured_time": res.measured_time,
    }


def _write_epochs(res, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in res.epoch_csv_lines():
            fh.write(line + "\n")


def _run_policy(config, workload, spec, reps):
    if reps >= 2:
        agg = run_replications(config, workload, spec, reps)
        return agg.results, agg.mean, agg.ci_halfwidth
    res, _ = run(config, workload, spec)
    mean = {
        "served": float(res.served),
        "abandoned": float(res.abandoned),
        "p_abandon": res.p_abandon_empirical,
        "energy_kwh": res.energy_kwh_total,
        "net_revenue": res.net_revenue,
        "mean_wait_served": res.mean_wait_served,
    }
    return [res], mean, {k: 0.0 for k in mean}


def _summary_line(name, mean, half):
    return ",".join([
        name,
        repr(mean["served"]),
        repr(mean["abandoned"]),
        repr(mean["p_abandon"]),
        repr(mean["energy_kwh"]),
        repr(mean["net_revenue"]),
        repr(half["net_revenue"]),
    ])


def _cmd_simulate(args):
    config, workload, policies, reps = load_experiment(args.config, args.seed)
    if args.policy is not None:
        chosen = dict(policies).get(args.policy)
        if chosen is None:
            raise FarmsimError(f"policy {args.policy!r} not in config")
        policies = [(args.policy, chosen)]
    else:
        policies = policies[:1]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name, spec = policies[0]
    results, mean, half = _run_policy(config, workload, spec, reps)
    payload = {
        "policy": name,
        "seed": config.seed,
        "reps": reps,
        "mean": mean,
        "ci_halfwidth": half,
        "replications": [_result_dict(r) for r in results],
    }
    (out / f"{name}_result.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for r, res in enumerate(results):
        _write_epochs(res, out / f"{name}_rep{r}_epochs.csv")
    print(SUMMARY_HEADER)
    print(_summary_line(name, mean, half))
    return 0


def _cmd_compare(args):
    config, workload, policies, reps = load_experiment(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [SUMMARY_HEADER]
    for name, spec in policies:
        results, mean, half = _run_policy(config, workload, spec, reps)
        lines.append(_summary_line(name, mean, half))
        for r, res in enumerate(results):
            _write_epochs(res, out / f"{name}_rep{r}_epochs.csv")
    (out / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        print(line)
    return 0


# -- entry point -------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="farmsim",
        description="Capacity planning for energy-aware server farms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="steady-state metrics of one Erlang-A instance")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--servers", type=int, required=True)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("staff", help="recommend a server count")
    p.add_argument("--policy", choices=["static", "qed", "adaptive"], required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--servers", type=int)
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--econ", help="TOML file with an [economics] block")
    p.set_defaults(func=_cmd_staff)

    p = sub.add_parser("estimate", help="walk-forward estimator accuracy on a trace")
    p.add_argument("--trace", required=True, help="binned CSV trace")
    p.add_argument("--estimator", choices=["oracle", "window", "ewma", "trend"],
                   default="window")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--oracle-rate", type=float, default=0.0)
    p.add_argument("--margin-k", type=float, default=0.0)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("simulate", help="simulate one policy from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", help="policy name (default: first in the config)")
    p.add_argument("--seed", type=int, help="overrides simulation.seed")
    p.add_argument("--out", default="farmsim-out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="run every configured policy on shared arrivals")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="overrides simulation.seed")
    p.add_argument("--out", default="farmsim-out")
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FarmsimError, tomllib.TOMLDecodeError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
