"""Command-line front end.

    bailab complexity --config cfg.json
    bailab simulate   --config cfg.json [--seed N] [--workers W]
    bailab probe      --config cfg.json [--seed N] [--workers W]

Exit codes: 0 success, 2 config or instance error, 3 solver failure,
4 insufficient data for a rate estimate.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .arms import ArmFamily, BanditInstance, validate
from .complexity import DEFAULT_TOL, gamma_fc, gamma_na, two_armed_gaussian_closed_form
from .errors import BanditError, ConvergenceError, InsufficientDataError
from .policies import make_policy
from .sim import (
    DEFAULT_WINDOW,
    estimate_rate,
    probe_conjectures,
    run_fixed_budget,
    run_fixed_confidence,
    uniform_policy,
)

log = logging.getLogger("bailab")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_DATA = 0, 2, 3, 4
CSV_HEADER = ["n", "replications", "errors", "p_hat", "ci_low", "ci_high"]
DISCLAIMER = "empirical evidence only"


class ConfigError(BanditError, ValueError):
    pass


@dataclass
class ExperimentConfig:
    family: ArmFamily
    means: List[float]
    variances: Optional[List[float]] = None
    policy: str = "uniform"
    policy_params: dict = field(default_factory=dict)
    budgets: List[int] = field(default_factory=list)
    replications: int = 0
    delta: Optional[float] = None
    seed: int = 0
    tol: float = DEFAULT_TOL
    output_path: str = "report"
    window: tuple = DEFAULT_WINDOW
    workers: int = 1

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        for key in ("family", "means"):
            if key not in raw:
                raise ConfigError(f"config is missing {key!r}")
        family = ArmFamily.parse(raw["family"])
        means = _floats(raw["means"], "means")
        variances = raw.get("variances")
        if family is ArmFamily.GAUSSIAN:
            if variances is None:
                raise ConfigError("Gaussian instances need 'variances'")
            variances = _floats(variances, "variances")
            if len(variances) != len(means):
                raise ConfigError("'variances' and 'means' differ in length")
        elif variances is not None:
            raise ConfigError("'variances' only applies to the Gaussian family")
        policy = raw.get("policy", "uniform")
        params = {}
        if isinstance(policy, dict):
            params = {k: v for k, v in policy.items() if k != "name"}
            policy = policy.get("name")
        if not isinstance(policy, str):
            raise ConfigError("'policy' must be a name or an object with a 'name'")
        budgets = [_int(b, "budgets") for b in raw.get("budgets", [])]
        delta = raw.get("delta", params.get("delta"))
        window = raw.get("window", DEFAULT_WINDOW)
        if len(window) != 2:
            raise ConfigError("'window' must be [p_min, p_max]")
        return cls(
            family=family,
            means=means,
            variances=variances,
            policy=policy,
            policy_params=params,
            budgets=budgets,
            replications=_int(raw.get("replications", 0), "replications"),
            delta=None if delta is None else float(delta),
            seed=_int(raw.get("seed", 0), "seed"),
            tol=float(raw.get("tol", DEFAULT_TOL)),
            output_path=str(raw.get("output_path", "report")),
            window=(float(window[0]), float(window[1])),
            workers=_int(raw.get("workers", 1), "workers"),
        )

    def instance(self):
        if self.family is ArmFamily.GAUSSIAN:
            inst = BanditInstance.gaussian(self.means, self.variances)
        else:
            inst = BanditInstance.bernoulli(self.means)
        validate(inst)
        return inst

    def make_policy(self, instance):
        return make_policy(self.policy, instance,
                           weights=self.policy_params.get("weights"),
                           delta=self.delta,
                           t_max=self.policy_params.get("t_max"))


def _floats(v, name):
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{name!r} must be a list of numbers")
    return [float(x) for x in v]


def _int(v, name):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name!r} must be an integer, got {v!r}")
    return v


def fmt(x):
    """12 significant digits, shortest form."""
    return f"{x:.12g}"


def _clean(obj):
    """Round floats to 12 significant digits; non-finite values become null."""
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def dump_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2) + "\n", encoding="utf-8")


def budget_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.rows:
        w.writerow([r.n, r.replications, r.errors, fmt(r.p_hat), fmt(r.ci_low), fmt(r.ci_high)])
    return buf.getvalue()


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def sidecar_path(output_path, tag):
    p = Path(output_path)
    return p.with_name(f"{p.stem}.{tag}.json")


def _instance_dict(cfg):
    d = {"family": cfg.family.value, "means": cfg.means}
    if cfg.variances is not None:
        d["variances"] = cfg.variances
    return d


def cmd_complexity(cfg):
    inst = cfg.instance()
    fc = gamma_fc(inst, cfg.tol)
    na = gamma_na(inst, cfg.tol)
    out = {
        "instance": _instance_dict(cfg),
        "tol": cfg.tol,
        "gamma_fc": fc.gamma,
        "gamma_na": na.gamma,
        "optimal_weights_fc": fc.optimal_weights.tolist(),
        "optimal_weights_na": na.optimal_weights.tolist(),
        "fc": fc.to_dict(),
        "na": na.to_dict(),
    }
    if inst.k == 2 and inst.family is ArmFamily.GAUSSIAN:
        out["closed_form"] = two_armed_gaussian_closed_form(inst).to_dict()
    dump_json(out, cfg.output_path)
    return EXIT_OK


def cmd_simulate(cfg):
    inst = cfg.instance()
    policy = cfg.make_policy(inst)
    if cfg.replications < 1:
        raise ConfigError("'replications' must be at least 1")
    if not cfg.budgets:
        return _simulate_fixed_confidence(cfg, inst, policy)
    report = run_fixed_budget(inst, policy, cfg.budgets, cfg.replications, cfg.seed, cfg.workers)
    _write_text(cfg.output_path, budget_csv(report))
    side = {"policy": report.policy, "seed": cfg.seed, "window": list(cfg.window)}
    code = EXIT_OK
    try:
        side["rate"] = estimate_rate(report, cfg.window).to_dict()
    except InsufficientDataError as exc:
        side["rate"] = None
        side["error"] = str(exc)
        code = EXIT_DATA
    dump_json(side, sidecar_path(cfg.output_path, "rate"))
    return code


def _simulate_fixed_confidence(cfg, inst, policy):
    if cfg.delta is None:
        raise ConfigError("fixed-confidence runs need 'delta' (or give 'budgets')")
    rep = run_fixed_confidence(inst, policy, cfg.delta, cfg.replications, cfg.seed, cfg.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replication", "tau", "correct", "timed_out"])
    for r, (tau, ok, to) in enumerate(zip(rep.taus, rep.correct, rep.timed_out)):
        w.writerow([r, int(tau), int(ok), int(to)])
    _write_text(cfg.output_path, buf.getvalue())
    summary = rep.summary()
    summary["seed"] = cfg.seed
    summary["gamma_fc"] = gamma_fc(inst, cfg.tol).gamma
    dump_json(summary, sidecar_path(cfg.output_path, "summary"))
    return EXIT_OK


def cmd_probe(cfg):
    inst = cfg.instance()
    policy = cfg.make_policy(inst)
    if not cfg.budgets or cfg.replications < 1:
        raise ConfigError("probe needs 'budgets' and 'replications'")
    fc = gamma_fc(inst, cfg.tol).gamma
    na = gamma_na(inst, cfg.tol).gamma
    out = {
        "disclaimer": DISCLAIMER,
        "instance": _instance_dict(cfg),
        "seed": cfg.seed,
        "window": list(cfg.window),
        "gamma_fc": fc,
        "gamma_na": na,
        "inverse_gamma_fc": 1.0 / fc,
        "inverse_gamma_na": 1.0 / na,
    }
    cand = run_fixed_budget(inst, policy, cfg.budgets, cfg.replications, cfg.seed, cfg.workers)
    unif = run_fixed_budget(inst, uniform_policy(), cfg.budgets, cfg.replications, cfg.seed,
                            cfg.workers)
    out["candidate_policy"] = cand.policy
    out["candidate_report"] = cand.to_dict()
    out["uniform_report"] = unif.to_dict()
    errors = []
    rates = {}
    for key, rep in (("rate_candidate", cand), ("rate_uniform", unif)):
        try:
            rates[key] = estimate_rate(rep, cfg.window)
            out[key] = rates[key].to_dict()
        except InsufficientDataError as exc:
            out[key] = None
            errors.append(f"{key}: {exc}")
    if len(rates) == 2:
        c, u = rates["rate_candidate"], rates["rate_uniform"]
        se = math.hypot(c.slope_stderr, u.slope_stderr)
        out["rate_difference"] = c.slope - u.slope
        out["combined_stderr"] = se
        out["no_worse_than_uniform"] = bool(c.slope - u.slope >= -2.0 * se)
    else:
        out["rate_difference"] = None
        out["combined_stderr"] = None
    try:
        out["conjectures"] = probe_conjectures(inst, cfg.budgets, cfg.replications, cfg.seed,
                                               cfg.window, cfg.workers, cfg.tol).to_dict()
    except InsufficientDataError as exc:
        out["conjectures"] = None
        errors.append(f"conjectures: {exc}")
    if errors:
        out["errors"] = errors
    dump_json(out, cfg.output_path)
    return EXIT_DATA if errors else EXIT_OK


COMMANDS = {"complexity": cmd_complexity, "simulate": cmd_simulate, "probe": cmd_probe}


def build_parser():
    parser = argparse.ArgumentParser(prog="bailab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    return parser


def load_config(path, seed=None, workers=None):
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = ExperimentConfig.from_dict(raw)
    if seed is not None:
        cfg.seed = seed
    if workers is not None:
        cfg.workers = workers
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.workers)
        return COMMANDS[args.command](cfg)
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (BanditError, ValueError) as exc:
        print(f"invalid config or instance: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
