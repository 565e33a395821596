"""Command-line entry point.

Usage::

    hawkes-regen [global flags] <subcommand> [flags]

Subcommands: ``sim``, ``regen``, ``laplace``, ``moments``, ``bound``,
``estimate``, ``validate``. A JSON config file (``--config``) supplies the
experiment; ``--set key.path=value`` and the dedicated flags override it.
Exit codes: 0 success, 2 configuration or numeric-domain error, 3 failed
validation.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import concentration, estimators, queue
from .errors import ConfigError, HawkesRegenError
from .regen import extract_cycles, regeneration_times
from .simulate import PathRecord, sample_cluster_stats, simulate_path, spawn_rng
from .transfer import l1_norm, theta_star, transfer_from_config
from .validate import DEFAULT_CONFIG, clt_sigma2, full_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3

# stream indices under the master seed
STREAM_PATH = 0
STREAM_CLUSTERS = 1


@dataclass
class ExperimentConfig:
    lam: float = 1.0
    transfer: dict = field(default_factory=lambda: {"kind": "zero"})
    A: float = 0.0
    T: float = 100.0
    init_points: list = field(default_factory=list)
    seed: int = 0
    replications: int = 1000
    tolerances: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    base_dir: str | None = field(default=None, compare=False)
    given: frozenset = field(default=frozenset(), compare=False)

    KEYS = ("lambda", "transfer", "A", "T", "init_points", "seed", "replications",
            "tolerances", "outputs", "params")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}", field=sorted(unknown)[0])

        def num(key, default, kind=float):
            try:
                return kind(d.get(key, default))
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be a number", field=key) from None

        cfg = cls(
            lam=num("lambda", 1.0),
            transfer=dict(d.get("transfer", {"kind": "zero"})),
            A=num("A", 0.0),
            T=num("T", 100.0),
            init_points=[float(x) for x in d.get("init_points", [])],
            seed=num("seed", 0, int),
            replications=num("replications", 1000, int),
            tolerances=dict(d.get("tolerances", {})),
            outputs=dict(d.get("outputs", {})),
            params=dict(d.get("params", {})),
            base_dir=base_dir,
            given=frozenset(d),
        )
        cfg.validate()
        return cfg

    def validate(self):
        if not self.lam >= 0:
            raise ConfigError("lambda must be >= 0", field="lambda")
        if not self.A >= 0:
            raise ConfigError("A must be >= 0", field="A")
        if not self.T > 0:
            raise ConfigError("T must be > 0", field="T")
        if any(x > 0 for x in self.init_points):
            raise ConfigError("init_points must be <= 0", field="init_points")
        if self.replications <= 0:
            raise ConfigError("replications must be > 0", field="replications")
        try:
            h = self.kernel()
        except (KeyError, ValueError, OSError) as exc:
            raise ConfigError(f"bad kernel ({exc})", field="transfer") from None
        if not l1_norm(h) < 1:
            raise ConfigError(f"not sub-critical (L1 norm {l1_norm(h):.6g})", field="transfer")

    def kernel(self):
        return transfer_from_config(self.transfer, base_dir=self.base_dir)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "transfer": copy.deepcopy(self.transfer),
            "A": self.A,
            "T": self.T,
            "init_points": list(self.init_points),
            "seed": self.seed,
            "replications": self.replications,
            "tolerances": copy.deepcopy(self.tolerances),
            "outputs": copy.deepcopy(self.outputs),
            "params": copy.deepcopy(self.params),
        }


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_path(d: dict, key: str, value) -> None:
    """Assign ``value`` at dotted ``key`` inside nested dict ``d``."""
    parts = key.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
        if not isinstance(d, dict):
            raise ConfigError(f"{key}: {p} is not a table", field=key)
    d[parts[-1]] = value


def load_config(path, overrides=()) -> ExperimentConfig:
    """Read a JSON config and apply ``key=value`` overrides (flag wins)."""
    d, base = {}, None
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        base = str(p.parent)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        set_path(d, k.strip(), _parse_value(v))
    return ExperimentConfig.from_dict(d, base_dir=base)


def _floats(text: str):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry by dotted key path")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--reps", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    common.add_argument("--lambda", dest="lam", type=float, default=argparse.SUPPRESS)
    common.add_argument("--A", type=float, default=argparse.SUPPRESS)
    common.add_argument("--T", type=float, default=argparse.SUPPRESS)

    ap = argparse.ArgumentParser(prog="hawkes-regen", parents=[common], allow_abbrev=False,
                                 description="Regenerative analysis of linear Hawkes processes.")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("sim", parents=[common], allow_abbrev=False, help="simulate a path, emit events CSV")

    p = sub.add_parser("regen", parents=[common], allow_abbrev=False, help="regeneration times as JSON")
    p.add_argument("--events", help="events CSV written by `sim` (default: simulate)")

    p = sub.add_parser("laplace", parents=[common], allow_abbrev=False, help="E[exp(-s tau)] over an s-grid, as CSV")
    p.add_argument("--s", help="comma-separated s values (default 0.5,1,2)")
    p.add_argument("--theta", type=float, help="ExpDom rate; 'inf' means Degenerate")
    p.add_argument("--service", choices=["expdom", "degenerate", "empirical"])
    p.add_argument("--method", choices=["auto", "quad"])

    p = sub.add_parser("moments", parents=[common], allow_abbrev=False, help="moments of tau as JSON")
    p.add_argument("--theta", type=float, help="ExpDom rate (default theta* of the kernel)")
    p.add_argument("--alpha", type=float, help="exponent for E[exp(alpha tau)]")

    p = sub.add_parser("bound", parents=[common], allow_abbrev=False, help="deviation bound as JSON")
    p.add_argument("--alpha", type=float)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--theta", type=float, help="domination rate (bound mode)")
    p.add_argument("--mc-moments-file", help="JSON with cycle_lengths or mean_tau/exp_moment (exact mode)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--eta", type=float)
    g.add_argument("--epsilon", type=float)

    p = sub.add_parser("estimate", parents=[common], allow_abbrev=False, help="sliding-window estimate as JSON")
    p.add_argument("--functional", choices=["constant", "count", "count_indicator", "pair_kernel"])
    p.add_argument("--value", type=float, help="constant value")
    p.add_argument("--k", type=int, help="count for count_indicator")
    p.add_argument("--clamp", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--w-support", type=float, help="support length of w")
    p.add_argument("--w-value", type=float, help="constant value of w on its support")
    p.add_argument("--method", choices=["cycles", "time_average"])
    p.add_argument("--events", help="events CSV written by `sim` (default: simulate)")

    sub.add_parser("validate", parents=[common], allow_abbrev=False, help="run the Monte Carlo battery, emit report JSON")
    return ap


def _config(args) -> ExperimentConfig:
    overrides = list(args.set)
    for attr, key in (("seed", "seed"), ("reps", "replications"), ("lam", "lambda"), ("A", "A"), ("T", "T")):
        if hasattr(args, attr):
            overrides.append(f"{key}={json.dumps(getattr(args, attr))}")
    return load_config(args.config, overrides)


def _param(args, cfg, name, default=None):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.params.get(name, default)


def _emit(text: str, args, cfg) -> None:
    out = getattr(args, "out", None) or cfg.outputs.get(args.command)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=float) + "\n"


def _path(args, cfg) -> PathRecord:
    events = getattr(args, "events", None)
    if events:
        with open(events) as fh:
            meta = {}
            first = fh.readline()
            if first.startswith("#"):
                meta = dict(kv.split("=", 1) for kv in first[1:].split())
            fh.seek(0)
            lam = float(meta.get("lambda", cfg.lam))
            horizon = float(meta.get("horizon", cfg.T))
            return PathRecord.from_csv(fh, lam, horizon)
    return simulate_path(cfg.lam, cfg.kernel(), cfg.init_points, cfg.T, spawn_rng(cfg.seed, STREAM_PATH))


def cmd_sim(args, cfg):
    path = _path(args, cfg)
    buf = io.StringIO()
    buf.write(f"# lambda={cfg.lam!r} horizon={cfg.T!r} seed={cfg.seed}\n")
    path.to_csv(buf)
    _emit(buf.getvalue(), args, cfg)
    return EXIT_OK


def cmd_regen(args, cfg):
    report = regeneration_times(_path(args, cfg), cfg.A)
    _emit(_json({**report.to_dict(), "seed": cfg.seed}), args, cfg)
    return EXIT_OK


def _service(args, cfg):
    theta = _param(args, cfg, "theta")
    kind = _param(args, cfg, "service") or ("expdom" if theta is not None else "empirical")
    if kind == "degenerate" or (theta is not None and math.isinf(theta)):
        return queue.Degenerate(cfg.A)
    if kind == "expdom":
        if theta is None:
            theta = theta_star(cfg.kernel())
        return queue.ExpDom(float(theta), cfg.A)
    L, _ = sample_cluster_stats(cfg.kernel(), cfg.replications, spawn_rng(cfg.seed, STREAM_CLUSTERS))
    return queue.Empirical(L, cfg.A)


def cmd_laplace(args, cfg):
    svc = _service(args, cfg)
    grid = _param(args, cfg, "s", "0.5,1,2")
    grid = grid if isinstance(grid, list) else _floats(grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "value", "abs_error"])
    for s in grid:
        r = queue.laplace_tau(svc, cfg.lam, s, method=_param(args, cfg, "method", "auto"))
        w.writerow([repr(s), repr(float(r.value)), repr(float(r.abs_error_estimate))])
    _emit(buf.getvalue(), args, cfg)
    return EXIT_OK


def cmd_moments(args, cfg):
    h = cfg.kernel()
    theta = _param(args, cfg, "theta")
    if theta is None:
        theta = theta_star(h)
    svc = queue.Degenerate(cfg.A) if math.isinf(theta) else queue.ExpDom(theta, cfg.A)
    out = {
        "lambda": cfg.lam,
        "A": cfg.A,
        "theta": theta,
        "mean": queue.mean_tau(cfg.lam, svc.mean_L, cfg.A),
        "second_moment": queue.second_moment_tau(cfg.lam, svc),
        "delay_bound": queue.delay_bound(cfg.lam, theta, cfg.A),
        "seed": cfg.seed,
    }
    alpha = _param(args, cfg, "alpha")
    if alpha is not None:
        out["alpha"] = alpha
        out["exp_moment"] = queue.exp_moment_tau(cfg.lam, theta, cfg.A, alpha)
    if not math.isinf(theta):
        out["convergence_abscissa"] = queue.convergence_abscissa(cfg.lam, theta, cfg.A)
    _emit(_json(out), args, cfg)
    return EXIT_OK


def _concentration_input(args, cfg):
    alpha = _param(args, cfg, "alpha")
    a, b = _param(args, cfg, "a", 0.0), _param(args, cfg, "b", 1.0)
    if alpha is None:
        raise ConfigError("bound needs --alpha", field="params.alpha")
    mc_file = _param(args, cfg, "mc_moments_file")
    if mc_file:
        d = json.loads(Path(mc_file).read_text())
        if "cycle_lengths" in d:
            return concentration.ConcentrationInput.from_cycles(
                cfg.lam, cfg.A, alpha, a, b, cfg.T, d["cycle_lengths"])
        return concentration.ConcentrationInput(
            lam=cfg.lam, A=cfg.A, alpha=alpha, a=a, b=b, T=cfg.T,
            mean_tau=float(d["mean_tau"]), exp_moment=float(d["exp_moment"]))
    theta = _param(args, cfg, "theta")
    if theta is None:
        theta = theta_star(cfg.kernel())
    return concentration.ConcentrationInput.from_domination(cfg.lam, cfg.A, alpha, a, b, cfg.T, theta)


def cmd_bound(args, cfg):
    inp = _concentration_input(args, cfg)
    v, c = concentration.bound_terms(inp)
    out = {"v": v, "c": c, "mode": inp.mode, "mean_tau": inp.mean_tau, "exp_moment": inp.exp_moment}
    eta, eps = _param(args, cfg, "eta"), _param(args, cfg, "epsilon")
    if eta is not None:
        e = concentration.epsilon_eta(inp, eta)
        out.update(eta=eta, epsilon_eta=e, bound=concentration.deviation_bound(inp, e))
    else:
        if eps is None:
            raise ConfigError("bound needs --eta or --epsilon", field="params.eta")
        out.update(epsilon=eps, bound=concentration.deviation_bound(inp, eps))
    out["seed"] = cfg.seed
    _emit(_json(out), args, cfg)
    return EXIT_OK


def _functional(args, cfg, A):
    kind = _param(args, cfg, "functional", "count")
    if kind == "constant":
        f = estimators.Constant(float(_param(args, cfg, "value", 1.0)))
    elif kind == "count":
        f = estimators.Count()
    elif kind == "count_indicator":
        k = _param(args, cfg, "k")
        if k is None:
            raise ConfigError("count_indicator needs --k", field="params.k")
        f = estimators.CountIndicator(int(k))
    else:
        sl = _param(args, cfg, "w_support", A / 2)
        f = estimators.PairKernel(estimators.PairKernelW(float(sl), float(_param(args, cfg, "w_value", 1.0))))
    clamp = _param(args, cfg, "clamp")
    if clamp is not None:
        f = estimators.Clamped(f, float(clamp[0]), float(clamp[1]))
    return f


def cmd_estimate(args, cfg):
    f = _functional(args, cfg, cfg.A)
    path = _path(args, cfg)
    cycles = extract_cycles(path, regeneration_times(path, cfg.A))
    method = _param(args, cfg, "method", "cycles")
    est, se = estimators.estimate_pi_cycles(cycles, f, cfg.A)
    if method == "time_average":
        avg = estimators.sliding_average(path, f, cfg.A, cfg.T)
        sigma2, _ = clt_sigma2(cycles, f, cfg.A, est) if len(cycles) >= 100 else (math.nan, None)
        est, se = avg, math.sqrt(sigma2 / cfg.T)
    out = {"estimate": est, "std_error": se, "n_cycles": len(cycles), "method": method,
           "functional": f.describe(), "seed": cfg.seed}
    _emit(_json(out), args, cfg)
    return EXIT_OK


def cmd_validate(args, cfg):
    d = {k: v for k, v in cfg.params.items() if k in DEFAULT_CONFIG}
    d.update({"lambda": cfg.lam, "transfer": cfg.kernel(), "A": cfg.A, "seed": cfg.seed})
    # the generic defaults are sized for single paths; keep the battery's own unless given
    for key, name in (("T", "T"), ("replications", "replications")):
        if key in cfg.given:
            d[name] = getattr(cfg, key)
    report = full_report(d)
    _emit(_json(report), args, cfg)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


COMMANDS = {
    "sim": cmd_sim,
    "regen": cmd_regen,
    "laplace": cmd_laplace,
    "moments": cmd_moments,
    "bound": cmd_bound,
    "estimate": cmd_estimate,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HawkesRegenError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
