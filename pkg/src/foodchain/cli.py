"""Command-line front end: ``foodchain <subcommand> --config FILE``.

Exit status is 0 on success, 2 for invalid input (schema, domain or
precondition violations) and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import fields
from typing import Any, Callable

import numpy as np

from . import __version__
from .bifurcation import NotFoundError, thresholds
from .dynamics import (CycleNotFoundError, DEFAULT_SEED, IntegrationError, IntegratorConfig,
                       RecurrenceError, Section, attractor_summary, boundary_cycle,
                       continue_cycle, extinction, find_cycle, hopf_cycle, integrate,
                       lyapunov_max, sweep)
from .equilibria import all_equilibria, y_star
from .fitting import FitError, FitProblem, fit
from .model import (DomainError, Kind, ModelParams, NoSolutionError, PreconditionError,
                    ResponseSpec, _require_keys, check_response)

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERIC = 3

CONFIG_KEYS = {"model", "integrator", "simulate", "sweep", "cycle", "lyapunov", "attractor",
               "extinction", "fit"}


class ConfigError(DomainError):
    """The experiment configuration is malformed."""


# ---------------------------------------------------------------------------
# output


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def dump_json(obj: Any) -> str:
    """JSON with every float written at 17 significant digits (NaN -> null)."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dump_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dump_json(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return dump_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    return json.dumps(obj)


def write_csv(rows: list[list[Any]], header: list[str]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) if isinstance(v, (float, np.floating)) else
                           ("" if v is None else str(v)) for v in row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# configuration


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(cfg) - CONFIG_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    return cfg


def block(cfg: dict[str, Any], name: str, allowed: set[str]) -> dict[str, Any]:
    b = cfg.get(name, {})
    _require_keys(b, set(), name, optional=allowed)
    return b


def model_from(cfg: dict[str, Any], d2: float | None = None) -> ModelParams:
    if "model" not in cfg:
        raise ConfigError("config has no 'model' block")
    params = ModelParams.from_dict(cfg["model"], d2_default=d2)
    return params if d2 is None else params.with_d2(d2)


def integrator_from(cfg: dict[str, Any]) -> IntegratorConfig:
    names = {f.name for f in fields(IntegratorConfig)}
    b = block(cfg, "integrator", names)
    return IntegratorConfig(**{k: float(v) for k, v in b.items()})


def state_from(v: Any, what: str = "ic") -> np.ndarray:
    if not (isinstance(v, list) and len(v) == 3):
        raise ConfigError(f"{what} must be a list of three numbers")
    return np.array([float(x) for x in v])


def d2_grid(b: dict[str, Any]) -> list[float]:
    if "d2" in b:
        grid = [float(v) for v in b["d2"]]
    else:
        try:
            start, stop, step = float(b["start"]), float(b["stop"]), float(b["step"])
        except KeyError as exc:
            raise ConfigError(f"sweep needs 'd2' or start/stop/step (missing {exc})") from None
        if step <= 0.0:
            raise ConfigError("sweep step must be positive")
        n = int(math.floor(abs(stop - start) / step + 1e-9)) + 1
        sign = 1.0 if stop >= start else -1.0
        grid = [start + sign * i * step for i in range(n)]
    if not grid:
        raise ConfigError("empty d2 grid")
    return grid


# ---------------------------------------------------------------------------
# subcommands; each returns (text, exit_code)


def cmd_validate(cfg, args):
    params = model_from(cfg, d2=cfg.get("model", {}).get("d2", 1.0))
    report = {name: check_response(getattr(params, name)) for name in ("f1", "f2")}
    ok = not any(report.values())
    out = {"ok": ok, "violations": report}
    return dump_json(out), EXIT_OK if ok else EXIT_DOMAIN


def cmd_equilibria(cfg, args):
    params = model_from(cfg, args.d2)
    eqs = all_equilibria(params)
    return dump_json({"d2": params.d2, "equilibria": [e.to_dict() for e in eqs]}), EXIT_OK


def cmd_thresholds(cfg, args):
    params = model_from(cfg, 0.1 if args.d2 is None else args.d2)
    rep = thresholds(params, classify=not args.no_classify, cfg=integrator_from(cfg))
    return dump_json(rep.to_dict()), EXIT_OK


def cmd_simulate(cfg, args):
    b = block(cfg, "simulate", {"ic", "t_end", "dt"})
    params = model_from(cfg, args.d2)
    ic = state_from(b.get("ic", list(DEFAULT_SEED)))
    traj = integrate(params, ic, float(b.get("t_end", 1000.0)), integrator_from(cfg))
    if "dt" in b:
        ts, ys = traj.sample(float(b["dt"]))
    else:
        ts, ys = traj.times, traj.states
    if args.format == "json":
        return dump_json({"t": ts, "states": ys}), EXIT_OK
    rows = [[float(t), *map(float, y)] for t, y in zip(ts, ys)]
    return write_csv(rows, ["t", "x", "y", "z"]), EXIT_OK


def cmd_sweep(cfg, args):
    b = block(cfg, "sweep", {"d2", "start", "stop", "step", "ic_policy", "ic"})
    grid = d2_grid(b)
    params = model_from(cfg, grid[0])
    ic = state_from(b.get("ic", list(DEFAULT_SEED)))
    res = sweep(params, grid, b.get("ic_policy", "continuation"), ic, integrator_from(cfg),
                threads=args.threads)
    if args.format == "json":
        return dump_json([s.to_dict() for s in res]), EXIT_OK
    rows = []
    for s in res:
        k = s.k if s.k is not None else ""
        head = [float(s.d2), s.kind.value, k, float(s.lyap_max)]
        n_written = 0
        for var, vals in (("x", s.x_maxima), ("y", s.y_maxima), ("z", s.z_maxima)):
            for v in vals:
                rows.append(head + [var, float(v)])
                n_written += 1
        if n_written == 0:
            rows.append(head + ["", ""])
    return write_csv(rows, ["d2", "kind", "k", "lyap_max", "variable", "extremum"]), EXIT_OK


def cmd_cycle(cfg, args):
    b = block(cfg, "cycle", {"from", "guess", "continue_to", "step"})
    params = model_from(cfg, args.d2)
    icfg = integrator_from(cfg)
    source = b.get("from", "guess" if "guess" in b else "hopf")
    if source == "hopf":
        cyc = hopf_cycle(params, cfg=icfg)
    elif source == "boundary":
        cyc = boundary_cycle(params, icfg)
    elif source == "guess":
        guess = state_from(b.get("guess"), "cycle.guess")
        ys = y_star(params)
        if ys is None:
            raise PreconditionError("no interior equilibrium level y* at this d2")
        guess[1] = ys
        cyc = find_cycle(params, guess, Section.y_level(ys), icfg)
    else:
        raise ConfigError(f"cycle.from must be hopf, boundary or guess, got {source!r}")
    if "continue_to" not in b:
        return dump_json(cyc.to_dict()), EXIT_OK
    branch = continue_cycle(params, cyc, float(b["continue_to"]), float(b.get("step", 2e-4)),
                            cfg=icfg)
    out = {"terminated": branch.terminated, "d2_last": branch.d2_last,
           "branch": [c.to_dict() for _, c in branch.points]}
    return dump_json(out), EXIT_OK


def cmd_lyapunov(cfg, args):
    b = block(cfg, "lyapunov", {"ic"})
    params = model_from(cfg, args.d2)
    lam = lyapunov_max(params, state_from(b.get("ic", list(DEFAULT_SEED))), integrator_from(cfg))
    if args.format == "csv":
        return fmt(lam) + "\n", EXIT_OK
    return dump_json({"d2": params.d2, "lyap_max": lam}), EXIT_OK


def cmd_extinction(cfg, args):
    b = block(cfg, "extinction", {"ic"})
    params = model_from(cfg, args.d2)
    v = extinction(params, state_from(b.get("ic", list(DEFAULT_SEED))), integrator_from(cfg))
    return dump_json({"d2": params.d2, **v.to_dict()}), EXIT_OK


def cmd_attractor(cfg, args):
    b = block(cfg, "attractor", {"ic"})
    params = model_from(cfg, args.d2)
    s = attractor_summary(params, state_from(b.get("ic", list(DEFAULT_SEED))),
                          integrator_from(cfg))
    return dump_json(s.to_dict()), EXIT_OK


def cmd_fit(cfg, args):
    b = block(cfg, "fit", {"target", "family", "domain", "samples", "multistart"})
    target = args.target if args.target is not None else b.get("target")
    if target is None:
        raise ConfigError("fit needs a target response (--target or fit.target)")
    if isinstance(target, str):
        try:
            target = json.loads(target)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--target is not valid JSON: {exc}") from None
    family = args.family or b.get("family", "ivlev")
    try:
        family = Kind(family)
    except ValueError:
        raise ConfigError(f"unknown family {family!r}") from None
    domain = args.domain if args.domain is not None else tuple(b.get("domain", (0.0, 1.0)))
    samples = args.samples if args.samples is not None else int(b.get("samples", 101))
    problem = FitProblem(ResponseSpec.from_dict(target), family, domain, samples)
    res = fit(problem, multistart=args.multistart or bool(b.get("multistart", False)),
              threads=args.threads)
    out = res.to_dict()
    out["domain"] = list(problem.domain)
    out["samples"] = problem.n_samples
    return dump_json(out), EXIT_OK


COMMANDS: dict[str, tuple[Callable, str]] = {
    "validate": (cmd_validate, "check the response axioms on a grid"),
    "equilibria": (cmd_equilibria, "list equilibria with stability"),
    "thresholds": (cmd_thresholds, "saddle-node, transcritical and Hopf values of d2"),
    "simulate": (cmd_simulate, "integrate one trajectory"),
    "sweep": (cmd_sweep, "attractor summaries over a d2 grid"),
    "cycle": (cmd_cycle, "compute (and optionally continue) a limit cycle"),
    "lyapunov": (cmd_lyapunov, "largest Lyapunov exponent"),
    "attractor": (cmd_attractor, "classify the attractor reached from an initial state"),
    "fit": (cmd_fit, "fit one response family to another"),
    "extinction": (cmd_extinction, "decide top-predator extinction from an initial state"),
}


def _domain_arg(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError("domain must look like lo:hi") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (JSON)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $FOODCHAIN_THREADS or 1)")
    common.add_argument("--d2", type=float, default=None, help="override model.d2")

    parser = argparse.ArgumentParser(prog="foodchain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "thresholds":
            p.add_argument("--no-classify", action="store_true",
                           help="skip Hopf criticality (no cycle computations)")
        if name == "fit":
            p.add_argument("--target", help="target response as JSON")
            p.add_argument("--family", choices=[k.value for k in Kind])
            p.add_argument("--domain", type=_domain_arg)
            p.add_argument("--samples", type=int)
            p.add_argument("--multistart", action="store_true")
    return parser


def _threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get("FOODCHAIN_THREADS", "")
        try:
            value = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"FOODCHAIN_THREADS={env!r} is not an integer") from None
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    default_format = "csv" if args.command in ("simulate", "sweep") else "json"
    try:
        args.format = args.format or default_format
        args.threads = _threads(args.threads)
        cfg = load_config(args.config)
        text, code = handler(cfg, args)
    except (DomainError, NoSolutionError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (IntegrationError, CycleNotFoundError, RecurrenceError, NotFoundError,
            FitError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
