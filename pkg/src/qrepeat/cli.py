"""Command-line front end.

    qrepeat <evolve|nz|tcl|trajectories|unravel|verify> --config PATH
            [--out DIR] [--seed U64] [--ensemble N]

The ``QREPEAT_THREADS`` environment variable sets the number of worker
threads used for trajectory ensembles; results do not depend on it.

Exit codes: 0 success, 1 verify found a discrepancy, 2 config error,
3 numerical-assumption failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from importlib import metadata as _metadata
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, DegenerateObservable, IllConditionedKernel, MeasurementError, QRepeatError
from .evolution import evolve_direct
from .io import RunOutput, serialize_output
from .measurement import (
    RNG_ALGORITHM,
    cylinder_probability,
    ensemble_average,
    nonselective_sequence,
    sample_ensemble,
)
from .models import MarkovBlockModel
from .projection import markov_kraus, nz_evolve, nz_evolve_history, tcl_run
from .tensor import trace_distance
from .unravelling import unravel_report

SUBCOMMANDS = ("evolve", "nz", "tcl", "trajectories", "unravel", "verify")
THREADS_ENV = "QREPEAT_THREADS"

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4


def _artifact_version() -> str:
    try:
        return _metadata.version("artifact")
    except _metadata.PackageNotFoundError:
        return __version__


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", THREADS_ENV) from None


def _metadata_for(cfg: RunConfig, subcommand: str) -> dict:
    return {
        "artifact_version": _artifact_version(),
        "subcommand": subcommand,
        "rng_algorithm": RNG_ALGORITHM,
        "base_seed": cfg.seeds.base,
        "ensemble": cfg.seeds.ensemble,
        "config": cfg.echo(),
    }


def _max_distance(a, b) -> list[float]:
    return [trace_distance(x.rho, y.rho) for x, y in zip(a, b)]


def _require_observable(cfg: RunConfig, subcommand: str):
    obs = cfg.build_observable()
    if obs is None:
        raise ConfigError(f"the {subcommand} subcommand needs an observable", "observable")
    return obs


def _verify(cfg: RunConfig, workers: int) -> tuple[dict, bool]:
    spec, model, rho0 = cfg.chain_spec(), cfg.build_model(), cfg.build_initial_state()
    steps, tol = cfg.steps, cfg.tolerances.verify
    direct = evolve_direct(model, rho0, steps, spec).reduced
    checks = {}

    def record(name, dists, bound, **extra):
        dists = [float(x) for x in dists]
        bounds = bound if isinstance(bound, list) else [bound] * len(dists)
        ok = all(x <= b for x, b in zip(dists, bounds))
        checks[name] = {"max_discrepancy": max(dists), "per_step": dists, "tolerance": bounds, "pass": ok, **extra}

    record("nz_vs_direct", _max_distance(nz_evolve(model, rho0, steps, spec), direct), tol)
    record("nz_history_vs_direct", _max_distance(nz_evolve_history(model, rho0, steps, spec).reduced, direct), tol)
    try:
        run = tcl_run(model, rho0, steps, spec, cfg.tolerances.max_condition)
        record("tcl_vs_direct", _max_distance(run.reduced, direct), tol, conditions=run.conditions)
    except IllConditionedKernel as exc:
        # a singular I - K means the time-local form does not exist; not a discrepancy
        checks["tcl_vs_direct"] = {
            "pass": True,
            "skipped": f"ill-conditioned kernel at step {exc.step}",
            "condition": exc.condition,
        }
    if isinstance(model, MarkovBlockModel):
        channel = markov_kraus(model)
        iterates = channel.iterate(rho0.rho, steps)
        record("kraus_vs_direct", [trace_distance(a, b.rho) for a, b in zip(iterates, direct)], tol)

    obs = cfg.build_observable()
    if obs is not None:
        depth = min(steps, 3)
        errs = []
        for n in range(1, depth + 1):
            for prefix in itertools.product(range(len(obs.projectors)), repeat=n - 1):
                parent = cylinder_probability(model, rho0, obs, prefix, spec)
                kids = sum(cylinder_probability(model, rho0, obs, prefix + (i,), spec) for i in range(len(obs.projectors)))
                errs.append(abs(parent - kids))
        record("cylinder_consistency", [max(errs)], tol)

        records = sample_ensemble(model, rho0, obs, steps, cfg.seeds.ensemble, cfg.seeds.base, spec, workers=workers)
        summary = ensemble_average(records)
        oracle = nonselective_sequence(model, rho0, obs, steps, spec)
        t = cfg.tolerances
        bounds = [max(t.ensemble_floor, t.ensemble_se_factor * se) for se in summary.std_error]
        record(
            "ensemble_vs_nonselective",
            _max_distance(summary.mean_reduced, oracle),
            bounds,
            std_error=summary.std_error,
            distance_to_unmeasured=_max_distance(summary.mean_reduced, direct),
        )
    ok = all(c["pass"] for c in checks.values())
    return checks, ok


def run(subcommand: str, config: RunConfig, workers: Optional[int] = None) -> RunOutput:
    """Execute one subcommand; engine errors propagate as typed exceptions."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}")
    if workers is None:
        workers = _workers()
    cfg = config
    meta = _metadata_for(cfg, subcommand)
    spec, steps = cfg.chain_spec(), cfg.steps

    if subcommand == "verify":
        checks, ok = _verify(cfg, workers)
        return RunOutput(subcommand, meta, {"checks": checks}, ok=ok)

    model, rho0 = cfg.build_model(), cfg.build_initial_state()
    if subcommand == "evolve":
        red = evolve_direct(model, rho0, steps, spec).reduced
        return RunOutput(subcommand, meta, {"purity": [s.purity() for s in red]}, reduced=red)
    if subcommand == "nz":
        red = nz_evolve(model, rho0, steps, spec)
        return RunOutput(subcommand, meta, {"purity": [s.purity() for s in red]}, reduced=red)
    if subcommand == "tcl":
        tr = tcl_run(model, rho0, steps, spec, cfg.tolerances.max_condition)
        return RunOutput(subcommand, meta, {"conditions": tr.conditions}, reduced=tr.reduced)

    obs = _require_observable(cfg, subcommand)
    if subcommand == "trajectories":
        records = sample_ensemble(model, rho0, obs, steps, cfg.seeds.ensemble, cfg.seeds.base, spec, workers=workers)
        summ = ensemble_average(records)
        info = {
            "count": summ.count,
            "std_error": summ.std_error,
            "max_purity_deficit": max(max(r.purity_deficits) for r in records),
        }
        return RunOutput(subcommand, meta, info, reduced=summ.mean_reduced, trajectories=records)

    t = cfg.tolerances
    rep = unravel_report(
        model, obs, rho0, spec, steps, cfg.seeds.ensemble, cfg.seeds.base,
        tol=t.dependence, workers=workers, pure_tol=t.pure, mixing_tol=t.mixing,
    )  # fmt: skip
    info = {
        "model": rep.model,
        "tau": rep.tau,
        "classification": rep.classification,
        "observable_family": rep.observable_family,
        "max_purity_deficit": rep.max_purity_deficit,
        "conditions": {
            f"{m},{n}": {"verdict": d.verdict, "residual": d.residual} for (m, n), d in rep.condition_verdicts.items()
        },
        "h_difference_norms": {
            f"{m},{n}": float(np.linalg.norm(ops[0] - ops[1])) for (m, n), ops in rep.h_ops.items() if len(ops) > 1
        },
    }
    return RunOutput(subcommand, meta, info)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrepeat", description="Repeated-interaction open system simulator.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="base seed (overrides seeds.base)")
    p.add_argument("--ensemble", type=int, help="ensemble size (overrides seeds.ensemble)")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    seeds = cfg.seeds
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("must be an unsigned 64-bit integer", "--seed")
        seeds = seeds.model_copy(update={"base": args.seed})
    if args.ensemble is not None:
        if args.ensemble < 1:
            raise ConfigError("must be positive", "--ensemble")
        seeds = seeds.model_copy(update={"ensemble": args.ensemble})
    out = cfg.output
    if args.out is not None:
        out = out.model_copy(update={"dir": args.out})
    return cfg.model_copy(update={"seeds": seeds, "output": out})


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        try:
            cfg = _apply_overrides(load_config(args.config), args)
        except OSError as exc:
            print(f"qrepeat: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        output = run(args.subcommand, cfg)
        paths = serialize_output(output, cfg.output.dir)
    except ConfigError as exc:
        print(f"qrepeat: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IllConditionedKernel as exc:
        print(f"qrepeat: {exc} (step {exc.step}, condition estimate {exc.condition:.3e})", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DegenerateObservable, MeasurementError, QRepeatError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"qrepeat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"qrepeat: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    if not output.ok:
        failed = [k for k, v in output.summary["checks"].items() if not v["pass"]]
        print(f"qrepeat: verify failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
