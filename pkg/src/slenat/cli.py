"""Command-line runner: one JSON config in, CSV/NDJSON files and a manifest out.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 an
acceptance check failed.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, from_dict, help_text, parse_config, validate

THREADS_ENV = "SLENAT_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3

# subcommand name -> experiment kind
COMMANDS = {"simulate": "simulate", "phi": "phi", "theta": "theta", "minkowski": "minkowski",
            "dvar": "dvariation", "moments": "moments", "acceptance": "acceptance"}


def resolve_threads(flag: int | None) -> int:
    """``--threads`` wins over ``$SLENAT_THREADS``; the default is 1."""
    if flag is not None:
        n = flag
    else:
        env = os.environ.get(THREADS_ENV, "").strip()
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError("threads", f"{THREADS_ENV}={env!r} is not an integer") from None
    if n < 1:
        raise ConfigError("threads", "must be at least 1")
    return n


def _pmap(fn, items, threads: int):
    """Order-preserving map; results do not depend on ``threads``."""
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _check_out(out: str) -> Path:
    p = Path(out)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("out", f"cannot create {p}: {exc.strerror}") from None
    if not os.access(p, os.W_OK):
        raise ConfigError("out", f"directory {p} is not writable")
    return p


def _table(cfg: ExperimentConfig, params, threads: int):
    from .hitting import PhiTable, build_phi_table

    if cfg.phi_table:
        return PhiTable.load_csv(cfg.phi_table, params)
    return build_phi_table(cfg.grid[0], cfg.grid[1], cfg.n_samples, params, cfg.base_seed)


# --- experiments --------------------------------------------------------------


def run_simulate(cfg, params, out: Path, threads: int) -> dict:
    from .core import sample_driving
    from .green import GREEN_CSV_HEADER, forward_seeds, green_g, mart_M
    from .io import write_csv
    from .loewner import build_chain, full_trace, write_curve_ndjson

    seeds = range(cfg.base_seed, cfg.base_seed + cfg.n_seeds)

    def one(seed):
        ch = build_chain(sample_driving(cfg.horizon, cfg.dt, seed), params)
        return full_trace(ch, 0.0, cfg.stride)

    for seed, (ts, pts) in zip(seeds, _pmap(one, seeds, threads)):
        write_curve_ndjson(out / f"curve_{seed}.ndjson", ts, pts)
    pts = [complex(a, b) for a, b in cfg.points]
    rows = []
    for z in pts:
        Z, L, A, _ = forward_seeds(z, cfg.times, cfg.dt, seeds, params)
        M = mart_M(Z, L, A, params)
        for i, seed in enumerate(seeds):
            rows += [(z.real, z.imag, green_g(z, params), float(M[i, j]), float(t), seed)
                     for j, t in enumerate(cfg.times)]
    write_csv(out / "martingale.csv", GREEN_CSV_HEADER, rows)
    return {"curves": cfg.n_seeds, "files": ["martingale.csv"] + [f"curve_{s}.ndjson" for s in seeds]}


def run_phi(cfg, params, out: Path, threads: int) -> dict:
    from .hitting import PHI_CSV_HEADER, phi
    from .io import write_csv

    table = _table(cfg, params, threads)
    table.save_csv(out / "phi_table.csv")
    rows = []
    for k, (x, y) in enumerate(cfg.points):
        for t in cfg.times or [1.0]:
            if t > 0:
                m, se = phi(complex(x, y), t, cfg.n_samples, params, cfg.base_seed + k * cfg.n_samples)
                rows.append((float(x), float(y), m, se, cfg.n_samples))
    write_csv(out / "phi_points.csv", PHI_CSV_HEADER, rows)
    return {"table_shape": list(table.values.shape), "x_max": table.x_max, "files": ["phi_table.csv", "phi_points.csv"]}


def run_theta(cfg, params, out: Path, threads: int) -> dict:
    from .core import sample_driving
    from .green import DomainBox
    from .loewner import build_chain
    from .natparam import ThetaPlan, theta_estimate, write_theta_csv

    table = _table(cfg, params, threads)
    plan = ThetaPlan(table, params)
    D = DomainBox(*cfg.domain)
    seeds = range(cfg.base_seed, cfg.base_seed + cfg.n_seeds)

    def one(seed):
        ch = build_chain(sample_driving(cfg.horizon, cfg.dt, seed), params)
        return [theta_estimate(ch, cfg.horizon, n, D, table, params, plan) for n in cfg.levels]

    ests = [e for group in _pmap(one, seeds, threads) for e in group]
    write_theta_csv(out / "theta.csv", ests)
    table.save_csv(out / "phi_table.csv")
    return {"tail_bound": plan.tail_bound, "files": ["theta.csv", "phi_table.csv"]}


def run_minkowski(cfg, params, out: Path, threads: int) -> dict:
    from .acceptance import minkowski_window
    from .core import sample_driving
    from .loewner import build_chain, full_trace
    from .natparam import minkowski_content, write_table_csv

    seeds = range(cfg.base_seed, cfg.base_seed + cfg.n_seeds)
    h = math.sqrt(2.0 * params.a * cfg.dt)
    eps = np.asarray(cfg.eps) if cfg.eps is not None else minkowski_window(h)

    def one(seed):
        ch = build_chain(sample_driving(cfg.horizon, cfg.dt, seed), params)
        return minkowski_content(full_trace(ch)[1], eps, params.d)

    fits = _pmap(one, seeds, threads)
    content = np.mean([f.content for f in fits], axis=0)
    area = np.mean([f.area for f in fits], axis=0)
    write_table_csv(out / "minkowski.csv", eps, content)
    write_table_csv(out / "minkowski_area.csv", eps, area)
    return {"slopes": [f.slope for f in fits], "target_slope": 2.0 - params.d,
            "files": ["minkowski.csv", "minkowski_area.csv"]}


def run_dvariation(cfg, params, out: Path, threads: int) -> dict:
    from .core import sample_driving
    from .loewner import build_chain, full_trace
    from .natparam import d_variation, write_table_csv

    seeds = range(cfg.base_seed, cfg.base_seed + cfg.n_seeds)

    def one(seed):
        ch = build_chain(sample_driving(cfg.horizon, cfg.dt, seed), params)
        return d_variation(full_trace(ch)[1], params.d, cfg.meshes)

    vals = np.mean(_pmap(one, seeds, threads), axis=0)
    write_table_csv(out / "dvariation.csv", [int(m) for m in cfg.meshes], vals)
    return {"files": ["dvariation.csv"]}


def run_moments(cfg, params, out: Path, threads: int) -> dict:
    from .core import mean_stderr
    from .moments import estimate_I, martingale_N, n0, sample_reverse, write_moments_csv
    from .natparam import ThetaPlan

    seeds = range(cfg.base_seed, cfg.base_seed + cfg.n_seeds)
    z = [complex(a, b) for a, b in cfg.points]
    times = [t for t in cfg.times if t > 0]
    smp = sample_reverse(z, times, cfg.dt, seeds, params)
    rows = []
    for k, zz in enumerate(z):
        tag = f"{zz.real:g}{zz.imag:+g}i"
        for t in times:
            m, se = mean_stderr(martingale_N(smp, cfg.r, params, t, k))
            rows.append((t, f"N_r={cfg.r:g}({tag})/N0", m / n0(zz, cfg.r, params), se / n0(zz, cfg.r, params),
                         cfg.n_seeds))
            ti = smp.time_index(t)
            m, se = mean_stderr(np.exp(params.d * smp.log_hprime[:, ti, k]))
            rows.append((t, f"abs_hprime_d({tag})", m, se, cfg.n_seeds))
    files = ["moments.csv"]
    if cfg.s_values:
        table = _table(cfg, params, threads)
        plan = ThetaPlan(table, params, 1e-3)
        for s in cfg.s_values:
            m, se = estimate_I(s, None, table, cfg.n_seeds, params, cfg.base_seed, cfg.dt, plan)
            rows.append((s, "I_H", m, se, cfg.n_seeds))
    write_moments_csv(out / "moments.csv", rows)
    return {"files": files}


def run_acceptance(cfg, params, out: Path, threads: int) -> dict:
    from .acceptance import run_all
    from .io import write_csv

    table = _table(cfg, params, threads) if cfg.phi_table else None
    res = run_all(cfg.scale, cfg.criteria, table, progress=lambda m: print(m, file=sys.stderr, flush=True))
    for r in res:
        print(r.line(), flush=True)
    write_csv(out / "acceptance.csv", ("criterion", "name", "status", "detail"),
              [(r.cid, r.name, r.status, r.detail) for r in res])
    failed = [r.cid for r in res if r.passed is False]
    return {"failed": failed, "files": ["acceptance.csv"]}


RUNNERS = {"simulate": run_simulate, "phi": run_phi, "theta": run_theta, "minkowski": run_minkowski,
           "dvariation": run_dvariation, "moments": run_moments, "acceptance": run_acceptance}


def run(cfg: ExperimentConfig, threads: int = 1) -> int:
    """Validate ``cfg``, run it and write the outputs plus ``manifest.json``."""
    from .core import make_params
    from .io import write_json

    validate(cfg)
    out = _check_out(cfg.out)
    params = make_params(cfg.kappa)
    summary = RUNNERS[cfg.kind](cfg, params, out, threads)
    write_json(out / "manifest.json", {"version": __version__, "config": cfg.to_dict(), "summary": summary})
    return EXIT_FAILED if summary.get("failed") else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--kappa", type=float, help="kappa (overrides the config)")
    p = argparse.ArgumentParser(prog="slenat", description="SLE natural-parametrization experiments.",
                                epilog=help_text(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], epilog=help_text(),
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       help=f"{COMMANDS[name]} experiment")
    return p


def config_from_args(args) -> ExperimentConfig:
    kind = COMMANDS[args.command]
    if args.config:
        cfg = parse_config(args.config)
        if cfg.kind != kind:
            raise ConfigError("kind", f"config is for {cfg.kind!r} but the subcommand is {args.command!r}")
    else:
        if args.kappa is None:
            raise ConfigError("kappa", "missing required field (pass --config or --kappa)")
        cfg = from_dict({"kind": kind, "kappa": args.kappa})
    if args.kappa is not None:
        cfg.kappa = float(args.kappa)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        cfg.base_seed = args.seed
    if args.out is not None:
        cfg.out = os.path.abspath(args.out)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
        cfg = config_from_args(args)
        return run(cfg, threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:  # module preconditions (ParameterError, DomainError, CoverageError)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
