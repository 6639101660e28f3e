"""``bayal run`` and ``bayal plot``.

Flags override config-file values, which override defaults. Errors are
printed to stderr as one JSON object and the exit status is nonzero:
2 for invalid configuration (nothing is written), 1 for failures during
the run.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError, ExperimentConfig, build_config, load_config_file
from .data import SyntheticSpec, load_dataset, uneven_spec
from .design import EngineConfig
from .evaluation import (
    MethodSpec,
    StudyResult,
    fixed_pool_scenario,
    run_replications,
    synthetic_scenario,
    write_curves_csv,
    write_records_csv,
)

log = logging.getLogger("bayal")

EXIT_RUN_ERROR = 1
EXIT_CONFIG_ERROR = 2


def replication_seeds(seed: int, M: int) -> list:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(M)]


def method_specs(cfg: ExperimentConfig) -> list:
    out = []
    for m in cfg.methods:
        if m == "proposed":
            out.append(MethodSpec("proposed", "proposed", cfg.omega, cfg.gamma, cfg.n0))
        else:
            a = cfg.adsl_alpha if cfg.adsl_alpha is not None else cfg.gamma
            out.append(MethodSpec("adsl", "adsl", a, a, cfg.adsl_n0, cfg.k0))
    return out


def build_scenario(cfg: ExperimentConfig):
    methods = method_specs(cfg)
    engine = EngineConfig(M_prior=cfg.M_prior, k_cap=cfg.k_cap)
    if cfg.scenario == "synthetic":
        spec = SyntheticSpec(points_per_level=cfg.points_per_level)
        return synthetic_scenario(methods, cfg.budget, spec, engine, grid_points=cfg.grid_points), None
    if cfg.scenario == "uneven":
        return synthetic_scenario(methods, cfg.budget, uneven_spec(scale=cfg.uneven_scale), engine, grid_points=cfg.grid_points), None
    pool, meta = load_dataset(getattr(cfg, f"{cfg.scenario}_path"), cfg.scenario)
    return fixed_pool_scenario(pool, methods, cfg.budget, engine), meta


def write_gnuplot(curves: dict, path) -> None:
    """One data block per method, separated by two blank lines (``index`` in gnuplot)."""
    with open(path, "w") as fh:
        for i, (name, curve) in enumerate(curves.items()):
            if i:
                fh.write("\n\n")
            fh.write(f"# method {name}\n# stage n_labeled mean_error mean_dist\n")
            for s in curve.stages:
                dist = "NaN" if s.mean_dist is None else f"{s.mean_dist:.12g}"
                fh.write(f"{s.stage} {s.n_labeled} {s.mean_error:.12g} {dist}\n")


def manifest(cfg: ExperimentConfig, study: StudyResult, meta) -> dict:
    import scipy

    try:
        import numba

        numba_version = numba.__version__
    except ImportError:
        numba_version = None
    out = {
        "config": cfg.to_dict(),
        "seeds": study.seeds,
        "excluded": [{"replication": r, "seed": s, "reason": why} for r, s, why in study.excluded],
        "software": {
            "bayal": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba_version,
            "backend": kernels.get_backend(),
        },
    }
    if meta is not None:
        out["dataset"] = {"name": meta.name, "N": meta.N, "p": meta.p, "n_positive": meta.n_positive, "warnings": meta.warnings}
    return out


def run_experiment(cfg: ExperimentConfig) -> Path:
    """Run the configured study and write its artifacts; returns the output directory."""
    cfg.validate()
    scenario, meta = build_scenario(cfg)
    seeds = replication_seeds(cfg.seed, cfg.M_reps)
    study = run_replications(scenario, cfg.M_reps, seeds, progress=lambda r: log.info("replication %d done", r))
    if len(study.excluded) == cfg.M_reps:
        raise RuntimeError("every replication was excluded as degenerate")
    out = Path(cfg.resolved_output_dir())
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(study.records, out / "records.csv")
    write_curves_csv(study.curves, out / "curves.csv")
    write_gnuplot(study.curves, out / "curves.dat")
    (out / "config.txt").write_text(cfg.to_text())
    (out / "manifest.json").write_text(json.dumps(manifest(cfg, study, meta), indent=2, sort_keys=True) + "\n")
    return out


def _error(kind: str, messages, code: int) -> int:
    print(json.dumps({"status": "error", "kind": kind, "errors": list(messages)}), file=sys.stderr)
    return code


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file or a previous run's manifest.json")
    p.add_argument("--scenario")
    p.add_argument("--methods", help="comma list of proposed,adsl")
    p.add_argument("--n0", type=int)
    p.add_argument("--adsl-n0", dest="adsl_n0", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--adsl-alpha", dest="adsl_alpha", type=float)
    p.add_argument("--m-prior", dest="M_prior", type=int)
    p.add_argument("--reps", dest="M_reps", type=int)
    p.add_argument("--k-cap", dest="k_cap", type=int)
    p.add_argument("--k0", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--points-per-level", dest="points_per_level", type=int)
    p.add_argument("--uneven-scale", dest="uneven_scale", type=int)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--bupa-path", dest="bupa_path")
    p.add_argument("--wdbc-path", dest="wdbc_path")
    p.add_argument("--output-dir", dest="output_dir")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bayal", description="Bayesian D-optimal active learning experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="run a replication study"))
    pp = sub.add_parser("plot", help="plot a curves.csv")
    pp.add_argument("curves")
    pp.add_argument("--output-dir", dest="output_dir")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")

    if args.command == "plot":
        from .plots import emit_plots

        try:
            for path in emit_plots(args.curves, args.output_dir):
                print(path)
        except (OSError, ValueError) as err:
            return _error("plot", [str(err)], EXIT_RUN_ERROR)
        return 0

    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        if flags.get("methods") is not None:
            flags["methods"] = tuple(m.strip() for m in flags["methods"].split(",") if m.strip())
        cfg = build_config(file_values, flags)
    except ConfigError as err:
        return _error("config", err.problems, EXIT_CONFIG_ERROR)
    except TypeError as err:
        return _error("config", [str(err)], EXIT_CONFIG_ERROR)
    try:
        out = run_experiment(cfg)
    except Exception as err:  # reported, not re-raised: the harness contract is a JSON error
        log.debug("run failed", exc_info=True)
        return _error("run", [f"{type(err).__name__}: {err}"], EXIT_RUN_ERROR)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
