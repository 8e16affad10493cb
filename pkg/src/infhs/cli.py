"""``infhs`` command-line interface.

Subcommands: ``simulate``, ``fit``, ``select`` and ``benchmark``. Exit
codes: 0 success, 2 bad flag / parse / validation error, 3 numerical
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import (
    BadFlag,
    InfHSError,
    IoError,
    NumericalError,
    ParseError,
    UnsupportedCombination,
    ValidationError,
)
from .gibbs import GibbsConfig, run_gibbs, summarize
from .metrics import auc, mse_beta
from .model import STATE_FIELDS, Dataset, Hyperparameters
from .selection import SelectionResult, dss_cv, inclusion_probs, threshold_select
from .simulate import PRESETS, SimSpec, simulate
from .vb import VBConfig, run_cavi_linear, run_cavi_probit

log = logging.getLogger("infhs")

EXIT_OK, EXIT_FLAG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

HYPER_KEYS = ("v", "q", "a", "b", "s0_sq")
GIBBS_KEYS = ("B", "bn", "seed", "thin")
VB_KEYS = tuple(f.name for f in fields(VBConfig))


# ---------------------------------------------------------------- I/O helpers

def _fmt(x) -> str:
    return repr(float(x))


def write_matrix(path: Path, a) -> None:
    a = np.asarray(a, float)
    if a.ndim == 1:
        a = a[:, None]
    text = "".join(",".join(_fmt(v) for v in row) + "\n" for row in a)
    _write_text(path, text)


def read_matrix(path: Path) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise ParseError(f"{path} is empty")
    try:
        a = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if any(len(r) != len(rows[0]) for r in rows):
        raise ParseError(f"{path}: ragged rows")
    return a


def _write_text(path: Path, text: str) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_table(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in r))
    _write_text(path, "\n".join(lines) + "\n")


def save_dataset(out: Path, data: Dataset) -> None:
    write_matrix(out / "y.csv", data.y)
    write_matrix(out / "X.csv", data.X)
    for d, z in enumerate(data.Z, start=1):
        write_matrix(out / f"Z_{d}.csv", z)


def load_dataset(folder: Path) -> Dataset:
    folder = Path(folder)
    if not folder.is_dir():
        raise IoError(f"data directory {folder} does not exist")
    y = read_matrix(folder / "y.csv")
    if y.shape[1] != 1:
        raise ParseError("y.csv must have a single column")
    X = read_matrix(folder / "X.csv")
    Z = []
    while (folder / f"Z_{len(Z) + 1}.csv").exists():
        Z.append(read_matrix(folder / f"Z_{len(Z) + 1}.csv"))
    return Dataset(y.ravel(), X, tuple(Z))


def draws_matrix(draws) -> np.ndarray:
    cols = [np.asarray(draws.arrays[k], float).reshape(len(draws), -1) for k in STATE_FIELDS]
    return np.hstack(cols)


# ---------------------------------------------------------------- settings

@dataclass
class Settings:
    hyper: dict
    gibbs: dict
    vb: dict


def load_settings(args) -> Settings:
    """JSON config first, then explicit flags on top."""
    cfg = {}
    if getattr(args, "config", None):
        cfg = read_json(args.config)
        if not isinstance(cfg, dict):
            raise ParseError("config must be a JSON object")
        unknown = set(cfg) - set(HYPER_KEYS + GIBBS_KEYS + VB_KEYS)
        if unknown:
            raise BadFlag(f"unknown config keys {sorted(unknown)}")
    for key in HYPER_KEYS + GIBBS_KEYS + VB_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return Settings(
        hyper={k: cfg[k] for k in HYPER_KEYS if k in cfg},
        gibbs={k: cfg[k] for k in GIBBS_KEYS if k in cfg},
        vb={k: cfg[k] for k in VB_KEYS if k in cfg},
    )


def make_hyper(settings: Settings, D: int) -> Hyperparameters:
    try:
        return Hyperparameters(**settings.hyper).for_sources(D)
    except (TypeError, ValueError) as exc:
        raise BadFlag(f"bad hyperparameters: {exc}") from exc


def make_gibbs_config(settings: Settings) -> GibbsConfig:
    try:
        return GibbsConfig(**settings.gibbs)
    except (TypeError, ValueError) as exc:
        raise BadFlag(f"bad Gibbs settings: {exc}") from exc


def make_vb_config(settings: Settings) -> VBConfig:
    try:
        return VBConfig(**settings.vb)
    except (TypeError, ValueError) as exc:
        raise BadFlag(f"bad VB settings: {exc}") from exc


def n_workers() -> int:
    raw = os.environ.get("INFHS_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError:
        raise BadFlag(f"INFHS_THREADS={raw!r} is not an integer")
    if k < 1:
        raise BadFlag("INFHS_THREADS must be >= 1")
    return k


# ---------------------------------------------------------------- fitting

def fit_engine(data: Dataset, hyper: Hyperparameters, engine: str, task: str,
               gcfg: GibbsConfig, vcfg: VBConfig):
    """Returns ``(summary dict, extra)`` where extra is the ELBO trace (VB)
    or the draws (Gibbs)."""
    if engine == "gibbs":
        if task != "linear":
            raise UnsupportedCombination("the Gibbs engine supports the linear task only")
        draws = run_gibbs(data, hyper, gcfg)
        summ = summarize(draws).to_dict()
        summ.update(engine="gibbs", task=task, n_draws=len(draws), meta=draws.meta)
        return summ, draws
    runner = run_cavi_linear if task == "linear" else run_cavi_probit
    state, trace = runner(data, hyper, vcfg)
    summ = state.summary()
    summ.update(engine="vb", task=task, inclusion=inclusion_probs(state).tolist(),
                elbo=trace[-1])
    return summ, trace


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    if args.scenario not in PRESETS:
        raise BadFlag(f"unknown scenario {args.scenario!r}")
    try:
        spec = SimSpec(args.n, args.p, args.p0, seed=args.seed, task=args.task)
    except ValidationError as exc:
        raise BadFlag(str(exc)) from exc
    data, beta = simulate(spec, args.scenario)
    out = Path(args.out)
    save_dataset(out, data)
    write_json(out / "truth.json", dict(
        beta=beta.tolist(),
        support=(np.flatnonzero(beta[1:]) + 1).tolist(),
        scenario=args.scenario,
        spec=asdict(spec),
    ))
    log.info("wrote simulated data to %s", out)
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.engine == "gibbs" and args.task == "probit":
        raise UnsupportedCombination("the Gibbs engine supports the linear task only")
    data = load_dataset(args.data)
    settings = load_settings(args)
    hyper = make_hyper(settings, data.D)
    gcfg = make_gibbs_config(settings)
    vcfg = make_vb_config(settings)
    out = Path(args.out)
    with threadpool_limits(1):
        summ, extra = fit_engine(data, hyper, args.engine, args.task, gcfg, vcfg)
    write_json(out / "fit.json", summ)
    if args.engine == "vb":
        write_matrix(out / "elbo.csv", extra)
    elif args.save_draws:
        write_matrix(out / "draws.csv", draws_matrix(extra))
    log.info("wrote fit to %s", out)
    return EXIT_OK


def cmd_select(args) -> int:
    fit = read_json(args.fit)
    if not isinstance(fit, dict) or "inclusion" not in fit or "beta_mean" not in fit:
        raise ParseError(f"{args.fit} is not a fit summary")
    if args.method == "threshold":
        scores = np.asarray(fit["inclusion"], float)
        res = SelectionResult(scores=scores, selected=threshold_select(scores, args.threshold),
                              method="threshold")
    else:
        if args.data is None:
            raise BadFlag("--method dss needs --data")
        data = load_dataset(args.data)
        if len(fit["beta_mean"]) != data.p + 1:
            raise BadFlag("fit and data dimensions differ")
        with threadpool_limits(1):
            res = dss_cv(data, fit, args.grid, folds=args.folds, seed=args.seed,
                         penalize_intercept=not args.exempt_intercept)
    out = Path(args.out)
    payload = res.to_dict()
    payload["threshold"] = args.threshold if args.method == "threshold" else None
    write_json(out / "selection.json", payload)
    return EXIT_OK


def parse_scenarios(text: str) -> list[str]:
    """Comma list; ``main_G0..main_G4`` expands to the numbered range."""
    names = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\w+_G)(\d+)\.\.(\w+_G)(\d+)", part)
        if m:
            if m.group(1) != m.group(3):
                raise BadFlag(f"scenario range {part!r} mixes families")
            lo, hi = int(m.group(2)), int(m.group(4))
            if lo > hi:
                raise BadFlag(f"empty scenario range {part!r}")
            names.extend(f"{m.group(1)}{k}" for k in range(lo, hi + 1))
        elif part:
            names.append(part)
    for name in names:
        if name not in PRESETS:
            raise BadFlag(f"unknown scenario {name!r}")
    if not names:
        raise BadFlag("no scenarios given")
    return names


@dataclass(frozen=True)
class _Job:
    scenario: str
    replicate: int
    n: int
    p: int
    p0: int
    task: str
    seed: int
    engines: tuple
    settings: Settings


def _run_job(job: _Job) -> dict:
    """One replicate of one scenario. The data depend only on (seed,
    replicate), so every scenario of a replicate shares X, y and beta."""
    with threadpool_limits(1):
        spec = SimSpec(job.n, job.p, job.p0, task=job.task)
        data_rng = np.random.default_rng(np.random.SeedSequence(job.seed, spawn_key=(job.replicate,)))
        data, beta = simulate(spec, job.scenario, data_rng)
        truth = beta[1:] != 0
        hyper = make_hyper(job.settings, data.D)
        chain_seed = int(np.random.SeedSequence(job.seed, spawn_key=(job.replicate, 1))
                         .generate_state(1)[0])
        gcfg = GibbsConfig(**{**job.settings.gibbs, "seed": chain_seed})
        vcfg = make_vb_config(job.settings)
        row = dict(scenario=job.scenario, replicate=job.replicate)
        fits = {}
        for eng in job.engines:
            summ, _ = fit_engine(data, hyper, eng, job.task, gcfg, vcfg)
            fits[eng] = summ
            row[f"auc_{eng}"] = auc(summ["inclusion"], truth)
            row[f"mean_sd_{eng}"] = float(np.mean(summ["beta_sd"]))
        if "gibbs" in fits and "vb" in fits:
            row["mse"] = mse_beta(fits["gibbs"]["beta_mean"], fits["vb"]["beta_mean"])
        return row


def cmd_benchmark(args) -> int:
    if args.replicates < 1:
        raise BadFlag("--replicates must be >= 1")
    scenarios = parse_scenarios(args.scenarios)
    engines = tuple(dict.fromkeys(e.strip() for e in args.engines.split(",") if e.strip()))
    if not engines or any(e not in ("vb", "gibbs") for e in engines):
        raise BadFlag(f"--engines must list vb and/or gibbs, got {args.engines!r}")
    if "gibbs" in engines and args.task == "probit":
        raise UnsupportedCombination("the Gibbs engine supports the linear task only")
    try:
        SimSpec(args.n, args.p, args.p0, task=args.task)
    except ValidationError as exc:
        raise BadFlag(str(exc)) from exc
    settings = load_settings(args)
    settings.gibbs.pop("seed", None)
    make_gibbs_config(settings)  # fail early on bad flags
    jobs = [_Job(s, r, args.n, args.p, args.p0, args.task, args.seed, engines, settings)
            for s in scenarios for r in range(args.replicates)]
    workers = min(n_workers(), len(jobs))
    log.info("running %d jobs on %d worker(s)", len(jobs), workers)
    if workers == 1:
        rows = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_job, jobs))

    out = Path(args.out)
    key = ["scenario", "replicate"]
    fmt = lambda r, cols: [r["scenario"], str(r["replicate"])] + [r[c] for c in cols]
    auc_cols = [f"auc_{e}" for e in engines]
    write_table(out / "auc_by_scenario.csv", key + auc_cols, [fmt(r, auc_cols) for r in rows])
    sd_cols = [f"mean_sd_{e}" for e in engines]
    write_table(out / "sd_comparison.csv", key + sd_cols, [fmt(r, sd_cols) for r in rows])
    if "mse" in rows[0]:
        write_table(out / "gs_vs_vb_mse.csv", key + ["mse"], [fmt(r, ["mse"]) for r in rows])
    log.info("wrote benchmark tables to %s", out)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_model_flags(p: argparse.ArgumentParser, gibbs_seed: bool = True) -> None:
    p.add_argument("--config", type=Path, help="JSON file with hyperparameter / engine settings")
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--v", type=float)
    g.add_argument("--q", type=float)
    g.add_argument("--a", type=float, nargs="+")
    g.add_argument("--b", type=float, nargs="+")
    g.add_argument("--s0-sq", dest="s0_sq", type=float)
    g = p.add_argument_group("Gibbs sampler")
    g.add_argument("--B", type=int, help="total iterations")
    g.add_argument("--bn", type=int, help="burn-in iterations")
    g.add_argument("--thin", type=int)
    if gibbs_seed:
        g.add_argument("--seed", type=int)
    g = p.add_argument_group("variational Bayes")
    g.add_argument("--eps", type=float, help="ELBO convergence tolerance")
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--no-strict", dest="strict", action="store_const", const=False)
    g.add_argument("--truncation-term", dest="truncation_term", action="store_const",
                   const=True, help="add the -sum log k_j term to the reported ELBO")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infhs", description="Horseshoe regression with co-data.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--p0", type=int, required=True)
    p.add_argument("--scenario", default="main_G0")
    p.add_argument("--task", choices=("linear", "probit"), default="linear")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a dataset with Gibbs or VB")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--engine", choices=("vb", "gibbs"), default="vb")
    p.add_argument("--task", choices=("linear", "probit"), default="linear")
    p.add_argument("--save-draws", action="store_true")
    _add_model_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="variable selection from a saved fit")
    p.add_argument("--fit", type=Path, required=True)
    p.add_argument("--data", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--method", choices=("threshold", "dss"), default="threshold")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid", type=float, nargs="+")
    p.add_argument("--exempt-intercept", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("benchmark", help="replicated simulation study")
    p.add_argument("--scenarios", default="main_G0..main_G4")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=500)
    p.add_argument("--p0", type=int, default=30)
    p.add_argument("--task", choices=("linear", "probit"), default="linear")
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--engines", default="vb")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    _add_model_flags(p, gibbs_seed=False)
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="infhs: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        code = EXIT_FLAG
        msg = exc
    except NumericalError as exc:
        code = EXIT_NUMERIC
        msg = exc
    except (IoError, OSError) as exc:
        code = EXIT_IO
        msg = exc
    except InfHSError as exc:  # pragma: no cover - every subclass is mapped above
        code, msg = EXIT_NUMERIC, exc
    print(f"infhs: error: {type(msg).__name__}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
