"""Command-line front end.

Subcommands::

    maskrel fit --config run.ini --data systems.csv --out results/
    maskrel simulate --config scenario.ini --out systems.csv
    maskrel evaluate --config scenario.ini --out mae.csv
    maskrel cutsets "max(min(1,2), min(1,3), min(2,3))"

Configs are INI files. See README.md for the keys each section accepts.
"""
from __future__ import annotations

import argparse
import configparser
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .datafile import DatasetError, emit, ingest
from .distributions import from_moments
from .evaluation import MASKED_SETS_ONLY_DEAD, ScenarioSpec, fit_dataset, run_scenario, simulate_dataset
from .inference import FAST_PROFILE, FULL_PROFILE, PriorSpec, SamplerConfig, Variant
from .posterior import curve_summary, default_grid
from .structures import StructureError, SystemStructure, parse_structure

__all__ = ["main", "RunConfig", "load_config", "ConfigError"]

PARAMS_HEADER = ("component", "parameter", "mean", "sd")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class RunConfig:
    structure: SystemStructure
    variant: Variant = Variant()
    priors: PriorSpec = PriorSpec()
    sampler: SamplerConfig = FULL_PROFILE
    covariates: tuple = ()
    curve_covariates: tuple | None = None
    allowed_masked_sets: list | None = None
    grid_points: int = 200
    grid_max: float | None = None
    level: float = 0.95
    workers: int = 1
    # simulation scenario
    n: int | None = None
    p: float | None = None
    replicates: int = 1
    distributions: list = field(default_factory=list)


def _parse_sets(text: str) -> list[tuple[int, ...]]:
    sets = re.findall(r"\{([^}]*)\}", text)
    if not sets and text.strip():
        raise ConfigError(f"masked sets must be written like {{1,3}}; got {text!r}")
    return [tuple(sorted(int(v) for v in s.split(",") if v.strip())) for s in sets]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in re.split(r"[,\s]+", text.strip()) if v]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]


def load_config(source, fast: bool = False, seed: int | None = None) -> RunConfig:
    """Read an INI config from a path or from text.

    ``fast`` swaps in the short sampler profile before the ``[sampler]``
    section is applied; ``seed`` overrides every seed in the file.
    """
    # ";" separates masked sets, so only "#" starts an inline comment
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        if isinstance(source, Path) or "\n" not in str(source):
            with open(source, encoding="utf-8") as fh:
                cp.read_file(fh)
        else:
            cp.read_string(source)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(str(exc)) from None
    try:
        return _build_config(cp, fast, seed)
    except (ValueError, StructureError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _build_config(cp, fast, seed) -> RunConfig:
    if not cp.has_option("model", "structure"):
        raise ConfigError("[model] structure is required")
    model = cp["model"]
    m = model.getint("m", fallback=None)
    structure = parse_structure(model["structure"], m)

    zero = [False, False, False]
    for l in _int_list(model.get("zero_lambdas", "")):
        if l not in (1, 2, 3):
            raise ConfigError(f"zero_lambdas entries must be 1, 2 or 3; got {l}")
        zero[l - 1] = True
    variant = Variant(symmetric=model.getboolean("symmetric", fallback=False), zero=tuple(zero))

    covariates = tuple(v.strip() for v in model.get("covariates", "").split(",") if v.strip())
    curve_w = model.get("curve_covariates", None)
    curve_w = tuple(_float_list(curve_w)) if curve_w else None
    if curve_w is not None and len(curve_w) != len(covariates):
        raise ConfigError("curve_covariates needs one value per covariate column")
    allowed = model.get("allowed_masked_sets", None)
    allowed = _parse_sets(allowed) if allowed else None

    pr = cp["priors"] if cp.has_section("priors") else {}
    base = PriorSpec()

    def gamma_prior(name):
        a, b = getattr(base, name)
        return (float(pr.get(f"{name}_shape", a)), float(pr.get(f"{name}_rate", b)))

    priors = PriorSpec(beta=gamma_prior("beta"), eta=gamma_prior("eta"), mu=gamma_prior("mu"),
                       gamma_sd=float(pr.get("gamma_sd", base.gamma_sd)))

    profile = FAST_PROFILE if fast else FULL_PROFILE
    sm = cp["sampler"] if cp.has_section("sampler") else None
    if sm is not None and not fast:
        kwargs = dict(
            n_iter=sm.getint("n_iter", profile.n_iter),
            burn_in=sm.getint("burn_in", profile.burn_in),
            thin=sm.getint("thin", profile.thin),
        )
    else:
        kwargs = dict(n_iter=profile.n_iter, burn_in=profile.burn_in, thin=profile.thin)
    sampler = SamplerConfig(
        **kwargs,
        proposal_sd=tuple(_float_list(sm["proposal_sd"])) if sm is not None and "proposal_sd" in sm
        else profile.proposal_sd,
        adapt=sm.getboolean("adapt", True) if sm is not None else True,
        seed=seed if seed is not None else (sm.getint("seed", 0) if sm is not None else 0),
        fix_location=sm.getboolean("fix_location", False) if sm is not None else False,
    )

    out = cp["output"] if cp.has_section("output") else {}
    cfg = RunConfig(structure, variant, priors, sampler, covariates, curve_w, allowed,
                    grid_points=int(out.get("grid_points", 200)),
                    grid_max=float(out["grid_max"]) if out.get("grid_max", "").strip() else None,
                    level=float(out.get("level", 0.95)),
                    workers=int(out.get("workers", 1)))

    if cp.has_section("scenario"):
        sc = cp["scenario"]
        cfg.n = sc.getint("n")
        cfg.p = sc.getfloat("p")
        if cfg.n is None or cfg.p is None:
            raise ConfigError("[scenario] needs n and p")
        cfg.replicates = sc.getint("replicates", 1)
        if seed is None:
            cfg.sampler = cfg.sampler.with_seed(sc.getint("seed", cfg.sampler.seed))
        if not cp.has_option("model", "symmetric") and not cp.has_option("model", "zero_lambdas"):
            cfg.variant = MASKED_SETS_ONLY_DEAD
        cfg.distributions = _parse_components(cp, structure.m)
    return cfg


def _parse_components(cp, m):
    if not cp.has_section("components"):
        raise ConfigError("a scenario needs a [components] section")
    sec = cp["components"]
    dists = []
    for j in range(1, m + 1):
        if str(j) not in sec:
            raise ConfigError(f"[components] has no entry for component {j}")
        parts = sec[str(j)].split()
        if len(parts) != 3:
            raise ConfigError(f"component {j}: expected 'family mean variance', got {sec[str(j)]!r}")
        dists.append(from_moments(parts[0], float(parts[1]), float(parts[2])))
    return dists


def _fmt(v) -> str:
    return "NA" if v is None or not np.isfinite(v) else f"{v:.10g}"


def _param_rows(j, fit, cfg: RunConfig):
    s = fit.sample
    rows = [(j, "beta", s.beta)]
    if s.gamma is None:
        rows.append((j, "eta", s.eta))
    else:
        rows += [(j, f"gamma_{name}", s.gamma[:, i]) for i, name in enumerate(cfg.covariates)]
    rows.append((j, "mu", s.mu))
    out = []
    for comp, name, x in rows:
        out.append((comp, name, float(np.mean(x)), float(np.std(x, ddof=1)) if x.size > 1 else 0.0))
    for l in range(3):
        if cfg.variant.zero[l]:
            out.append((j, f"lambda{l + 1}", 0.0, 0.0))
        elif s.lambdas is None:
            out.append((j, f"lambda{l + 1}", None, None))
        else:
            x = s.lambdas[:, l]
            out.append((j, f"lambda{l + 1}", float(np.mean(x)), float(np.std(x, ddof=1)) if x.size > 1 else 0.0))
    return out


def cmd_fit(args, cfg: RunConfig) -> int:
    if not args.data:
        raise ConfigError("fit needs --data")
    res = ingest(Path(args.data), cfg.structure, covariate_names=cfg.covariates,
                 allowed_masked_sets=cfg.allowed_masked_sets, strict=args.strict_schema)
    for note in res.warnings:
        print(f"warning: {note}", file=sys.stderr)
    ds = res.dataset
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "cause_table.csv").write_text(
        "cause,count\n" + "".join(f"{k},{v}\n" for k, v in res.cause_table.items()), encoding="utf-8")

    fits = fit_dataset(ds, cfg.sampler, cfg.priors, cfg.variant, workers=max(args.workers, cfg.workers))
    failed = [f for f in fits if f.error is not None]
    for f in failed:
        print(f"error: component {f.component}: {f.error}", file=sys.stderr)
    if failed:
        return 1

    grid = np.linspace(0.0, cfg.grid_max, cfg.grid_points) if cfg.grid_max else default_grid(ds.times, cfg.grid_points)
    w = None
    if cfg.covariates:
        w = np.asarray(cfg.curve_covariates) if cfg.curve_covariates is not None else ds.covariates.mean(axis=0)
    lines = [",".join(PARAMS_HEADER)]
    for fit in fits:
        for comp, name, mean, sd in _param_rows(fit.component, fit, cfg):
            lines.append(f"{comp},{name},{_fmt(mean)},{_fmt(sd)}")
        summary = curve_summary(fit.sample, grid, cfg.level, w)
        (out / f"curve_{fit.component}.csv").write_text(summary.to_csv(), encoding="utf-8")
        if fit.chain is not None:
            for note in fit.chain.warnings:
                print(f"warning: component {fit.component}: {note}", file=sys.stderr)
    (out / "params.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    spec = _scenario(cfg)
    ds = simulate_dataset(spec, np.random.default_rng(spec.seed))
    _write(args.out, emit(ds))
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    spec = _scenario(cfg)
    report = run_scenario(spec, cfg.replicates, workers=max(args.workers, cfg.workers))
    for r, j, err in report.failures:
        print(f"warning: replicate {r}, component {j} failed: {err}", file=sys.stderr)
    _write(args.out, report.to_csv())
    return 0


def _scenario(cfg: RunConfig) -> ScenarioSpec:
    if cfg.n is None:
        raise ConfigError("this command needs a [scenario] section")
    return ScenarioSpec(cfg.structure, cfg.distributions, cfg.n, cfg.p, seed=cfg.sampler.seed,
                        sampler=cfg.sampler, variant=cfg.variant, priors=cfg.priors,
                        grid_points=cfg.grid_points)


def cmd_cutsets(args) -> int:
    text = args.structure
    if text is None:
        if not args.config:
            raise ConfigError("cutsets needs a structure expression or --config")
        text = load_config(args.config).structure
    s = text if isinstance(text, SystemStructure) else parse_structure(text)
    for cut in s.cut_sets:
        print("{" + ",".join(map(str, cut)) + "}")
    return 0


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run or scenario file")
    common.add_argument("--seed", type=int, help="override every seed in the config")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--fast", action="store_true", help="short sampler profile for smoke runs")
    common.add_argument("--workers", type=int, default=1, help="parallel processes")

    p = argparse.ArgumentParser(prog="maskrel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    fit = sub.add_parser("fit", parents=[common], help="fit every component of a dataset")
    fit.add_argument("--data", help="system dataset CSV")
    fit.add_argument("--strict-schema", action="store_true",
                     help="reject masked sets outside allowed_masked_sets")
    sub.add_parser("simulate", parents=[common], help="simulate a dataset from a scenario")
    sub.add_parser("evaluate", parents=[common], help="MAE report over seeded replicates")
    cuts = sub.add_parser("cutsets", parents=[common], help="print minimal cut sets")
    cuts.add_argument("structure", nargs="?", help="structure expression")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "cutsets":
            return cmd_cutsets(args)
        if not args.config:
            raise ConfigError(f"{args.command} needs --config")
        if args.command == "fit" and not args.out:
            raise ConfigError("fit needs --out")
        cfg = load_config(args.config, fast=args.fast, seed=args.seed)
        return {"fit": cmd_fit, "simulate": cmd_simulate, "evaluate": cmd_evaluate}[args.command](args, cfg)
    except (ConfigError, DatasetError, StructureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
