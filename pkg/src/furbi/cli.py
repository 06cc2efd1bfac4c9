"""Command-line interface: dependence reports, model fitting, reproductions.

Configs are single JSON files with nested sections; unknown keys are
rejected before any computation.  Exit codes: 0 success, 2 usage or config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .base_measures import BaseMeasure, G0Family, NIGParams
from .dependence import (DependenceReport, Method, beta_closed, corr_observables,
                         gamma_closed, gamma_numeric, hdp_dependence,
                         mc_dependence_oracle, n_atoms_for_residual)
from .evaluate import alcpo, ess, miae, mlcpo, rand_index, vi_point_estimate
from .levy import LevyFamily, LevySpec
from .models import (Dataset, MCMCConfig, ModelConfig, build, gen_finance_synthetic,
                     gen_missing_dataset, gen_three_group, gen_two_group,
                     missing_pattern_split, standardize)
from .quadrature import QuadratureError
from .samplers import GammaPrior, HyperPriors

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_LEVY_FAMILIES = {
    "gamma-equal-jumps": LevyFamily.GAMMA_EQUAL_JUMPS,
    "invgauss-equal-jumps": LevyFamily.INV_GAUSS_EQUAL_JUMPS,
    "additive-gamma": LevyFamily.ADDITIVE_GAMMA,
}


class ConfigError(ValueError):
    pass


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def parse_levy(section: dict) -> LevySpec:
    _check_keys(section, {"family", "theta", "z"}, "levy")
    fam = section.get("family", "gamma-equal-jumps")
    if fam not in _LEVY_FAMILIES:
        raise ConfigError(f"unknown levy family {fam!r}")
    family = _LEVY_FAMILIES[fam]
    z = section.get("z")
    if family is LevyFamily.ADDITIVE_GAMMA and z is None:
        z = 0.5
    try:
        return LevySpec(family, float(section.get("theta", 1.0)),
                        None if family is not LevyFamily.ADDITIVE_GAMMA else float(z))
    except ValueError as err:
        raise ConfigError(str(err))


def parse_g0(section: dict) -> BaseMeasure:
    _check_keys(section, {"family", "rho0", "mean", "scale", "corr", "nig"}, "g0")
    fam = section.get("family", "bivariate-gaussian")
    if fam == "bivariate-gaussian":
        return BaseMeasure.bivariate_gaussian(
            float(section.get("rho0", 0.0)),
            tuple(section.get("mean", (0.0, 0.0))),
            tuple(section.get("scale", (1.0, 1.0))))
    if fam == "diagonal-degenerate":
        mean = section.get("mean", [0.0])
        scale = section.get("scale", [1.0])
        return BaseMeasure.diagonal_degenerate(np.atleast_1d(mean)[0],
                                               np.atleast_1d(scale)[0])
    if fam == "multivariate-gaussian-corr":
        corr = np.asarray(section["corr"], dtype=float)
        return BaseMeasure.multivariate_gaussian(corr, section.get("mean"),
                                                 section.get("scale"))
    if fam == "missing-data-degenerate":
        corr = np.asarray(section["corr"], dtype=float)
        return BaseMeasure.missing_data_degenerate(corr, section.get("mean"),
                                                   section.get("scale"))
    if fam == "normal-invgamma-pair":
        nig = section.get("nig", {})
        _check_keys(nig, {"lambda1", "lambda2", "alpha1", "beta1", "alpha2", "beta2"},
                    "g0.nig")
        return BaseMeasure.normal_invgamma_pair(
            float(section.get("rho0", 0.0)),
            tuple(section.get("mean", (0.0, 0.0))),
            NIGParams(**{k: float(v) for k, v in nig.items()}))
    raise ConfigError(f"unknown base-measure family {fam!r}")


def parse_priors(section: dict) -> HyperPriors:
    _check_keys(section, {"theta", "rho0", "corr", "z", "kernel_sigma2"}, "hyperpriors")
    out = HyperPriors()
    if "theta" in section:
        spec = section["theta"]
        _check_keys(spec, {"shape", "rate"}, "hyperpriors.theta")
        out.theta = GammaPrior(float(spec.get("shape", 1.0)), float(spec.get("rate", 1.0)))
    if section.get("rho0") == "uniform":
        out.rho0 = "uniform"
    if section.get("corr") == "uniform":
        out.corr = "uniform"
    if section.get("z") == "uniform":
        out.z = "uniform"
    if "kernel_sigma2" in section:
        spec = section["kernel_sigma2"]
        _check_keys(spec, {"shape", "rate"}, "hyperpriors.kernel_sigma2")
        out.kernel_sigma2 = GammaPrior(float(spec.get("shape", 3.0)),
                                       float(spec.get("rate", 3.0)))
    return out


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}")


def default_out_dir() -> str:
    return os.environ.get("FURBI_OUT", "furbi-out")


# ---------------------------------------------------------------------------
# output writers (one writer per file; everything funnels through these)


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_series(path: Path, xs, ys, names=("x", "y")) -> None:
    write_csv(path, list(names), zip(xs, ys))


# ---------------------------------------------------------------------------
# dependence command


def cmd_dependence(args) -> int:
    cfg = load_config(args.config)
    _check_keys(cfg, {"levy", "g0", "hdp", "monte_carlo", "out"}, "config")
    report: dict = {"version": __version__}
    if "hdp" in cfg:
        _check_keys(cfg["hdp"], {"theta", "theta0"}, "hdp")
        b, g = hdp_dependence(float(cfg["hdp"]["theta"]), float(cfg["hdp"]["theta0"]))
        report["hdp"] = {"beta": b, "gamma": g}
    if "levy" in cfg:
        spec = parse_levy(cfg["levy"])
        g0 = parse_g0(cfg.get("g0", {}))
        beta = beta_closed(spec)
        gamma = gamma_closed(spec)
        within, across = corr_observables(spec, g0)
        closed = DependenceReport(beta, gamma, g0.rho0, within, across,
                                  Method.CLOSED_FORM)
        report["closed_form"] = closed.to_dict()
        report["quadrature"] = {"gamma": gamma_numeric(spec)}
        mc_cfg = cfg.get("monte_carlo")
        if mc_cfg:
            _check_keys(mc_cfg, {"n_reps", "seed", "n_atoms"}, "monte_carlo")
            rng = np.random.default_rng(int(mc_cfg.get("seed", 0)))
            n_atoms = int(mc_cfg.get("n_atoms", n_atoms_for_residual(spec.theta)))
            mc = mc_dependence_oracle(spec, g0, n_atoms,
                                      int(mc_cfg.get("n_reps", 10 ** 5)), rng)
            report["monte_carlo"] = mc.to_dict()
    out = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(out + "\n")
    print(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit command


def read_data_csv(path: str) -> Dataset:
    """Header row; one observation per row.

    Layouts: a ``group`` column plus one ``value`` column (multi-sample
    univariate models) or plain numeric columns where empty cells mark
    missing entries (missing-data clustering).
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ConfigError(f"{path}: empty input")
            rows = list(reader)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}")
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    header = [h.strip() for h in header]
    if "group" in header:
        gcol = header.index("group")
        vcols = [i for i in range(len(header)) if i != gcol]
        if len(vcols) != 1:
            raise ConfigError(f"{path}: grouped input needs exactly one value column")
        by_group: dict[str, list[float]] = {}
        order: list[str] = []
        for ln, row in enumerate(rows, start=2):
            try:
                val = float(row[vcols[0]])
            except (ValueError, IndexError):
                raise ConfigError(f"{path}:{ln}: bad value {row!r}")
            g = row[gcol]
            if g not in by_group:
                by_group[g] = []
                order.append(g)
            by_group[g].append(val)
        return Dataset([np.array(by_group[g]) for g in order], order)
    # numeric matrix with blanks as missing entries
    mat = np.full((len(rows), len(header)), np.nan)
    for ln, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}:{ln}: expected {len(header)} cells")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell:
                try:
                    mat[ln - 2, j] = float(cell)
                except ValueError:
                    raise ConfigError(f"{path}:{ln}: bad number {cell!r}")
    if np.isnan(mat).any():
        return missing_pattern_split(mat)
    if mat.shape[1] == 1:
        return Dataset([mat[:, 0]])
    return missing_pattern_split(mat)  # complete rows become a single group


def parse_model_config(cfg: dict, overrides: argparse.Namespace | None = None) -> ModelConfig:
    _check_keys(cfg, {"model", "levy", "g0", "kernel_sigma2", "hyperpriors",
                      "mcmc", "sampler", "truncation", "standardize", "io"}, "config")
    mcmc_sec = dict(cfg.get("mcmc", {}))
    _check_keys(mcmc_sec, {"iters", "burn_in", "thin", "seed", "chains"}, "mcmc")
    if overrides is not None:
        if getattr(overrides, "iters", None) is not None:
            mcmc_sec["iters"] = overrides.iters
        if getattr(overrides, "burn_in", None) is not None:
            mcmc_sec["burn_in"] = overrides.burn_in
        if getattr(overrides, "seed", None) is not None:
            mcmc_sec["seed"] = overrides.seed
    try:
        mcmc = MCMCConfig(int(mcmc_sec.get("iters", 2000)),
                          int(mcmc_sec.get("burn_in", 500)),
                          int(mcmc_sec.get("thin", 1)),
                          int(mcmc_sec.get("seed", 0)),
                          int(mcmc_sec.get("chains", 1)))
        return ModelConfig(
            model=cfg.get("model", "two-sample-gaussian"),
            spec=parse_levy(cfg.get("levy", {})),
            g0=parse_g0(cfg.get("g0", {})),
            kernel_sigma2=float(cfg.get("kernel_sigma2", 1.0)),
            hyperpriors=parse_priors(cfg.get("hyperpriors", {})),
            mcmc=mcmc,
            sampler=cfg.get("sampler", "marginal"),
            truncation=int(cfg.get("truncation", 20)),
            standardize=bool(cfg.get("standardize", False)),
        )
    except ValueError as err:
        raise ConfigError(str(err))


def resolved_config_dict(cfg: ModelConfig) -> dict:
    out = {
        "model": cfg.model,
        "levy": {"family": cfg.spec.family.value, "theta": cfg.spec.theta},
        "kernel_sigma2": cfg.kernel_sigma2,
        "sampler": cfg.sampler,
        "truncation": cfg.truncation,
        "standardize": cfg.standardize,
        "mcmc": {"iters": cfg.mcmc.iters, "burn_in": cfg.mcmc.burn_in,
                 "thin": cfg.mcmc.thin, "seed": cfg.mcmc.seed,
                 "chains": cfg.mcmc.chains},
        "g0": {"family": cfg.g0.family.value,
               "mean": [float(v) for v in cfg.g0.mean],
               "scale": [float(v) for v in cfg.g0.scale]},
        "hyperpriors": {},
    }
    if cfg.spec.z is not None:
        out["levy"]["z"] = cfg.spec.z
    if cfg.g0.corr is not None:
        out["g0"]["corr"] = [[float(v) for v in row] for row in cfg.g0.corr]
    if cfg.g0.nig is not None:
        p = cfg.g0.nig
        out["g0"]["nig"] = {"lambda1": p.lambda1, "lambda2": p.lambda2,
                            "alpha1": p.alpha1, "beta1": p.beta1,
                            "alpha2": p.alpha2, "beta2": p.beta2}
    hp = cfg.hyperpriors
    if hp.theta:
        out["hyperpriors"]["theta"] = {"shape": hp.theta.shape, "rate": hp.theta.rate}
    if hp.rho0:
        out["hyperpriors"]["rho0"] = "uniform"
    if hp.corr:
        out["hyperpriors"]["corr"] = "uniform"
    if hp.z:
        out["hyperpriors"]["z"] = "uniform"
    if hp.kernel_sigma2:
        out["hyperpriors"]["kernel_sigma2"] = {"shape": hp.kernel_sigma2.shape,
                                               "rate": hp.kernel_sigma2.rate}
    return out


def run_fit(cfg: ModelConfig, data: Dataset, out_dir: Path,
            grid: np.ndarray | None = None, track_point_dens: bool = False,
            label: str = "fit") -> dict:
    if cfg.standardize:
        data = standardize(data)
    runner = build(cfg, data, grid=grid, track_point_dens=track_point_dens)
    traces = runner.run()

    write_csv(out_dir / f"{label}-partitions.csv",
              [f"obs{i}" for i in range(traces.partitions.shape[1])],
              traces.partitions)
    hyper_names = sorted(traces.hypers)
    write_csv(out_dir / f"{label}-hyperparameters.csv", hyper_names,
              zip(*[traces.hypers[h] for h in hyper_names]) if hyper_names else [])
    metrics: dict = {"n_clusters_mean": float(np.mean(traces.n_clusters))}
    for name in hyper_names:
        res = ess(traces.hypers[name]) if len(traces.hypers[name]) >= 10 else None
        if res is not None:
            metrics.setdefault("ess_per_stat", {})[name] = res.ess
    if grid is not None:
        for g, vals in traces.densities.items():
            mean = vals.mean(axis=0)
            q05 = np.quantile(vals, 0.05, axis=0)
            q95 = np.quantile(vals, 0.95, axis=0)
            write_csv(out_dir / f"{label}-density-{data.group_names[g]}.csv",
                      ["grid", "mean", "q05", "q95"],
                      zip(grid, mean, q05, q95))
    if track_point_dens:
        al = {}
        for g, pd in traces.point_densities.items():
            al[data.group_names[g]] = {"alcpo": alcpo(pd), "mlcpo": mlcpo(pd)}
        pooled = np.concatenate([traces.point_densities[g] for g in
                                 sorted(traces.point_densities)], axis=1)
        metrics["alcpo"] = alcpo(pooled)
        metrics["mlcpo"] = mlcpo(pooled)
        metrics["per_group_cpo"] = al
    if data.true_labels is not None:
        ri_trace = [rand_index(part, data.true_labels) for part in traces.partitions]
        metrics["rand_index_posterior_mean"] = float(np.mean(ri_trace))
        step = max(1, len(traces.partitions) // 400)
        _, vi_part = vi_point_estimate(traces.partitions[::step])
        metrics["rand_index_vi_estimate"] = rand_index(vi_part, data.true_labels)
    write_json(out_dir / f"{label}-metrics.json", metrics)
    manifest = {"config": resolved_config_dict(cfg), "label": label,
                "groups": {name: int(len(g)) for name, g in
                           zip(data.group_names, data.groups)}}
    if data.shift is not None:
        manifest["standardization"] = {"shift": [float(v) for v in np.atleast_1d(data.shift)],
                                       "scale": [float(v) for v in np.atleast_1d(data.scale_factor)]}
    write_json(out_dir / f"{label}-manifest.json", manifest)
    return metrics


def cmd_fit(args) -> int:
    cfg = parse_model_config(load_config(args.config), args)
    data = read_data_csv(args.data)
    out_dir = Path(args.out or default_out_dir())
    grid = None
    if cfg.model in ("two-sample-gaussian", "two-sample-nig", "exchangeable",
                     "independent", "multi-group-gaussian"):
        lo = min(float(g.min()) for g in data.groups) - 3.0
        hi = max(float(g.max()) for g in data.groups) + 3.0
        grid = np.linspace(lo, hi, 200)
    metrics = run_fit(cfg, data, out_dir, grid=grid,
                      track_point_dens=cfg.model in ("two-sample-nig",))
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce command (desk-scale experiment bundles)

EXPERIMENTS = ("sim-density", "sim-threegroup", "finance-synthetic",
               "missing-clustering")


def _try_plots(out_dir: Path, series: dict) -> None:
    """Simple vector renderings of the exported series (best effort)."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    for name, (xs, ys_by_label) in series.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        for lab, ys in ys_by_label.items():
            ax.plot(xs, ys, marker="o", markersize=3, label=lab)
        ax.set_xlabel(name.split("@")[-1])
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out_dir / f"{name.split('@')[0]}.svg")
        plt.close(fig)


def reproduce_sim_density(out_dir: Path, seed: int, iters: int, burn_in: int,
                          replicates: int, v_means) -> dict:
    """Density-estimation study: three borrowing modes over a mean sweep."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(4.0, 16.0, 161)
    truth = np.exp(-0.5 * (grid - 10.0) ** 2) / math.sqrt(2 * math.pi)
    table = {}
    for v_mean in v_means:
        rows = {"furbi": [], "independent": [], "exchangeable": []}
        for rep in range(replicates):
            data = gen_two_group(v_mean, rng=rng)
            for model in rows:
                cfg = ModelConfig(
                    model="two-sample-gaussian" if model == "furbi" else model,
                    spec=LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, 1.0),
                    g0=BaseMeasure.bivariate_gaussian(0.0),
                    hyperpriors=HyperPriors(rho0="uniform") if model == "furbi"
                    else HyperPriors(),
                    mcmc=MCMCConfig(iters, burn_in, 1, int(rng.integers(2 ** 31))),
                    sampler="blocked", truncation=20)
                runner = build(cfg, data, grid=grid)
                traces = runner.run()
                est = traces.densities[0].mean(axis=0)
                rows[model].append(miae(grid, est, truth))
        table[v_mean] = {m: float(np.median(v)) for m, v in rows.items()}
    write_csv(out_dir / "sim-density-miae.csv",
              ["v_mean", "exchangeable", "independent", "furbi"],
              [[vm, r["exchangeable"], r["independent"], r["furbi"]]
               for vm, r in table.items()])
    for model in ("exchangeable", "independent", "furbi"):
        write_series(out_dir / f"sim-density-miae-{model}.csv",
                     list(table), [table[vm][model] for vm in table],
                     names=("v_mean", "miae"))
    _try_plots(out_dir, {"sim-density-miae@v_mean":
                         (list(table),
                          {m: [table[vm][m] for vm in table]
                           for m in ("exchangeable", "independent", "furbi")})})
    return {"miae": {str(k): v for k, v in table.items()}}


def reproduce_sim_threegroup(out_dir: Path, seed: int, iters: int, burn_in: int,
                             x_values, replicates: int = 3) -> dict:
    """Three-group correlation recovery: posterior medians of the pairwise
    atom correlations as the third group's mean moves."""
    rng = np.random.default_rng(seed)
    medians = {"rho12": [], "rho13": [], "rho23": []}
    for x in x_values:
        acc = {k: [] for k in medians}
        for rep in range(replicates):
            data = gen_three_group(float(x), rng=rng)
            cfg = ModelConfig(
                model="multi-group-gaussian",
                spec=LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, 1.0),
                g0=BaseMeasure.multivariate_gaussian(np.eye(3)),
                hyperpriors=HyperPriors(corr="uniform"),
                mcmc=MCMCConfig(iters, burn_in, 1, int(rng.integers(2 ** 31))),
                sampler="blocked", truncation=20)
            traces = build(cfg, data).run()
            for key in acc:
                acc[key].append(float(np.median(traces.hypers[key])))
        for key in medians:
            medians[key].append(float(np.median(acc[key])))
    write_csv(out_dir / "sim-threegroup-correlations.csv",
              ["x", "rho12", "rho13", "rho23"],
              zip(x_values, medians["rho12"], medians["rho13"], medians["rho23"]))
    for key, vals in medians.items():
        write_series(out_dir / f"sim-threegroup-{key}.csv", x_values, vals,
                     names=("x", key))
    _try_plots(out_dir, {"sim-threegroup@x": (list(x_values), medians)})
    return {"x": list(map(float, x_values)), **medians}


def reproduce_finance(out_dir: Path, seed: int, iters: int, burn_in: int) -> dict:
    """Location-scale mixture comparison on the bundled synthetic returns."""
    rng = np.random.default_rng(seed)
    data = gen_finance_synthetic(rng)
    results = {}
    for model, label in (("two-sample-nig", "furbi-free-rho"),
                         ("exchangeable", "exchangeable"),
                         ("independent", "independent")):
        cfg = ModelConfig(
            model=model,
            spec=LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, 0.5),
            g0=BaseMeasure.normal_invgamma_pair(0.0, nig=NIGParams()),
            hyperpriors=HyperPriors(theta=GammaPrior(1.0, 1.0), rho0="uniform",
                                    z="uniform") if model == "two-sample-nig"
            else HyperPriors(theta=GammaPrior(1.0, 1.0)),
            mcmc=MCMCConfig(iters, burn_in, 1, seed),
            standardize=True)
        metrics = run_fit(cfg, data, out_dir, grid=np.linspace(-4, 4, 161),
                          track_point_dens=True, label=f"finance-{label}")
        results[label] = {"alcpo": metrics["alcpo"], "mlcpo": metrics["mlcpo"]}
    write_csv(out_dir / "finance-cpo-table.csv",
              ["model", "alcpo", "mlcpo"],
              [[lab, v["alcpo"], v["mlcpo"]] for lab, v in results.items()])
    return results


def reproduce_missing(out_dir: Path, seed: int, iters: int, burn_in: int,
                      n: int = 300, mechanism: str = "MCAR",
                      missing_rate: float = 0.16, z: float = 0.2) -> dict:
    """Missing-entry clustering on the bundled generator."""
    rng = np.random.default_rng(seed)
    data = gen_missing_dataset(n, mechanism, missing_rate, rng=rng)
    cfg = ModelConfig(
        model="missing-data-clustering",
        spec=LevySpec(LevyFamily.ADDITIVE_GAMMA, 0.1, z),
        g0=BaseMeasure.missing_data_degenerate(np.eye(3)),
        hyperpriors=HyperPriors(corr="uniform",
                                kernel_sigma2=GammaPrior(3.0, 3.0)),
        mcmc=MCMCConfig(iters, burn_in, max(1, (iters - burn_in) // 1000), seed))
    metrics = run_fit(cfg, data, out_dir, label=f"missing-{mechanism.lower()}")
    return {"mechanism": mechanism, "n": n,
            "rand_index_vi": metrics.get("rand_index_vi_estimate"),
            "rand_index_posterior_mean": metrics.get("rand_index_posterior_mean"),
            "n_clusters_mean": metrics["n_clusters_mean"]}


def cmd_reproduce(args) -> int:
    name = args.name
    if name not in EXPERIMENTS:
        print(f"unknown experiment {name!r}; available: {', '.join(EXPERIMENTS)}",
              file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out or default_out_dir()) / name
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    scale_note = {"scale": "desk", "seed": seed}
    if name == "sim-density":
        iters = args.iters or 2000
        burn = args.burn_in if args.burn_in is not None else iters // 4
        result = reproduce_sim_density(out_dir, seed, iters, burn,
                                       replicates=5,
                                       v_means=(-16.0, -10.0, 0.0, 10.0, 16.0))
        scale_note["note"] = "reduced replicate count and iterations"
    elif name == "sim-threegroup":
        iters = args.iters or 1500
        burn = args.burn_in if args.burn_in is not None else iters // 3
        result = reproduce_sim_threegroup(out_dir, seed, iters, burn,
                                          x_values=(-10.0, -5.0, 0.0, 5.0, 10.0))
        scale_note["note"] = "coarse x-grid, reduced iterations"
    elif name == "finance-synthetic":
        iters = args.iters or 3000
        burn = args.burn_in if args.burn_in is not None else iters // 3
        result = reproduce_finance(out_dir, seed, iters, burn)
        scale_note["note"] = "synthetic analogue of the paired return panels"
    else:
        iters = args.iters or 5000
        burn = args.burn_in if args.burn_in is not None else iters // 2
        result = reproduce_missing(out_dir, seed, iters, burn)
        scale_note["note"] = "n = 300 with a single scenario"
    write_json(out_dir / "result.json", {"experiment": name, "result": result,
                                         "scale": scale_note})
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="furbi",
        description="Dependent nonparametric mixtures with full-range "
                    "borrowing of information")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_dep = sub.add_parser("dependence", help="closed-form/quadrature/MC dependence report")
    p_dep.add_argument("--config", required=True)
    p_dep.add_argument("--out")
    p_dep.set_defaults(func=cmd_dependence)

    p_fit = sub.add_parser("fit", help="fit a model to a CSV dataset")
    p_fit.add_argument("data")
    p_fit.add_argument("--config", required=True)
    p_fit.add_argument("--seed", type=int)
    p_fit.add_argument("--iters", type=int)
    p_fit.add_argument("--burn-in", dest="burn_in", type=int)
    p_fit.add_argument("--threads", type=int, default=1)
    p_fit.add_argument("--out")
    p_fit.set_defaults(func=cmd_fit)

    p_rep = sub.add_parser("reproduce", help="run a named desk-scale experiment")
    p_rep.add_argument("name")
    p_rep.add_argument("--seed", type=int)
    p_rep.add_argument("--iters", type=int)
    p_rep.add_argument("--burn-in", dest="burn_in", type=int)
    p_rep.add_argument("--threads", type=int, default=1)
    p_rep.add_argument("--out")
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except QuadratureError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
