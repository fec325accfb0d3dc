"""Command-line entry point.

Four subcommands, each driven by a JSON config (see ``config``) plus an
output directory: ``simulate`` writes trajectory files, ``certify`` writes
an estimate with every applicable certificate, ``coverage`` persists a
Monte Carlo coverage experiment, and ``figure`` renders the three-panel
bound chart.  Every command is a deterministic function of its config: the
seed is mandatory and reruns produce byte-identical outputs.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import certs, montecarlo, rng, theory
from .bootstrap import bootstrap_eps
from .config import ScenarioConfig, load_config
from .errors import ConfigError, FsidError
from .estimators import ols_batch, ols_scalar_lastpoint, ols_single_traj
from .serialize import dump_json, fmt17
from .systems import (
    batch_to_json,
    save_batch_csv,
    save_single_csv,
    simulate_batch,
    simulate_single,
    single_to_json,
)


def _require_section(cfg: ScenarioConfig, name: str):
    section = getattr(cfg, name)
    if section is None:
        raise ConfigError(f"this command requires the '{name}' config section")
    return section


def _simulate_from_config(cfg: ScenarioConfig):
    spec = _require_section(cfg, "simulate")
    if spec.kind == "batch":
        return simulate_batch(cfg.system, spec.n_experiments, spec.horizon, cfg.seed)
    return simulate_single(cfg.system, spec.horizon, autonomous=spec.autonomous, seed=cfg.seed)


def cmd_simulate(cfg: ScenarioConfig, out: Path) -> None:
    data = _simulate_from_config(cfg)
    if cfg.simulate.kind == "batch":
        save_batch_csv(data, out / "trajectories.csv")
        dump_json(batch_to_json(data, cfg.system), out / "trajectories.json")
    else:
        save_single_csv(data, out / "trajectories.csv")
        dump_json(single_to_json(data, cfg.system), out / "trajectories.json")
    print(f"wrote {out / 'trajectories.csv'} and {out / 'trajectories.json'}")


def _alphas(cfg: ScenarioConfig) -> list[float]:
    raw = cfg.raw.get("alpha", cfg.alpha)
    return [float(a) for a in raw] if isinstance(raw, list) else [cfg.alpha]


def _certificates_for_batch(cfg: ScenarioConfig, batch, est) -> list[dict]:
    sys_ = cfg.system
    records = []
    for name in cfg.bounds:
        try:
            if name == "scalar_theorem":
                if sys_.n_x != 1:
                    raise ConfigError("scalar_theorem applies to scalar systems only")
                sigma_x = math.sqrt(montecarlo.covariate_covariance(sys_, batch.horizon)[0, 0])
                cert = theory.scalar_error_bound(
                    sys_.sigma_w, sigma_x, batch.n_experiments, cfg.delta
                )
                records.append(cert.to_json_dict())
            elif name in ("matrix_theorem", "matrix_theorem_A", "matrix_theorem_B"):
                lam_min = float(
                    np.linalg.eigvalsh(montecarlo.covariate_covariance(sys_, batch.horizon))[0]
                )
                cert_a, cert_b = theory.matrix_error_bounds(
                    lam_min,
                    sys_.sigma_w,
                    sys_.sigma_u,
                    sys_.n_x,
                    sys_.n_u,
                    batch.n_experiments,
                    cfg.delta,
                )
                if name != "matrix_theorem_B":
                    records.append(cert_a.to_json_dict())
                if name != "matrix_theorem_A":
                    records.append(cert_b.to_json_dict())
            elif name in ("ellipsoid", "ellipsoid_containment", "ellipsoid_block_A", "ellipsoid_block_B"):
                z, _ = batch.last_transition()
                cert = certs.confidence_ellipsoid(z, sys_.n_x, sys_.sigma_w, cfg.delta)
                eps_a, eps_b = certs.block_spectral_bounds(cert)
                payload = cert.to_json_dict()
                payload["source"] = "confidence_ellipsoid"
                payload["eps_a"] = eps_a
                payload["eps_b"] = eps_b
                records.append(payload)
            else:
                raise ConfigError(f"bound '{name}' does not apply to batch data")
        except FsidError as exc:
            records.append({"source": name, "error": type(exc).__name__, "message": str(exc)})
    return records


def _certificates_for_single(cfg: ScenarioConfig, traj, est, mode: str) -> list[dict]:
    sys_ = cfg.system
    records = []
    z, _ = traj.regressors(mode)
    for name in cfg.bounds:
        try:
            if name == "single_traj":
                for alpha in _alphas(cfg):
                    cert = certs.single_traj_cert(
                        z, est.b_hat, sys_.sigma_u, sys_.sigma_w, alpha, cfg.delta
                    )
                    records.append(cert.to_json_dict())
            elif name == "snm":
                v_t = z.T @ z
                v = np.eye(z.shape[1])
                state = certs.SnmState(v=v, v_t=v_t, r2=sys_.sigma_w**2)
                radius2 = certs.snm_radius(state, cfg.delta)
                records.append(
                    {
                        "source": "self_normalized_radius_sq",
                        "value": radius2,
                        "delta": cfg.delta,
                        "precondition_ok": True,
                        "details": {"regularizer": "identity"},
                    }
                )
            else:
                raise ConfigError(f"bound '{name}' does not apply to single-trajectory data")
        except FsidError as exc:
            records.append({"source": name, "error": type(exc).__name__, "message": str(exc)})
    return records


def cmd_certify(cfg: ScenarioConfig, out: Path) -> None:
    est_spec = _require_section(cfg, "estimator")
    data = _simulate_from_config(cfg)
    bundle: dict = {"config": cfg.raw}

    if est_spec.kind == "scalar_lastpoint":
        if cfg.simulate.kind != "batch":
            raise ConfigError("estimator 'scalar_lastpoint' requires batch data")
        scalar_est = ols_scalar_lastpoint(data)
        bundle["estimate"] = {"a_hat": scalar_est.a_hat, "gram": scalar_est.gram}
        bundle["certificates"] = _certificates_for_batch(cfg, data, scalar_est)
    elif est_spec.kind == "batch":
        if cfg.simulate.kind != "batch":
            raise ConfigError("estimator 'batch' requires batch data")
        est = ols_batch(data, pooled=est_spec.pooled)
        bundle["estimate"] = est.to_json_dict()
        bundle["certificates"] = _certificates_for_batch(cfg, data, est)
    else:
        if cfg.simulate.kind != "single":
            raise ConfigError("estimator 'single' requires single-trajectory data")
        mode = "autonomous" if cfg.simulate.autonomous else est_spec.mode
        est = ols_single_traj(data, mode=mode)
        bundle["estimate"] = est.to_json_dict()
        bundle["certificates"] = _certificates_for_single(cfg, data, est, mode)

    if cfg.bootstrap_enabled:
        if cfg.simulate.kind != "batch":
            raise ConfigError("bootstrap requires batch data")
        pooled_est = ols_batch(data, pooled=True)
        result = bootstrap_eps(
            data,
            pooled_est.a_hat,
            pooled_est.b_hat,
            cfg.system.sigma_w,
            cfg.system.sigma_u,
            trials=cfg.bootstrap_trials,
            delta=cfg.delta,
            seed=rng.derive_seed(cfg.seed, "bootstrap"),
            threads=cfg.threads,
        )
        bundle["bootstrap"] = result.to_json_dict()
        result.to_csv(out / "bootstrap.csv")

    dump_json(bundle, out / "certify.json")
    print(f"wrote {out / 'certify.json'}")


def _build_scenario(cfg: ScenarioConfig) -> montecarlo.CoverageScenario:
    cov = cfg.coverage
    sys_ = cfg.system
    name = cov.bound
    if name == "scalar_theorem":
        if sys_.n_x != 1:
            raise ConfigError("coverage.bound 'scalar_theorem' requires a scalar system")
        scenario = montecarlo.scalar_theorem_scenario(sys_, cov.horizon, cfg.delta)
    elif name in ("matrix_theorem", "matrix_theorem_A"):
        scenario = montecarlo.matrix_theorem_scenario(sys_, cov.horizon, cfg.delta, block="A")
    elif name == "matrix_theorem_B":
        scenario = montecarlo.matrix_theorem_scenario(sys_, cov.horizon, cfg.delta, block="B")
    elif name in ("ellipsoid", "ellipsoid_containment"):
        scenario = montecarlo.ellipsoid_containment_scenario(sys_, cov.horizon, cfg.delta)
    elif name == "ellipsoid_block_A":
        scenario = montecarlo.ellipsoid_block_scenario(sys_, cov.horizon, cfg.delta, block="A")
    elif name == "ellipsoid_block_B":
        scenario = montecarlo.ellipsoid_block_scenario(sys_, cov.horizon, cfg.delta, block="B")
    elif name == "single_traj":
        scenario = montecarlo.single_traj_scenario(sys_, cfg.alpha, cfg.delta)
    elif name == "snm":
        if sys_.n_x != 1:
            raise ConfigError("coverage.bound 'snm' requires a scalar system")
        scenario = montecarlo.snm_scenario(float(sys_.a[0, 0]), sys_.sigma_w, 1.0, cfg.delta)
    elif name in ("bootstrap_A", "bootstrap_B"):
        horizon = None if cov.horizon == 0 else cov.horizon
        scenario = montecarlo.bootstrap_scenario(
            sys_, cfg.delta, cfg.bootstrap_trials, horizon=horizon, block=name[-1]
        )
    else:
        raise ConfigError(f"unknown coverage bound '{name}'")
    if scenario.grid_axis != cov.grid_axis:
        raise ConfigError(
            f"coverage.grid_axis must be '{scenario.grid_axis}' for bound '{name}'"
        )
    return scenario


def _write_coverage_csvs(reports, out: Path) -> None:
    with open(out / "coverage_detail.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid_value", "replicate", "error", "bound", "covered"])
        for rep in reports:
            for rec in rep.per_replicate:
                writer.writerow(
                    [
                        str(rep.grid_value),
                        str(rec.replicate),
                        fmt17(rec.error),
                        fmt17(rec.bound),
                        str(int(rec.covered)),
                    ]
                )
    with open(out / "coverage_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "grid_value",
                "replicates",
                "coverage",
                "failures",
                "error_median",
                "error_q1",
                "error_q3",
                "bound_median",
                "bound_q1",
                "bound_q3",
                "slope",
            ]
        )
        for rep in reports:
            med, q1, q3 = rep.error_quantiles
            bmed, bq1, bq3 = rep.bound_quantiles
            writer.writerow(
                [
                    str(rep.grid_value),
                    str(rep.replicates),
                    fmt17(rep.coverage),
                    str(rep.failures),
                    fmt17(med),
                    fmt17(q1),
                    fmt17(q3),
                    fmt17(bmed),
                    fmt17(bq1),
                    fmt17(bq3),
                    "" if rep.slope is None else fmt17(rep.slope),
                ]
            )


def cmd_coverage(cfg: ScenarioConfig, out: Path) -> None:
    cov = _require_section(cfg, "coverage")
    scenario = _build_scenario(cfg)
    reports = montecarlo.coverage_experiment(
        scenario, cov.grid, cov.replicates, cfg.seed, threads=cfg.threads
    )
    _write_coverage_csvs(reports, out)
    dump_json(
        {"config": cfg.raw, "scenario": scenario.scenario_id, "reports": [r.to_json_dict() for r in reports]},
        out / "coverage_summary.json",
    )
    for rep in reports:
        print(
            f"{scenario.scenario_id} {scenario.grid_axis}={rep.grid_value}: "
            f"coverage={rep.coverage:.3f} (target >= {1 - rep.delta:.3f})"
        )


# ---------------------------------------------------------------------------
# figure command
# ---------------------------------------------------------------------------

_SERIES_STATS = ("median", "q1", "q3")


def _quartile_rows(grid, series: dict[str, np.ndarray]) -> list[list[str]]:
    """Rows of grid value + median/q1/q3 per series, nan-aware over runs."""
    rows = []
    for i, g in enumerate(grid):
        row = [str(g)]
        for values in series.values():
            col = values[:, i]
            ok = col[np.isfinite(col)]
            if ok.size:
                med, q1, q3 = np.percentile(ok, [50.0, 25.0, 75.0])
            else:
                med = q1 = q3 = math.nan
            row += [fmt17(med), fmt17(q1), fmt17(q3)]
        rows.append(row)
    return rows


def _write_panel(out: Path, stem: str, xlabel: str, grid, series: dict[str, np.ndarray]) -> None:
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "fsid"
    header = ["grid_value"] + [f"{name}_{stat}" for name in series for stat in _SERIES_STATS]
    rows = _quartile_rows(grid, series)
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)

    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    x = np.asarray(grid, dtype=float)
    for j, name in enumerate(series):
        med = np.array([float(r[1 + 3 * j]) for r in rows])
        q1 = np.array([float(r[2 + 3 * j]) for r in rows])
        q3 = np.array([float(r[3 + 3 * j]) for r in rows])
        (line,) = ax.plot(x, med, marker="o", label=name)
        ax.fill_between(x, q1, q3, alpha=0.25, color=line.get_color())
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("spectral norm")
    ax.legend()
    ax.set_title(stem.replace("_", " "))
    fig.tight_layout()
    fig.savefig(out / f"{stem}.svg", format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_figure(cfg: ScenarioConfig, out: Path) -> None:
    fig_spec = _require_section(cfg, "figure")
    sys_ = cfg.system
    runs = fig_spec.runs
    from .estimators import spectral_norm

    # panel 1: single-trajectory certificate vs horizon
    horizons = fig_spec.single_traj_horizons
    bound = np.full((runs, len(horizons)), math.nan)
    err = np.full((runs, len(horizons)), math.nan)
    for r in range(runs):
        for i, horizon in enumerate(horizons):
            seed = rng.derive_seed(cfg.seed, "figure-single-traj", r, horizon)
            traj = simulate_single(sys_, horizon, autonomous=False, seed=seed)
            est = ols_single_traj(traj, mode="controlled", truth=sys_)
            z, _ = traj.regressors("controlled")
            try:
                cert = certs.single_traj_cert(
                    z, est.b_hat, sys_.sigma_u, sys_.sigma_w, cfg.alpha, cfg.delta
                )
            except FsidError:
                continue
            bound[r, i] = cert.value
            err[r, i] = spectral_norm(est.theta_hat - sys_.theta)
    _write_panel(out, "single_traj_bound", "horizon T", horizons, {"bound": bound, "error": err})

    # panel 2: ellipsoid corollary bounds vs sample count
    sizes = fig_spec.batch_sizes
    eps_a = np.full((runs, len(sizes)), math.nan)
    eps_b = np.full((runs, len(sizes)), math.nan)
    err_a = np.full((runs, len(sizes)), math.nan)
    err_b = np.full((runs, len(sizes)), math.nan)
    for r in range(runs):
        for i, n in enumerate(sizes):
            seed = rng.derive_seed(cfg.seed, "figure-ellipsoid", r, n)
            batch = simulate_batch(sys_, n, fig_spec.batch_horizon, seed)
            est = ols_batch(batch, truth=sys_)
            z, _ = batch.last_transition()
            cert = certs.confidence_ellipsoid(z, sys_.n_x, sys_.sigma_w, cfg.delta)
            eps_a[r, i], eps_b[r, i] = certs.block_spectral_bounds(cert)
            err_a[r, i], err_b[r, i] = est.err_a, est.err_b
    _write_panel(
        out,
        "ellipsoid_bounds",
        "experiments N",
        sizes,
        {"eps_a": eps_a, "eps_b": eps_b, "err_a": err_a, "err_b": err_b},
    )

    # panel 3: bootstrap estimates vs sample count, data horizon T = N
    sizes = fig_spec.bootstrap_sizes
    eps_a = np.full((runs, len(sizes)), math.nan)
    eps_b = np.full((runs, len(sizes)), math.nan)
    err_a = np.full((runs, len(sizes)), math.nan)
    err_b = np.full((runs, len(sizes)), math.nan)
    for r in range(runs):
        for i, n in enumerate(sizes):
            seed = rng.derive_seed(cfg.seed, "figure-bootstrap", r, n)
            batch = simulate_batch(sys_, n, n, seed)
            est = ols_batch(batch, truth=sys_, pooled=True)
            result = bootstrap_eps(
                batch,
                est.a_hat,
                est.b_hat,
                sys_.sigma_w,
                sys_.sigma_u,
                trials=fig_spec.bootstrap_trials,
                delta=cfg.delta,
                seed=rng.derive_seed(seed, "bootstrap-trials"),
                threads=cfg.threads,
            )
            eps_a[r, i], eps_b[r, i] = result.eps_a, result.eps_b
            err_a[r, i], err_b[r, i] = est.err_a, est.err_b
    _write_panel(
        out,
        "bootstrap_bounds",
        "experiments N (horizon T = N)",
        sizes,
        {"eps_a": eps_a, "eps_b": eps_b, "err_a": err_a, "err_b": err_b},
    )
    print(f"wrote 3 panels (svg + csv) under {out}")


_COMMANDS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "coverage": cmd_coverage,
    "figure": cmd_figure,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fsid",
        description="Finite-sample LTI identification: simulate, certify, validate coverage, plot.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the JSON scenario config")
        cmd.add_argument("--out", required=True, help="output directory (created if missing)")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, out)
    except (ConfigError, FsidError) as exc:
        print(f"error [{args.command}]: {exc}", file=_sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [{args.command}] io: {exc}", file=_sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
