"""Command-line front end.

    delaystab <analyze|design|simulate|sweep|report> --config <file>
              [--out <dir>] [--reuse] [--jobs N]

Verbosity comes from the environment variable DELAYSTAB_LOG
(quiet | info | debug). Errors exit with a class-coded status:
config = 2, spectral = 3, design = 4, simulate = 5; the class name is
printed machine-readably as ``error[<class>]: message``.
"""

import argparse
import dataclasses
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import report as rep
from . import svg
from .config import ScenarioConfig, parse_config_file
from .errors import (
    ConfigError,
    DelaystabError,
    GainDesignError,
    KernelSolveError,
    ModelBuildError,
    SimulationError,
    SpectralSplitError,
)
from .gain import design_gain
from .kernel import dump_kernel, load_kernel, solve_kernel
from .loop import fit_decay, simulate_linear, simulate_semilinear
from .models import SEMILINEAR_1D
from .spectral import compute_split, hautus_check

log = logging.getLogger("delaystab.cli")

_ERROR_CLASSES = (
    ((ConfigError, ModelBuildError), "config", 2),
    ((SpectralSplitError,), "spectral", 3),
    ((GainDesignError, KernelSolveError), "design", 4),
    ((SimulationError,), "simulate", 5),
)


def _setup_logging() -> None:
    level = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("DELAYSTAB_LOG", "").lower(), logging.WARNING
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _classify(exc: Exception):
    for types, name, code in _ERROR_CLASSES:
        if isinstance(exc, types):
            return name, code
    return "config", 2


def run_analyze(cfg: ScenarioConfig, out: Path):
    model = cfg.build_model()
    split = compute_split(model, cfg.sigma, cfg.cluster_tol)
    haut = hautus_check(split, model, cfg.svd_tol, max(cfg.tau, 1.0))
    rep.write_eigenvalues_csv(out / "eigenvalues.csv", split)
    rep.write_hautus_csv(out / "hautus.csv", haut)
    rep.write_matrix_csv(out / "generator.csv", model.generator)
    rep.write_matrix_csv(out / "input_map.csv", model.input_map)
    text = rep.analyze_text(split, haut)
    (out / "analyze.txt").write_text(text, encoding="utf-8")
    log.info("analyze: %d unstable modes, directions=%d",
             split.unstable_dim, split.n_directions)
    return model, split, haut


def run_design(cfg: ScenarioConfig, out: Path, reuse: bool = False):
    model, split, haut = run_analyze(cfg, out)
    if not haut.overall_pass:
        raise GainDesignError(
            "stabilizability test failed; an unstable mode is invisible to the input"
        )
    design = design_gain(split, cfg.tau, cfg.sigma_star, static_ok=cfg.static_feedback)
    kernel = None
    kpath = out / "kernel.bin"
    if reuse and kpath.exists():
        cand = load_kernel(kpath, design)
        if (
            cand.block_dim == split.unstable_dim
            and abs(cand.step - cfg.dt) < 1e-12
            and abs(cand.tau - cfg.tau) < 1e-12
            and cand.horizon >= cfg.horizon - 1e-12
        ):
            kernel = cand
            log.info("design: reusing kernel dump %s", kpath)
    if kernel is None:
        kernel = solve_kernel(design, cfg.horizon, cfg.dt, cfg.kernel_tol)
        dump_kernel(kernel, kpath)
    rep.write_design_outputs(out, design, kernel)
    return model, split, design, kernel


def run_simulate(cfg: ScenarioConfig, out: Path, reuse: bool = False):
    model, split, design, kernel = run_design(cfg, out, reuse)
    z0 = cfg.build_initial_state(model)
    if model.kind == SEMILINEAR_1D:
        traj = simulate_semilinear(model, split, design, kernel, z0, cfg.horizon, cfg.dt)
    else:
        forcing = cfg.build_forcing(model)
        traj = simulate_linear(
            model, split, design, kernel, z0, forcing, cfg.horizon, cfg.dt
        )
    cert = fit_decay(traj, cfg.window)
    rep.write_run_csv(out / "run.csv", traj)
    rep.write_certificate(out / "certificate.csv", cert)
    (out / "certificate.txt").write_text(rep.certificate_text(cert), encoding="utf-8")
    log.info("simulate: fitted rate %.4f (target %.4f)", cert.fitted_rate, cfg.sigma)
    return model, split, design, kernel, traj, cert


def run_report(cfg: ScenarioConfig, out: Path, reuse: bool = True):
    run = rep.read_run_csv(out / "run.csv")
    cert = rep.read_certificate(out / "certificate.csv")
    model, split, haut = run_analyze(cfg, out)

    lines = [
        "scenario report",
        f"  model kind              : {cfg.kind}",
        f"  state dimension         : {model.state_dim}",
        f"  unstable dimension      : {split.unstable_dim}",
        f"  fitted decay rate       : {rep.fmt(cert['fitted_rate'])}",
        f"  target sigma            : {rep.fmt(cfg.sigma)}",
        f"  constant witness        : {rep.fmt(cert['constant_witness'])}",
        f"  max transform residual  : {rep.fmt(float(np.max(run['r1'])))}"
        f" / {rep.fmt(float(np.max(run['r2'])))}",
        f"  certificate             : {'PASS' if cert['passed'] == 'true' else 'FAIL'}",
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if cfg.plot:
        t = run["t"]
        with np.errstate(divide="ignore"):
            logn = np.log10(np.maximum(run["norm_z"], 1e-300))
        ref_slope = -cfg.sigma / np.log(10.0)
        ref_icept = logn[0] - ref_slope * t[0]
        svg.line_plot(
            out / "norm_decay.svg",
            [(t, logn, "#1f4e9c", "log10 ||z||")],
            title="closed-loop decay",
            xlabel="t", ylabel="log10 ||z||",
            ref_lines=[(ref_slope, ref_icept, "#c0392b", "target rate")],
        )
        eig = [e.value for e in split.eigenvalues]
        svg.scatter_plot(
            out / "spectrum.svg",
            [v.real for v in eig], [v.imag for v in eig],
            title="generator spectrum",
            xlabel="Re", ylabel="Im",
            vlines=[(-cfg.sigma, "#c0392b", "splitting line")],
        )
        kpath = out / "kernel.bin"
        if kpath.exists():
            kern = load_kernel(kpath)
        else:
            _, _, design, kern = run_design(cfg, out, reuse)
        field = np.linalg.norm(kern.samples, axis=(2, 3)) if kern.block_dim else np.zeros((1, 1))
        sgn = np.sign(np.trace(kern.samples, axis1=2, axis2=3)) if kern.block_dim else 1.0
        svg.heatmap(
            out / "kernel_heatmap.svg",
            sgn * field,
            title="memory kernel (signed magnitude)",
            xlabel="s index", ylabel="t index",
        )
    log.info("report written to %s", out)


_SWEEP_ATTRS = {
    ("model", "nu"): "nu",
    ("model", "b"): "b",
    ("model", "c"): "c",
    ("model", "l"): "length",
    ("model", "n"): "n",
    ("model", "lambda0"): "lambda0",
    ("design", "sigma"): "sigma",
    ("design", "tau"): "tau",
    ("design", "sigma_star"): "sigma_star",
    ("simulation", "t"): "horizon",
    ("simulation", "dt"): "dt",
}


def _apply_overrides(cfg: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    updates = {}
    for (sec, key), val in overrides.items():
        attr = _SWEEP_ATTRS.get((sec, key))
        if attr is None:
            raise ConfigError(f"[sweep] cannot vary {sec}.{key}")
        updates[attr] = int(val) if attr == "n" else val
    cfg = dataclasses.replace(cfg, **updates)
    problems = []
    if cfg.tau > 0 and abs(cfg.tau / cfg.dt - round(cfg.tau / cfg.dt)) > 1e-9:
        problems.append(f"dt must divide tau (tau={cfg.tau}, dt={cfg.dt})")
    if abs(cfg.horizon / cfg.dt - round(cfg.horizon / cfg.dt)) > 1e-9:
        problems.append("dt must divide T")
    if cfg.horizon < 2 * cfg.tau:
        problems.append("T must be at least 2 * tau")
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def _sweep_worker(args):
    config_path, overrides, out_root, idx = args
    cfg = _apply_overrides(parse_config_file(config_path), overrides)
    out = Path(out_root) / f"case_{idx:03d}"
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    *_, traj, cert = run_simulate(cfg, out)
    wall = time.perf_counter() - start
    row = {f"{sec}.{key}": val for (sec, key), val in overrides.items()}
    row.update(
        fitted_rate=cert.fitted_rate,
        constant_witness=cert.constant_witness,
        max_r1=float(np.max(traj.residual_transformed_ode)),
        max_r2=float(np.max(traj.residual_lookahead)),
        wall_s=wall,
        passed=cert.passed,
    )
    return idx, row


def run_sweep(cfg: ScenarioConfig, out: Path, config_path: str, jobs: int):
    if not cfg.sweep:
        raise ConfigError("sweep needs a [sweep] section with vary.* keys")
    keys = sorted(cfg.sweep.keys())
    grids = [cfg.sweep[k] for k in keys]
    combos = [[]]
    for axis in grids:
        combos = [c + [v] for c in combos for v in axis]
    tasks = [
        (config_path, dict(zip(keys, combo)), str(out), idx)
        for idx, combo in enumerate(combos)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    else:
        results = [_sweep_worker(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    header = ["case"] + [f"{s}.{k}" for s, k in keys] + [
        "fitted_rate", "constant_witness", "max_r1", "max_r2", "wall_s", "passed",
    ]
    rows = []
    for idx, row in results:
        rows.append([idx] + [row[f"{s}.{k}"] for s, k in keys] + [
            row["fitted_rate"], row["constant_witness"], row["max_r1"],
            row["max_r2"], row["wall_s"], row["passed"],
        ])
    rep.write_rows_csv(out / "sweep_summary.csv", header, rows)
    log.info("sweep: %d cases", len(rows))


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="delaystab",
        description="delayed feedback stabilization of parabolic systems",
    )
    parser.add_argument(
        "subcommand", choices=["analyze", "design", "simulate", "sweep", "report"]
    )
    parser.add_argument("--config", required=True, help="scenario file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--reuse", action="store_true",
                        help="reuse a compatible kernel dump if present")
    parser.add_argument("--jobs", type=int, default=1, help="sweep worker count")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config_file(args.config)
        out = Path(args.out) if args.out else Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.subcommand == "analyze":
            run_analyze(cfg, out)
        elif args.subcommand == "design":
            run_design(cfg, out, args.reuse)
        elif args.subcommand == "simulate":
            run_simulate(cfg, out, args.reuse)
        elif args.subcommand == "sweep":
            run_sweep(cfg, out, args.config, args.jobs)
        else:
            run_report(cfg, out, args.reuse)
    except FileNotFoundError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2
    except DelaystabError as exc:
        name, code = _classify(exc)
        print(f"error[{name}]: {exc}", file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
