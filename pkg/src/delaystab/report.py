"""CSV and text output. All floats printed at 17 significant digits so
repeated runs are byte-identical and values round-trip exactly."""

import csv
import io
from typing import Optional

import numpy as np

from .errors import SimulationError
from .gain import FeedbackDesign
from .kernel import MemoryKernel
from .loop import DecayCertificate, Trajectory
from .spectral import HautusReport, SpectralSplit

__all__ = [
    "fmt",
    "write_matrix_csv",
    "write_rows_csv",
    "write_eigenvalues_csv",
    "write_hautus_csv",
    "analyze_text",
    "write_design_outputs",
    "design_text",
    "write_run_csv",
    "read_run_csv",
    "write_certificate",
    "read_certificate",
    "certificate_text",
]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_matrix_csv(path, M) -> None:
    """Row-major matrix dump, one matrix row per line."""
    M = np.atleast_2d(np.asarray(M))
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        for row in M:
            w.writerow([fmt(v) for v in row])


def write_eigenvalues_csv(path, split: SpectralSplit) -> None:
    rows = [
        (e.value.real, e.value.imag, e.algebraic_mult, e.geometric_mult,
         "unstable" if e.unstable else "stable")
        for e in split.eigenvalues
    ]
    write_rows_csv(
        path, ["re", "im", "algebraic_mult", "geometric_mult", "class"], rows
    )


def write_hautus_csv(path, report: HautusReport) -> None:
    rows = [
        (lam.real, lam.imag, smin, ok, smin_t, ok_t)
        for lam, smin, ok, smin_t, ok_t in report.entries
    ]
    write_rows_csv(
        path,
        ["re", "im", "smin", "pass", "smin_transformed", "pass_transformed"],
        rows,
    )


def analyze_text(split: SpectralSplit, report: Optional[HautusReport]) -> str:
    out = io.StringIO()
    out.write("spectral split\n")
    out.write(f"  decay target sigma      : {fmt(split.sigma)}\n")
    out.write(f"  unstable dimension      : {split.unstable_dim}\n")
    out.write(f"  control directions      : {split.n_directions}\n")
    out.write(f"  stable abscissa         : {fmt(split.stable_abscissa)}\n")
    out.write(f"  spectral gap            : {fmt(split.stable_abscissa - split.sigma)}\n")
    out.write("  invariant residuals     : "
              + ", ".join(f"{k}={v:.2e}" for k, v in split.invariant_residuals.items())
              + "\n")
    out.write("  eigenvalues (leading 12):\n")
    for e in split.eigenvalues[:12]:
        tag = "unstable" if e.unstable else "stable"
        out.write(
            f"    {e.value.real:+.6e} {e.value.imag:+.6e}i  "
            f"alg={e.algebraic_mult} geo={e.geometric_mult}  {tag}\n"
        )
    if report is not None:
        verdict = "PASS" if report.overall_pass else "FAIL"
        out.write(f"stabilizability test      : {verdict} "
                  f"(tolerance {report.tolerance:g}, "
                  f"transformed-pair agreement: {report.verdicts_agree})\n")
        for lam, smin, ok, smin_t, ok_t in report.entries:
            out.write(
                f"    mode {lam.real:+.4e}{lam.imag:+.4e}i  smin={smin:.4e} "
                f"[{'ok' if ok else 'FAIL'}]  transformed={smin_t:.4e} "
                f"[{'ok' if ok_t else 'FAIL'}]\n"
            )
    return out.getvalue()


def write_design_outputs(out_dir, design: FeedbackDesign, kernel: MemoryKernel) -> None:
    write_matrix_csv(out_dir / "gain.csv", design.gain_input)
    write_matrix_csv(out_dir / "functionals.csv", design.functionals)
    write_matrix_csv(out_dir / "directions.csv", design.directions)
    with open(out_dir / "design.txt", "w", encoding="utf-8") as f:
        f.write(design_text(design, kernel))


def design_text(design: FeedbackDesign, kernel: Optional[MemoryKernel]) -> str:
    out = io.StringIO()
    out.write("feedback design\n")
    out.write(f"  delay tau               : {fmt(design.tau)}\n")
    out.write(f"  decay target sigma      : {fmt(design.sigma)}\n")
    out.write(f"  design rate sigma_star  : {fmt(design.sigma_star)}\n")
    out.write(f"  gain rank               : {design.rank}\n")
    out.write(f"  achieved abscissa       : {fmt(design.achieved_abscissa)}\n")
    if kernel is not None:
        out.write(f"  kernel step             : {fmt(kernel.step)}\n")
        out.write(f"  kernel horizon          : {fmt(kernel.horizon)}\n")
        out.write(f"  kernel residual (sup)   : {fmt(kernel.residual_sup)}\n")
        sup = float(np.max(np.abs(kernel.samples))) if kernel.samples.size else 0.0
        out.write(f"  kernel sup norm         : {fmt(sup)}\n")
        if sup > 1e6:
            out.write("  NOTE: kernel sup norm exceeds 1e6; the memory term "
                      "amplifies history strongly on this horizon\n")
    return out.getvalue()


def write_run_csv(path, traj: Trajectory) -> None:
    model = traj.model
    pde = model.grid.size > 0
    m = traj.controls.shape[1]
    header = ["t", "norm_z"]
    header += ["norm_h1"] if pde else []
    header += [f"v_{k}" for k in range(m)]
    header += ["norm_w", "r1", "r2"]
    sqw = np.sqrt(traj.design.split.weight)
    rows = []
    for k, t in enumerate(traj.times):
        row = [t, traj.norms[k]]
        if pde:
            row.append(model.h1_seminorm(traj.states[k]))
        row.extend(traj.controls[k])
        row.append(sqw * float(np.linalg.norm(traj.transformed[k])))
        row.append(traj.residual_transformed_ode[k])
        row.append(traj.residual_lookahead[k])
        rows.append(row)
    write_rows_csv(path, header, rows)


def read_run_csv(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader)
            cols = {h: [] for h in header}
            for row in reader:
                for h, v in zip(header, row):
                    cols[h].append(float(v))
    except FileNotFoundError:
        raise SimulationError(
            f"no simulation output at {path}; run the simulate stage first"
        ) from None
    return {h: np.asarray(v) for h, v in cols.items()}


def write_certificate(path, cert: DecayCertificate) -> None:
    rows = [
        ("fitted_rate", cert.fitted_rate),
        ("window_lo", cert.window[0]),
        ("window_hi", cert.window[1]),
        ("constant_witness", cert.constant_witness),
        ("sigma", cert.sigma),
        ("rate_tol", cert.rate_tol),
        ("passed", cert.passed),
    ]
    if cert.strong_witness is not None:
        rows.append(("strong_witness", cert.strong_witness))
    write_rows_csv(path, ["field", "value"], rows)


def read_certificate(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            reader = csv.reader(f)
            next(reader)
            out = {}
            for key, val in reader:
                out[key] = val if key == "passed" else float(val)
            return out
    except FileNotFoundError:
        raise SimulationError(
            f"no certificate at {path}; run the simulate stage first"
        ) from None


def certificate_text(cert: DecayCertificate) -> str:
    out = io.StringIO()
    out.write("decay certificate\n")
    out.write(f"  fit window              : ({fmt(cert.window[0])}, {fmt(cert.window[1])})\n")
    out.write(f"  fitted rate             : {fmt(cert.fitted_rate)}\n")
    out.write(f"  target sigma            : {fmt(cert.sigma)}\n")
    out.write(f"  constant witness        : {fmt(cert.constant_witness)}\n")
    if cert.strong_witness is not None:
        out.write(f"  strong-norm witness     : {fmt(cert.strong_witness)}\n")
    out.write(f"  verdict                 : {'PASS' if cert.passed else 'FAIL'} "
              f"(rate >= sigma - {fmt(cert.rate_tol)})\n")
    return out.getvalue()
