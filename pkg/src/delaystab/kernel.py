"""Volterra memory kernel and evaluation of the memory feedback law.

The feedback that realizes the designed gain on tau-delayed information is

    v(t) = 1_{t >= tau} G [ z+(t - tau) + int_0^{t-tau} K(t-tau, s) z+(s) ds ],

where the matrix kernel K on the triangle {0 < s < t} solves the Volterra
equation of the second kind

    K(t, s) = L(t - s) 1_{(max(t-tau,0), t)}(s)
              + int_{max(t-tau, s)}^{t} L(t - xi) K(xi, s) d xi,

with the lag response L(theta) = exp((theta - tau) A+) B+ p+ G supported
on theta in [0, tau].

The solver marches forward in t on a uniform grid that divides tau:
K(t, .) only depends on values within the trailing window of width tau,
so trapezoidal quadrature with the unknown on the diagonal reduces each
step to one small linear solve shared by all columns of the row.

Band structure: K is smooth inside the bands k*tau < t - s < (k+1)*tau
but jumps by exactly -L(tau) = -B+ p+ G across t - s = tau (the indicator
of the forcing term switches off there). Grid nodes on that edge store
the equation (band-2) value; quadrature panels that approach the edge
from inside band 1 use the one-sided limit stored value + jump. This
correction is what keeps the composite rules second-order accurate.

The stored kernel residual is computed by an independent re-quadrature of
the equation with the midpoint rule on staggered half-grid lag samples.
"""

import dataclasses
import logging
import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as la

from .errors import KernelSolveError, SimulationError
from .gain import FeedbackDesign

__all__ = [
    "MemoryKernel",
    "solve_kernel",
    "eval_feedback",
    "HistoryBuffer",
    "dump_kernel",
    "load_kernel",
]

log = logging.getLogger("delaystab.kernel")

_FORM_AGREE_TOL = 1e-12


@dataclass(frozen=True)
class MemoryKernel:
    """Grid-sampled memory kernel on the triangle 0 <= s <= t <= horizon.

    ``samples[i, j]`` holds K(i*step, j*step) for j <= i (block matrices
    of size block_dim); the diagonal stores the limit value L(0). The
    ``lag_table`` holds L on the grid of [0, tau]; ``jump`` = L(tau) is
    the band-edge discontinuity. ``residual_sup`` is the sup-norm defect
    of the Volterra equation measured by independent midpoint
    re-quadrature.
    """

    tau: float
    horizon: float
    step: float
    samples: np.ndarray      # (N+1, N+1, q, q)
    lag_table: np.ndarray    # (p+1, q, q)
    jump: np.ndarray         # (q, q)
    residual_sup: float
    block_dim: int

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def delay_steps(self) -> int:
        return int(round(self.tau / self.step)) if self.tau > 0 else 0


def _check_divides(small: float, big: float, name_small: str, name_big: str) -> int:
    if small <= 0:
        raise KernelSolveError(f"{name_small} must be positive")
    ratio = big / small
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise KernelSolveError(
            f"{name_small} = {small} must divide {name_big} = {big}"
        )
    return k


def solve_kernel(
    design: FeedbackDesign,
    horizon: float,
    step: float,
    residual_tol: Optional[float] = None,
) -> MemoryKernel:
    """March the Volterra kernel over the triangle up to ``horizon``.

    The step must divide both the delay and the horizon, and the horizon
    must be at least twice the delay (so both band edges are exercised).
    If the measured residual exceeds ``residual_tol`` (default
    1e-6 * max|lag response|) the kernel is returned anyway and a warning
    asks for a finer step.
    """
    split = design.split
    q = split.unstable_dim
    tau = design.tau

    if tau == 0.0:
        # static-feedback diagnostic mode: empty window, zero kernel
        N = _check_divides(step, horizon, "step", "horizon")
        samples = np.zeros((N + 1, N + 1, q, q))
        return MemoryKernel(
            tau=0.0, horizon=float(horizon), step=float(step),
            samples=samples, lag_table=np.zeros((1, q, q)),
            jump=np.zeros((q, q)), residual_sup=0.0, block_dim=q,
        )

    p = _check_divides(step, tau, "step", "delay")
    N = _check_divides(step, horizon, "step", "horizon")
    if horizon < 2 * tau - 1e-12:
        raise KernelSolveError(f"horizon {horizon} must be at least 2*tau = {2 * tau}")

    T11 = split.A_block
    BG = design.feedback_matrix()  # B+ p+ G, (q, q)
    lag = np.empty((p + 1, q, q))
    for l in range(p + 1):
        lag[l] = la.expm((l * step - tau) * T11) @ BG
    jump = lag[p].copy()

    samples = np.zeros((N + 1, N + 1, q, q))
    if q == 0 or not np.any(BG):
        kern = MemoryKernel(
            tau=float(tau), horizon=float(horizon), step=float(step),
            samples=samples, lag_table=lag, jump=jump,
            residual_sup=0.0, block_dim=q,
        )
        return kern

    idx = np.arange(N + 1)
    samples[idx, idx] = lag[0]

    lhs = np.eye(q) - 0.5 * step * lag[0]
    lhs_lu = la.lu_factor(lhs)
    flat = samples[:, :, 0, 0] if q == 1 else None  # scalar fast path view

    for i in range(1, N + 1):
        ncols = i
        lo = max(i - p, 0)
        # trapezoid over the window [lo, i-1] (unknown at l = i handled
        # by the linear solve); columns j < lo contribute nothing because
        # samples[l, j] with l < j is zero-filled.
        coeff = lag[i - np.arange(lo, i)] * step    # (i-lo, q, q)
        if i - p >= 0:
            coeff[0] *= 0.5                          # lower endpoint weight
        if q == 1:
            rhs = (coeff[:, 0, 0] @ flat[lo:i, :ncols])[:, None, None]
        else:
            rhs = np.einsum("lab,ljbc->jac", coeff, samples[lo:i, :ncols])

        d = i - np.arange(ncols)                    # d[j] = i - j >= 1
        young = d < p                                # forcing active, window starts at s
        if np.any(young):
            rhs[young] += lag[d[young]]
            # lower endpoint at l = j carried weight step; reduce to step/2
            rhs[young] -= 0.5 * step * (lag[d[young]] @ lag[0])
        edge = d == p
        if np.any(edge):
            # one-sided limit of the unknown at the upper endpoint
            rhs[edge] += 0.5 * step * lag[0] @ jump
        mid = (d > p) & (d < 2 * p)
        if np.any(mid):
            # interior quadrature node sits on the band edge s + tau
            rhs[mid] += 0.5 * step * (lag[d[mid] - p] @ jump)

        if q == 1:
            flat[i, :ncols] = rhs[:, 0, 0] / lhs[0, 0]
        else:
            sol = la.lu_solve(lhs_lu, rhs.transpose(1, 0, 2).reshape(q, ncols * q))
            samples[i, :ncols] = sol.reshape(q, ncols, q).transpose(1, 0, 2)

    kern = MemoryKernel(
        tau=float(tau), horizon=float(horizon), step=float(step),
        samples=samples, lag_table=lag, jump=jump,
        residual_sup=0.0, block_dim=q,
    )
    residual = _equation_residual(kern, T11, BG)
    kern = dataclasses.replace(kern, residual_sup=residual)
    lag_sup = float(np.max(np.abs(lag))) if lag.size else 0.0
    if residual_tol is None:
        residual_tol = 1e-6 * lag_sup
    if residual > residual_tol and lag_sup > 0:
        log.warning(
            "kernel residual %.3e exceeds tolerance %.3e; refine the step "
            "(currently %.4g)", residual, residual_tol, step,
        )
    return kern


def _equation_residual(kern: MemoryKernel, T11: np.ndarray, BG: np.ndarray) -> float:
    """Independent midpoint re-quadrature of the kernel equation.

    Evaluates the equation at the grid points using the midpoint rule with
    staggered half-grid lag samples; panel midpoint values of K come from
    band-consistent averaging of the two adjacent nodes (adding the known
    jump on the panel that touches the band edge from inside band 1).
    """
    q = kern.block_dim
    if q == 0 or not np.any(BG):
        return 0.0
    step, tau = kern.step, kern.tau
    p = kern.delay_steps
    N = kern.n_steps
    lag_half = np.empty((p, q, q))
    for l in range(p):
        lag_half[l] = la.expm(((l + 0.5) * step - tau) * T11) @ BG
    lag = kern.lag_table
    J = kern.jump
    S = kern.samples

    worst = 0.0
    rows = range(1, N + 1) if N <= 4096 else np.unique(
        np.linspace(1, N, 4096).astype(int)
    )
    half = 0.5 * step
    flat = S[:, :, 0, 0] if q == 1 else None
    for i in rows:
        ncols = i
        lo = max(i - p, 0)
        ls = np.arange(lo, i)
        d = i - np.arange(ncols)
        # midpoint values on panels [l, l+1], l in [lo, i-1]; columns whose
        # window starts above lo get their spurious sub-window panels
        # removed below (only the panel touching the diagonal is nonzero)
        coeff = step * lag_half[i - 1 - ls]          # L at (i - l - 1/2) step
        if q == 1:
            c1 = 0.5 * coeff[:, 0, 0]
            quad = (c1 @ flat[lo:i, :ncols] + c1 @ flat[lo + 1:i + 1, :ncols])
            quad = quad[:, None, None]
        else:
            quad = 0.5 * (
                np.einsum("lab,ljbc->jac", coeff, S[lo:i, :ncols])
                + np.einsum("lab,ljbc->jac", coeff, S[lo + 1:i + 1, :ncols])
            )
        young = np.nonzero((d < p) & (d < i - lo))[0]
        if young.size:
            # remove the half-diagonal contribution of panel [j-1, j]
            quad[young] -= half * (lag_half[d[young]] @ lag[0])
        edge = np.nonzero((d >= p) & (d <= 2 * p - 1))[0]
        if edge.size:
            # the panel whose upper node sits on the band edge needs + J/2
            quad[edge] += half * (lag_half[d[edge] - p] @ J)
        res = S[i, :ncols] - quad
        yk = np.nonzero(d < p)[0]
        if yk.size:
            res[yk] -= lag[d[yk]]
        if res.size:
            worst = max(worst, float(np.max(np.abs(res))))
    return worst


class HistoryBuffer:
    """Growable state history with cached unstable-block coordinates."""

    def __init__(self, design: FeedbackDesign, capacity: int, state_dim: int):
        self._adjoint = design.split.adjoint_basis
        self.states = np.zeros((capacity, state_dim))
        self.coords = np.zeros((capacity, design.split.unstable_dim))
        self.filled = 0

    def push(self, z: np.ndarray) -> None:
        k = self.filled
        self.states[k] = z
        self.coords[k] = self._adjoint.T @ z
        self.filled = k + 1


def eval_feedback(
    design: FeedbackDesign,
    kernel: MemoryKernel,
    history: Union[np.ndarray, HistoryBuffer],
    t: float,
) -> np.ndarray:
    """Actuator values v(t) from tau-delayed state history.

    ``history`` holds state samples on the kernel grid starting at time 0
    (rows = full state vectors), covering at least [0, t - tau]. Returns
    exactly zero for t < tau. Both representations of the gain (matrix
    form and functional form) are evaluated and must agree to 1e-12.
    """
    split = design.split
    m = design.gain_input.shape[0]
    tau, step = design.tau, kernel.step
    if t < 0:
        raise SimulationError("feedback time must be nonnegative")
    if t < tau:
        return np.zeros(m)
    if split.unstable_dim == 0:
        return np.zeros(m)

    tp = t - tau
    ip = int(round(tp / step))
    if abs(tp - ip * step) > 1e-9 * max(1.0, abs(tp)):
        raise SimulationError(
            f"time {t} minus delay does not land on the kernel grid (step {step})"
        )
    if ip > kernel.n_steps:
        raise SimulationError(f"t - tau = {tp} exceeds the kernel horizon {kernel.horizon}")

    if isinstance(history, HistoryBuffer):
        if ip >= history.filled:
            raise SimulationError("history is shorter than t - tau")
        coords = history.coords[: ip + 1]
        state_tp = history.states[ip]
    else:
        hist = np.asarray(history, dtype=float)
        if hist.ndim == 1:
            hist = hist[:, None]
        if ip >= hist.shape[0]:
            raise SimulationError("history is shorter than t - tau")
        coords = hist[: ip + 1] @ split.adjoint_basis
        state_tp = hist[ip]

    acc = _memory_integral(kernel, coords, ip)
    phi = coords[ip] + acc

    v = design.gain_input @ phi
    # functional form on the full state: zeta_k annihilate the stable part
    w = split.weight
    phi_state = state_tp + split.basis @ acc
    v_form = design.directions @ (w * (design.functionals.T @ phi_state))
    scale = max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)
    if v.size and float(np.max(np.abs(v - v_form))) > _FORM_AGREE_TOL * scale:
        raise KernelSolveError(
            "matrix and functional forms of the feedback disagree beyond 1e-12"
        )
    return v


def _memory_integral(kernel: MemoryKernel, coords: np.ndarray, ip: int) -> np.ndarray:
    """Trapezoid of K(t', s) a(s) over s in [0, t'], t' = ip * step."""
    q = kernel.block_dim
    if ip == 0:
        return np.zeros(q)
    step = kernel.step
    p = kernel.delay_steps
    wts = np.full(ip + 1, step)
    wts[0] = wts[-1] = 0.5 * step
    acc = np.einsum("j,jab,jb->a", wts, kernel.samples[ip, : ip + 1], coords[: ip + 1])
    if p and ip >= p:
        # K(t', .) jumps by +jump as s crosses t' - tau from below
        acc = acc + 0.5 * step * kernel.jump @ coords[ip - p]
    return acc


_MAGIC = b"DSKN"


def dump_kernel(kernel: MemoryKernel, path) -> None:
    """Binary triangle dump.

    Layout (little-endian): magic ``DSKN``, uint64 block_dim, float64
    horizon, float64 step, float64 tau, then for each t index i = 0..N and
    each s index j = 0..i the block K(i*step, j*step) as row-major
    float64.
    """
    q = kernel.block_dim
    N = kernel.n_steps
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", q))
        f.write(struct.pack("<ddd", kernel.horizon, kernel.step, kernel.tau))
        for i in range(N + 1):
            f.write(np.ascontiguousarray(kernel.samples[i, : i + 1], dtype="<f8").tobytes())


def load_kernel(path, design: Optional[FeedbackDesign] = None) -> MemoryKernel:
    """Read a triangle dump; lag tables are rebuilt when a design is given."""
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise KernelSolveError(f"{path} is not a kernel dump")
        (q,) = struct.unpack("<Q", f.read(8))
        horizon, step, tau = struct.unpack("<ddd", f.read(24))
        N = int(round(horizon / step))
        samples = np.zeros((N + 1, N + 1, q, q))
        for i in range(N + 1):
            buf = f.read((i + 1) * q * q * 8)
            if len(buf) != (i + 1) * q * q * 8:
                raise KernelSolveError(f"{path}: truncated kernel dump")
            samples[i, : i + 1] = np.frombuffer(buf, dtype="<f8").reshape(i + 1, q, q)
    p = int(round(tau / step)) if tau > 0 else 0
    if design is not None and q:
        T11 = design.split.A_block
        BG = design.feedback_matrix()
        lag = np.empty((p + 1, q, q))
        for l in range(p + 1):
            lag[l] = la.expm((l * step - tau) * T11) @ BG
        jump = lag[p].copy()
    else:
        lag = np.zeros((p + 1, q, q))
        jump = np.zeros((q, q))
    return MemoryKernel(
        tau=tau, horizon=horizon, step=step, samples=samples,
        lag_table=lag, jump=jump, residual_sup=float("nan"), block_dim=q,
    )
