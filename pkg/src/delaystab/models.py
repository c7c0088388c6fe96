"""Finite-dimensional models of controlled parabolic systems.

Builds the state-space data (generator, input map, grid, quadrature
weights) for three families:

* generic LTI systems given directly by matrices,
* 1-D convection-diffusion with distributed interior control,
* 1-D convection-diffusion with Dirichlet boundary control at x=0,
  realized through the elliptic lifting construction,

plus a semilinear wrapper that attaches a nonlinearity to a linear model.

All PDE models use second-order centered finite differences on a uniform
grid with homogeneous Dirichlet conditions; the state vector holds the
interior node values and the discrete inner product carries the uniform
quadrature weight h.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ModelBuildError

__all__ = [
    "ParabolicModel",
    "Forcing",
    "Nonlinearity",
    "build_custom_lti",
    "build_convection_diffusion_1d",
    "lift_boundary_control",
    "build_semilinear_1d",
    "burgers_nonlinearity",
    "cubic_nonlinearity",
]

# kinds
ABSTRACT = "abstract"
DISTRIBUTED_1D = "distributed_1d"
BOUNDARY_1D = "boundary_1d"
SEMILINEAR_1D = "semilinear_1d"

_SHIFT_TOL = 1e-8


@dataclass(frozen=True)
class ParabolicModel:
    """Discrete state-space model z' = A z + B v (+ nonlinearity).

    Attributes
    ----------
    generator : (n, n) ndarray
        Discrete generator A.
    input_map : (n, m) ndarray
        Discrete input map B, full column rank.
    grid : (n,) ndarray
        Interior node coordinates; empty for abstract models.
    mass_weights : (n,) ndarray
        Quadrature weights of the discrete inner product on the state
        space (uniform h for finite differences, 1 for abstract models).
    shift : float
        A real number in the resolvent set of the generator, used by the
        boundary-control lifting.
    kind : str
        One of ``abstract``, ``distributed_1d``, ``boundary_1d``,
        ``semilinear_1d``.
    diffusion, drift, reaction
        PDE coefficients (None for abstract models). ``drift`` and
        ``reaction`` are stored as callables of x.
    nonlinearity : Nonlinearity or None
        Present only for ``semilinear_1d``.
    """

    generator: np.ndarray
    input_map: np.ndarray
    grid: np.ndarray
    mass_weights: np.ndarray
    shift: float
    kind: str
    length: Optional[float] = None
    diffusion: Optional[float] = None
    drift: Optional[Callable] = None
    reaction: Optional[Callable] = None
    control_window: Optional[tuple] = None
    nonlinearity: Optional["Nonlinearity"] = None

    @property
    def state_dim(self) -> int:
        return self.generator.shape[0]

    @property
    def input_dim(self) -> int:
        return self.input_map.shape[1]

    @property
    def weight(self) -> float:
        """The (uniform) scalar quadrature weight."""
        return float(self.mass_weights[0]) if self.mass_weights.size else 1.0

    def norm(self, z: np.ndarray) -> float:
        """Mass-weighted norm ||z||_H."""
        z = np.asarray(z)
        return float(np.sqrt(np.sum(self.mass_weights * np.abs(z) ** 2, axis=-1)))

    def inner(self, z, y) -> float:
        """Mass-weighted inner product (z, y)_H."""
        return float(np.sum(self.mass_weights * np.asarray(z) * np.asarray(y)))

    def h1_seminorm(self, z: np.ndarray) -> float:
        """Discrete H1 seminorm (Dirichlet difference quotients).

        Defined for PDE kinds only; includes the boundary panels with the
        homogeneous Dirichlet value.
        """
        if self.grid.size == 0:
            raise ModelBuildError("H1 seminorm undefined for abstract models")
        h = self.weight
        zz = np.concatenate(([0.0], np.asarray(z, dtype=float), [0.0]))
        return float(np.sqrt(np.sum(np.diff(zz) ** 2) / h))

    def adjoint_input(self) -> np.ndarray:
        """Matrix of B* : H -> U w.r.t. the mass-weighted inner product."""
        return self.input_map.T * self.mass_weights[np.newaxis, :]


@dataclass(frozen=True)
class Forcing:
    """Time-dependent source term with a claimed exponential decay rate."""

    evaluator: Callable[[float], np.ndarray]
    decay_rate: float = 0.0
    zero_flag: bool = False

    @staticmethod
    def zero(n: int) -> "Forcing":
        z = np.zeros(n)
        return Forcing(evaluator=lambda t: z, decay_rate=np.inf, zero_flag=True)

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluator(t)


@dataclass(frozen=True)
class Nonlinearity:
    """State-dependent term N(z) with N(0) = 0 (stabilization around 0)."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    lipschitz_note: str = ""

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.evaluator(z)


def _check_shift(generator: np.ndarray, shift: float) -> None:
    n = generator.shape[0]
    scale = np.linalg.norm(generator, "fro") + 1.0
    s = np.linalg.svd(shift * np.eye(n) - generator, compute_uv=False)
    if s[-1] <= _SHIFT_TOL * scale:
        raise ModelBuildError(
            f"shift {shift} is (numerically) an eigenvalue of the generator "
            f"(smallest singular value {s[-1]:.3e})"
        )


def _check_input_rank(input_map: np.ndarray) -> None:
    if input_map.ndim != 2:
        raise ModelBuildError("input_map must be a 2-D array")
    m = input_map.shape[1]
    if m == 0:
        raise ModelBuildError("input_map must have at least one column")
    if np.linalg.matrix_rank(input_map) < m:
        raise ModelBuildError("input_map columns are linearly dependent")


def build_custom_lti(generator, input_map, shift: float) -> ParabolicModel:
    """Wrap user matrices (A, B) as an abstract model with unit weights.

    Parameters
    ----------
    generator : (n, n) array_like
    input_map : (n, m) array_like
    shift : float
        Must not be an eigenvalue of the generator.
    """
    A = np.atleast_2d(np.asarray(generator, dtype=float))
    B = np.asarray(input_map, dtype=float)
    if B.ndim == 1:
        B = B[:, np.newaxis]
    if A.shape[0] != A.shape[1]:
        raise ModelBuildError(f"generator must be square, got {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise ModelBuildError(
            f"input_map has {B.shape[0]} rows, generator is {A.shape[0]}x{A.shape[1]}"
        )
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ModelBuildError("non-finite entries in generator or input_map")
    _check_input_rank(B)
    _check_shift(A, shift)
    n = A.shape[0]
    return ParabolicModel(
        generator=A,
        input_map=B,
        grid=np.empty(0),
        mass_weights=np.ones(n),
        shift=float(shift),
        kind=ABSTRACT,
    )


def _as_coefficient(c) -> Callable[[np.ndarray], np.ndarray]:
    if callable(c):
        return lambda x: np.broadcast_to(np.asarray(c(x), dtype=float), np.shape(x)).copy()
    val = float(c)
    return lambda x: np.full_like(np.asarray(x, dtype=float), val)


def _interior_operator(length, n, diffusion, drift_fn, reaction_fn):
    """Centered FD matrix for nu*z'' + b z' + c z on n-1 interior nodes."""
    h = length / n
    x = h * np.arange(1, n)
    b = drift_fn(x)
    c = reaction_fn(x)
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise ModelBuildError("non-finite drift or reaction coefficients")
    peclet = h * np.max(np.abs(b)) / (2.0 * diffusion)
    if peclet >= 1.0:
        raise ModelBuildError(
            f"grid Peclet number {peclet:.3f} >= 1: refine the grid or reduce the drift"
        )
    nn = n - 1
    A = np.zeros((nn, nn))
    idx = np.arange(nn)
    A[idx, idx] = -2.0 * diffusion / h**2 + c
    A[idx[:-1], idx[:-1] + 1] = diffusion / h**2 + b[:-1] / (2.0 * h)
    A[idx[1:], idx[1:] - 1] = diffusion / h**2 - b[1:] / (2.0 * h)
    return A, x, h


def build_convection_diffusion_1d(
    length: float,
    n: int,
    diffusion: float,
    drift=0.0,
    reaction=0.0,
    control: str = "distributed",
    control_window: Optional[tuple] = None,
    control_shapes: Optional[list] = None,
    shift: Optional[float] = None,
) -> ParabolicModel:
    """Discretize d_t z = nu z'' + b z' + c z on (0, length), Dirichlet ends.

    Parameters
    ----------
    length : float
        Domain length L.
    n : int
        Number of grid intervals (state dimension is n-1 interior nodes).
    diffusion : float
        Constant nu > 0.
    drift, reaction : float or callable
        Coefficients b(x), c(x); constants are broadcast.
    control : {"distributed", "boundary"}
        Distributed interior control on ``control_window`` = (x_a, x_b),
        or Dirichlet boundary control at x = 0 through the lifting
        operator.
    control_shapes : list of callables, optional
        Extra distributed control shapes on the window (default: the
        constant indicator, one column).
    shift : float, optional
        Resolvent point used by the boundary lifting. Defaults to a value
        right of the spectrum.

    Notes
    -----
    The drift is discretized centered; the grid Peclet restriction
    h|b|/(2 nu) < 1 is enforced at build time. For ``boundary`` control
    the continuous input operator is unbounded (it factors through the
    lifting of the Dirichlet trace); its discrete realization here is a
    bounded column whose norm grows like 1/h^2 under refinement.
    """
    if n < 16:
        raise ModelBuildError(f"need n >= 16 grid intervals, got {n}")
    if diffusion <= 0 or not np.isfinite(diffusion):
        raise ModelBuildError("diffusion must be positive and finite")
    if length <= 0 or not np.isfinite(length):
        raise ModelBuildError("length must be positive and finite")
    drift_fn = _as_coefficient(drift)
    reaction_fn = _as_coefficient(reaction)
    A, x, h = _interior_operator(length, n, diffusion, drift_fn, reaction_fn)
    weights = np.full(n - 1, h)

    if shift is None:
        # any value strictly right of the numerical abscissa works
        shift = float(np.max(np.linalg.eigvals(A).real) + 1.0)

    if control == "distributed":
        if control_window is None:
            control_window = (0.0, length)
        xa, xb = control_window
        if not (0.0 <= xa < xb <= length):
            raise ModelBuildError(f"bad control window ({xa}, {xb})")
        mask = (x > xa) & (x < xb)
        if not np.any(mask):
            raise ModelBuildError("control window contains no grid nodes")
        shapes = control_shapes if control_shapes else [lambda x: np.ones_like(x)]
        cols = []
        for s in shapes:
            col = np.zeros(n - 1)
            # indicator columns carry the quadrature weights, so the plain
            # transpose of B pairs a state against the control shape in H
            col[mask] = weights[mask] * np.asarray(s(x[mask]), dtype=float)
            cols.append(col)
        B = np.column_stack(cols)
        _check_input_rank(B)
        model = ParabolicModel(
            generator=A,
            input_map=B,
            grid=x,
            mass_weights=weights,
            shift=shift,
            kind=DISTRIBUTED_1D,
            length=length,
            diffusion=diffusion,
            drift=drift_fn,
            reaction=reaction_fn,
            control_window=(float(xa), float(xb)),
        )
        _check_shift(A, shift)
        return model

    if control == "boundary":
        _check_shift(A, shift)
        partial = ParabolicModel(
            generator=A,
            input_map=np.zeros((n - 1, 1)),
            grid=x,
            mass_weights=weights,
            shift=shift,
            kind=BOUNDARY_1D,
            length=length,
            diffusion=diffusion,
            drift=drift_fn,
            reaction=reaction_fn,
        )
        col = lift_boundary_control(partial, shift)
        return ParabolicModel(
            generator=A,
            input_map=col[:, np.newaxis],
            grid=x,
            mass_weights=weights,
            shift=shift,
            kind=BOUNDARY_1D,
            length=length,
            diffusion=diffusion,
            drift=drift_fn,
            reaction=reaction_fn,
        )

    raise ModelBuildError(f"unknown control type {control!r}")


def lift_boundary_control(model: ParabolicModel, shift: float) -> np.ndarray:
    """Discrete input column for Dirichlet control at x=0 via lifting.

    Solves the discrete elliptic problem (shift - A_h) w = 0 with boundary
    value 1 at x = 0 folded into the stencil (the discrete lifting of unit
    boundary data), then returns (shift - A_h) w expressed on the interior
    nodes. In exact arithmetic this equals the boundary-coupling vector of
    the stencil, so the result does not depend on the admissible shift.

    The transpose identity (mass-weighted) approximates the inward normal
    derivative at x = 0: B* e ~ nu * e_1 / h for smooth e vanishing at the
    boundary.
    """
    if model.kind not in (BOUNDARY_1D, DISTRIBUTED_1D):
        raise ModelBuildError("boundary lifting needs a 1-D PDE model")
    A = model.generator
    n = A.shape[0] + 1
    h = model.length / n
    _check_shift(A, shift)
    # ghost coupling of the x=0 boundary node into the first interior row
    g = np.zeros(n - 1)
    x1 = model.grid[0]
    g[0] = model.diffusion / h**2 - float(model.drift(np.asarray([x1]))[0]) / (2.0 * h)
    w = np.linalg.solve(shift * np.eye(n - 1) - A, g)
    return shift * w - A @ w


def build_semilinear_1d(base: ParabolicModel, nonlinearity: Nonlinearity) -> ParabolicModel:
    """Attach a nonlinearity N (with N(0)=0) to a distributed 1-D model."""
    if base.kind != DISTRIBUTED_1D:
        raise ModelBuildError("semilinear wrapper needs a distributed_1d base model")
    zero = np.zeros(base.state_dim)
    val = np.asarray(nonlinearity(zero), dtype=float)
    if val.shape != zero.shape or np.max(np.abs(val)) > 1e-14:
        raise ModelBuildError("nonlinearity must satisfy N(0) = 0")
    return ParabolicModel(
        generator=base.generator,
        input_map=base.input_map,
        grid=base.grid,
        mass_weights=base.mass_weights,
        shift=base.shift,
        kind=SEMILINEAR_1D,
        length=base.length,
        diffusion=base.diffusion,
        drift=base.drift,
        reaction=base.reaction,
        control_window=base.control_window,
        nonlinearity=nonlinearity,
    )


def cubic_nonlinearity(strength: float = 1.0) -> Nonlinearity:
    """Pointwise cubic term N(z) = -strength * z^3."""
    return Nonlinearity(
        evaluator=lambda z: -strength * np.asarray(z) ** 3,
        lipschitz_note="locally Lipschitz, cubic growth",
    )


def burgers_nonlinearity(model: ParabolicModel) -> Nonlinearity:
    """Quadratic transport term N(z) = -z dz/dx with upwind differencing."""
    h = model.weight

    def ev(z):
        z = np.asarray(z, dtype=float)
        zz = np.concatenate(([0.0], z, [0.0]))
        fwd = (zz[2:] - zz[1:-1]) / h
        bwd = (zz[1:-1] - zz[:-2]) / h
        dz = np.where(z > 0, bwd, fwd)
        return -z * dz

    return Nonlinearity(evaluator=ev, lipschitz_note="quadratic transport, upwinded")
