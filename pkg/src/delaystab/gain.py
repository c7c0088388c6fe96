"""Stabilizing gain for the delay-transformed unstable block.

The delayed input enters the unstable block through the Artstein-reduced
pair (A+, exp(-tau A+) B+ p+). The gain G maps the unstable state block
into the reachable input subspace U+ and is factored G = V Ghat, where V
holds at most N+ orthonormal input directions (N+ = largest geometric
multiplicity among unstable modes, which is also the smallest number of
directions that can control every unstable eigenspace). Ghat comes from
an infinite-horizon quadratic regulator on the shifted pair
(A+ + sigma_star I, Hhat V) with identity state and control costs, which
guarantees that the closed-loop spectral abscissa of A+ + Hhat G lies
strictly left of -sigma_star.

The gain is also exposed in the rank-factored form sum_k (., zeta_k) v_k,
with the state functionals zeta_k lying in the span of the adjoint
unstable basis (they therefore annihilate the stable subspace, so the
feedback can be evaluated on the full state).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from .errors import GainDesignError
from .spectral import SpectralSplit, _kernel_basis

__all__ = ["FeedbackDesign", "design_gain", "design_from_gain", "default_margin_rate"]


@dataclass(frozen=True)
class FeedbackDesign:
    """Delay-compensating feedback data for one spectral split.

    ``gain_block`` maps unstable-block coordinates to coordinates on the
    input subspace basis; ``gain_input`` is the same map expressed as
    actuator values. ``functionals`` (columns) and ``directions``
    (columns) give the rank-factored form of the feedback; both
    representations agree identically.
    """

    split: SpectralSplit
    tau: float
    sigma: float
    sigma_star: float
    gain_block: np.ndarray        # (dim U+, n+)
    gain_input: np.ndarray        # (m, n+)
    functionals: np.ndarray       # (n, r)
    directions: np.ndarray        # (m, r)
    transformed_input: np.ndarray  # (n+, dim U+): expm(-tau A+) B+
    achieved_abscissa: float
    rank: int

    @property
    def block_dim(self) -> int:
        return self.split.unstable_dim

    def closed_loop_block(self) -> np.ndarray:
        """A+ + exp(-tau A+) B+ G on the unstable block."""
        return self.split.A_block + self.transformed_input @ self.gain_block

    def feedback_matrix(self) -> np.ndarray:
        """The q x q injection B+ p+ G appearing in the kernel equation."""
        return self.split.B_block @ self.gain_block


def default_margin_rate(split: SpectralSplit) -> float:
    """Default design rate: sigma plus a margin tied to the spectral gap."""
    gap = split.stable_abscissa - split.sigma
    margin = max(0.5, 0.25 * gap) if np.isfinite(gap) else 0.5
    return split.sigma + margin


def _abscissa(M: np.ndarray) -> float:
    if M.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(M).real))


def _mode_couplings(split: SpectralSplit, H: np.ndarray):
    """Adjoint-kernel couplings D_j = E_j^H Hhat for each unstable mode."""
    T11 = split.A_block
    scale = np.linalg.norm(T11, "fro") + 1.0
    out = []
    for info in split.unstable_eigenvalues:
        E = _kernel_basis(T11.T - np.conj(info.value) * np.eye(T11.shape[0]), scale)
        if E.shape[1] == 0:
            raise GainDesignError(
                f"adjoint kernel of the unstable block empty at {info.value:.6g}"
            )
        out.append(E.conj().T @ H)
    return out


def _select_directions(couplings, r: int, dim_u: int) -> np.ndarray:
    """Greedy choice of r orthonormal input directions.

    Maximizes, step by step, the smallest singular value of the weakest
    mode-input coupling restricted to the chosen directions. Candidates
    are the right singular vectors of the individual couplings and of
    their normalized stack (real parts interleaved with imaginary parts,
    so complex pairs are handled in real arithmetic).
    """
    stacks = []
    cands = []
    for D in couplings:
        Dr = np.vstack([D.real, D.imag])
        smax = np.linalg.norm(Dr, 2)
        if smax > 0:
            stacks.append(Dr / smax)
        _, _, Vh = np.linalg.svd(Dr, full_matrices=False)
        cands.extend(list(Vh))
    if stacks:
        stacked = np.vstack(stacks)
        _, _, Vh = np.linalg.svd(stacked, full_matrices=False)
        cands.extend(list(Vh))
        # sign-aligned average couples to every mode when the per-mode
        # principal directions are mutually orthogonal (degenerate SVD)
        ref = stacked[np.argmax(np.linalg.norm(stacked, axis=1))]
        signs = np.where(stacked @ ref >= 0, 1.0, -1.0)
        cands.append(signs @ stacked)
    cands.extend(list(np.eye(dim_u)))
    # deterministic probes: the set of directions blind to some mode is a
    # finite union of proper subspaces, so generic vectors avoid it
    rng = np.random.default_rng(2024)
    cands.extend(list(rng.standard_normal((32, dim_u))))
    cands = [c / np.linalg.norm(c) for c in cands if np.linalg.norm(c) > 1e-14]

    def weakest(V):
        vals = []
        for D in couplings:
            M = D @ V
            s = np.linalg.svd(M, compute_uv=False)
            k = min(M.shape)
            vals.append(s[k - 1] if k else 0.0)
        return min(vals) if vals else 0.0

    chosen = np.zeros((dim_u, 0))
    for _ in range(r):
        best, best_v = -1.0, None
        for c in cands:
            v = c - chosen @ (chosen.T @ c)
            nv = np.linalg.norm(v)
            if nv < 1e-12:
                continue
            v = v / nv
            score = weakest(np.column_stack([chosen, v]))
            if score > best + 1e-15:
                best, best_v = score, v
        if best_v is None:
            raise GainDesignError("could not find enough independent input directions")
        chosen = np.column_stack([chosen, best_v])
    return chosen


def _factored_form(split: SpectralSplit, V: np.ndarray, Ghat: np.ndarray):
    """zeta_k / v_k factorization: G phi = sum_k (phi, zeta_k)_H v_k."""
    w = split.weight
    functionals = split.adjoint_basis @ Ghat.T / w
    directions = split.input_basis_unstable @ V
    return functionals, directions


def design_gain(
    split: SpectralSplit,
    tau: float,
    sigma_star: Optional[float] = None,
    static_ok: bool = False,
) -> FeedbackDesign:
    """Synthesize the delay-compensating gain for a verified split.

    Parameters
    ----------
    split : SpectralSplit
        Must satisfy the Hautus test (run ``hautus_check`` first; an
        unstabilizable pair surfaces here as a regulator failure).
    tau : float
        Input delay (> 0; tau = 0 only with ``static_ok`` for the
        static-feedback diagnostic mode).
    sigma_star : float, optional
        Design rate > split.sigma; defaults to ``default_margin_rate``.
    """
    if tau < 0:
        raise GainDesignError("delay must be nonnegative")
    if tau == 0 and not static_ok:
        raise GainDesignError("tau = 0 requires the static-feedback diagnostic mode")
    if sigma_star is None:
        sigma_star = default_margin_rate(split)
    if sigma_star <= split.sigma:
        raise GainDesignError(
            f"design rate {sigma_star} must exceed the decay target {split.sigma}"
        )

    q = split.unstable_dim
    if q == 0:
        return FeedbackDesign(
            split=split,
            tau=float(tau),
            sigma=split.sigma,
            sigma_star=float(sigma_star),
            gain_block=np.zeros((0, 0)),
            gain_input=np.zeros((split.input_basis_unstable.shape[0], 0)),
            functionals=np.zeros((split.basis.shape[0], 0)),
            directions=np.zeros((split.input_basis_unstable.shape[0], 0)),
            transformed_input=np.zeros((0, 0)),
            achieved_abscissa=-np.inf,
            rank=0,
        )

    dim_u = split.input_basis_unstable.shape[1]
    if dim_u == 0:
        raise GainDesignError("input map does not reach the unstable subspace")

    T11 = split.A_block
    H = la.expm(-tau * T11) @ split.B_block  # (q, dim U+)
    r = split.n_directions
    couplings = _mode_couplings(split, H)
    V = _select_directions(couplings, r, dim_u)

    A_shift = T11 + sigma_star * np.eye(q)
    B_sel = H @ V
    # identity costs in the physical norms: the block basis is Euclidean
    # orthonormal, so the H-inner product on the block is weight * I; with
    # this state cost the closed-loop pole is stable under grid refinement
    try:
        X = la.solve_continuous_are(
            A_shift, B_sel, split.weight * np.eye(q), np.eye(r)
        )
    except Exception as exc:
        worst = min(
            float(np.min(np.linalg.svd(D @ V, compute_uv=False))) for D in couplings
        )
        raise GainDesignError(
            f"regulator solve failed on the shifted pair (weakest mode coupling "
            f"{worst:.3e}); the pair is likely not stabilizable"
        ) from exc
    Ghat = -B_sel.T @ X  # (r, q)

    gain_block = V @ Ghat
    abscissa = _abscissa(T11 + H @ gain_block)
    if not abscissa < -sigma_star:
        raise GainDesignError(
            f"regulator produced abscissa {abscissa:.6g}, not below {-sigma_star}"
        )
    functionals, directions = _factored_form(split, V, Ghat)
    return FeedbackDesign(
        split=split,
        tau=float(tau),
        sigma=split.sigma,
        sigma_star=float(sigma_star),
        gain_block=gain_block,
        gain_input=split.input_basis_unstable @ gain_block,
        functionals=functionals,
        directions=directions,
        transformed_input=H,
        achieved_abscissa=abscissa,
        rank=int(np.linalg.matrix_rank(gain_block)) if gain_block.size else 0,
    )


def design_from_gain(
    split: SpectralSplit,
    tau: float,
    gain_input: np.ndarray,
    sigma_star: Optional[float] = None,
    static_ok: bool = False,
) -> FeedbackDesign:
    """Wrap an externally chosen gain (actuator values per block coordinate).

    Intended for diagnostics and oracles (hand pole placement, zero gain,
    deliberately blind gains). Reports the achieved abscissa but does not
    enforce it. The gain is projected onto the reachable input subspace;
    components outside it cannot influence the unstable block anyway.
    """
    if tau < 0:
        raise GainDesignError("delay must be nonnegative")
    if tau == 0 and not static_ok:
        raise GainDesignError("tau = 0 requires the static-feedback diagnostic mode")
    if sigma_star is None:
        sigma_star = default_margin_rate(split)
    q = split.unstable_dim
    G_u = np.atleast_2d(np.asarray(gain_input, dtype=float))
    if G_u.shape != (split.input_basis_unstable.shape[0], q):
        raise GainDesignError(
            f"gain must be (input_dim, {q}), got {G_u.shape}"
        )
    Vp = split.input_basis_unstable
    gain_block = Vp.T @ G_u
    if gain_block.size:
        rank = int(np.linalg.matrix_rank(gain_block, tol=1e-10 * max(1.0, np.linalg.norm(gain_block, 2))))
    else:
        rank = 0
    if rank > split.n_directions:
        raise GainDesignError(
            f"gain rank {rank} exceeds the direction budget {split.n_directions}"
        )
    T11 = split.A_block
    H = la.expm(-tau * T11) @ split.B_block if q else np.zeros((0, 0))
    # factor the supplied gain for the functional form
    if gain_block.size:
        U, S, Vh = np.linalg.svd(gain_block)
        keep = S > 1e-12 * (S[0] if S.size else 1.0)
        V = U[:, keep]
        Ghat = (S[keep, None] * Vh[keep])
    else:
        V = np.zeros((gain_block.shape[0], 0))
        Ghat = np.zeros((0, q))
    functionals, directions = _factored_form(split, V, Ghat)
    return FeedbackDesign(
        split=split,
        tau=float(tau),
        sigma=split.sigma,
        sigma_star=float(sigma_star),
        gain_block=gain_block,
        gain_input=Vp @ gain_block,
        functionals=functionals,
        directions=directions,
        transformed_input=H,
        achieved_abscissa=_abscissa(T11 + H @ gain_block) if q else -np.inf,
        rank=rank,
    )
