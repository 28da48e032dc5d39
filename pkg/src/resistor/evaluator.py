"""Evaluation of the shifted max-affine objective and its ball-smoothed
version, with derivatives.

The smoothed function is the expectation of the max-affine function over
k independent radius-delta ball perturbations inside the span of the
piece directions (iterated smoothing collapses to one expectation over
the sum of the perturbations). Queries fall in one of two regimes:

* exact_affine: one piece wins the max by a margin greater than
  2*k*delta. Each piece is 1-Lipschitz, so every point the smoothing
  can touch sees the same single affine piece, and value, gradient and
  all higher derivatives are closed-form (higher orders are zero).
* monte_carlo: near a tie, value and gradient are estimated by
  sampling; the gradient uses the sphere identity
      grad = (r/delta) E[ f(x + delta w) w ],  w uniform on the sphere,
  applied to the outermost smoothing layer, with antithetic pairs for
  variance reduction. Orders >= 2 are central finite differences of the
  gradient estimator in subspace coordinates with common random numbers
  (practical for order 2; the recursion cost grows fast beyond that).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import sample_ball, sample_sphere
from .instance import QUERY_NORM_SLACK, HardInstance
from .streams import child_seed, stream

DEFAULT_VALUE_SAMPLES = 100_000
DEFAULT_GRADIENT_SAMPLES = 200_000
# Finite-difference step for higher orders, as a fraction of delta.
FD_STEP_FRACTION = 0.1

EXACT_AFFINE = "exact_affine"
MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class MCBudget:
    """Sample count and stream seed for one Monte-Carlo evaluation."""

    n_samples: int = DEFAULT_VALUE_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")


@dataclass(frozen=True)
class HigherDerivative:
    """Derivative tensor of one order, in basis coordinates of the
    invariant subspace; is_zero marks the closed-form zero tensor."""

    order: int
    is_zero: bool
    tensor: np.ndarray | None = None
    error_bound: float = 0.0

    def scaled(self, s: float) -> "HigherDerivative":
        if s == 1.0 or self.is_zero:
            return self
        return HigherDerivative(
            self.order, False, self.tensor * s, self.error_bound * abs(s)
        )

    def to_dict(self) -> dict:
        doc: dict = {"order": self.order, "zero": self.is_zero}
        if not self.is_zero:
            doc["tensor"] = self.tensor.tolist()
            doc["error_bound"] = self.error_bound
        return doc


@dataclass(frozen=True)
class OracleResponse:
    """Value and derivatives at one query, with regime and error bounds.

    The gradient is an ambient vector lying in the span of the piece
    directions; tensors of order >= 2 are in basis coordinates, and
    basis_matrix (rows spanning the invariant subspace) is attached
    whenever a non-zero tensor is present so callers can apply them.
    In the exact_affine regime value_stderr and all error bounds are 0
    and the gradient norm is 1/norm_denom exactly.
    """

    value: float
    gradient: np.ndarray
    higher: tuple[HigherDerivative, ...]
    regime: str
    affine_index: int | None
    value_stderr: float
    gradient_error: float
    basis_matrix: np.ndarray | None = None

    def order(self) -> int:
        return 1 + len(self.higher)

    def hessian(self) -> HigherDerivative | None:
        for h in self.higher:
            if h.order == 2:
                return h
        return None

    def hessian_ambient(self) -> np.ndarray | None:
        """Dense ambient Hessian, or None when it is exactly zero.

        Materializes a (d, d) array; meant for small ambient dimension.
        """
        h = self.hessian()
        if h is None or h.is_zero:
            return None
        b = self.basis_matrix
        return b.T @ h.tensor @ b

    def scaled(self, s: float) -> "OracleResponse":
        """Response for the objective multiplied by s (all outputs scale)."""
        if s == 1.0:
            return self
        return OracleResponse(
            value=self.value * s,
            gradient=self.gradient * s,
            higher=tuple(h.scaled(s) for h in self.higher),
            regime=self.regime,
            affine_index=self.affine_index,
            value_stderr=self.value_stderr * abs(s),
            gradient_error=self.gradient_error * abs(s),
            basis_matrix=self.basis_matrix,
        )

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "gradient": self.gradient.tolist(),
            "higher": [h.to_dict() for h in self.higher],
            "regime": self.regime,
            "affine_index": self.affine_index,
            "value_stderr": self.value_stderr,
            "gradient_error": self.gradient_error,
        }


class PieceValues(NamedTuple):
    """Per-piece evaluations at one point."""

    linear: np.ndarray  # a_i . x
    shifted: np.ndarray  # a_i . x + shift_i

    @property
    def f_linear(self) -> float:
        return float(self.linear.max())

    @property
    def f_tilde(self) -> float:
        return float(self.shifted.max())


def piece_values(instance: HardInstance, x: np.ndarray) -> PieceValues:
    """All piece evaluations a_i.x and a_i.x + shift_i at x.

    Dots are taken piece by piece so the result for piece i is
    bit-identical whether or not later pieces exist (replays depend on
    this).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.params.d,):
        raise ValueError(
            f"dimension mismatch: query has shape {x.shape}, instance is "
            f"{instance.params.d}-dimensional"
        )
    linear = np.array([np.dot(p.a, x) for p in instance.pieces])
    shifted = np.array([lin + p.shift for lin, p in zip(linear, instance.pieces)])
    return PieceValues(linear=linear, shifted=shifted)


def locally_affine_index(instance: HardInstance, x: np.ndarray) -> int | None:
    """Index (1-based) of the unique argmax piece if its margin over every
    other piece strictly exceeds 2*k*delta, else None.

    Each piece is 1-Lipschitz, so this margin keeps the argmax constant
    on the radius-(k*delta) ball the smoothing averages over; ties and
    boundary (margin exactly 2*k*delta) go to Monte Carlo.
    """
    if instance.num_pieces == 0:
        return None
    shifted = piece_values(instance, x).shifted
    j = int(np.argmax(shifted))
    if instance.num_pieces == 1:
        return 1
    others = np.delete(shifted, j)
    margin = shifted[j] - others.max()
    threshold = 2.0 * instance.params.k * instance.params.delta
    return j + 1 if margin > threshold else None


def _ball_sum(r: int, k: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Sum of k i.i.d. uniform ball samples, shape (n, r)."""
    total = sample_ball(r, rng, size=n)
    for _ in range(k - 1):
        total = total + sample_ball(r, rng, size=n)
    return total


def smoothed_value_mc(
    instance: HardInstance, x: np.ndarray, budget: MCBudget | None = None
) -> tuple[float, float]:
    """Unbiased Monte-Carlo estimate of the smoothed value at x.

    Averages the shifted max-affine function over x + delta * (v_1 + ...
    + v_k), v_j i.i.d. uniform in the unit ball of the piece span.
    Returns (estimate, standard error). Unnormalized (no norm_denom).
    """
    budget = budget or MCBudget()
    params = instance.params
    r = instance.smoothing_dim
    if r == 0:
        raise ValueError("instance has no pieces to evaluate")
    base = piece_values(instance, x).shifted
    rng = stream(budget.seed, "smooth-value")
    n = budget.n_samples
    c = _ball_sum(r, params.k, rng, n)
    vals = (base[None, :] + params.delta * (c @ instance.piece_coords.T)).max(axis=1)
    est = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return est, stderr


def _gradient_coords_mc(
    instance: HardInstance, x: np.ndarray, budget: MCBudget
) -> tuple[np.ndarray, float]:
    """Sphere-formula gradient estimate in basis coordinates.

    One sphere layer for the outermost smoothing, (k-1) summed ball
    vectors for the inner layers; antithetic pairs (w, v) and (-w, -v)
    cancel the constant term. n_samples counts function evaluations, so
    n_samples // 2 pairs are drawn. Returns (coords, error bound), the
    error bound being the root-sum-square of per-coordinate standard
    errors.
    """
    params = instance.params
    r = instance.smoothing_dim
    base = piece_values(instance, x).shifted
    rng = stream(budget.seed, "smooth-gradient")
    n_pairs = max(1, budget.n_samples // 2)
    w = sample_sphere(r, rng, size=n_pairs)
    disp = w if params.k == 1 else w + _ball_sum(r, params.k - 1, rng, n_pairs)
    proj = params.delta * (disp @ instance.piece_coords.T)
    f_plus = (base[None, :] + proj).max(axis=1)
    f_minus = (base[None, :] - proj).max(axis=1)
    sym = 0.5 * (f_plus - f_minus)
    g = (r / params.delta) * sym[:, None] * w
    coords = g.mean(axis=0)
    if n_pairs > 1:
        stderrs = g.std(axis=0, ddof=1) / math.sqrt(n_pairs)
        err = float(np.sqrt((stderrs**2).sum()))
    else:
        err = 0.0
    return coords, err


def smoothed_gradient_mc(
    instance: HardInstance, x: np.ndarray, budget: MCBudget | None = None
) -> tuple[np.ndarray, float]:
    """Monte-Carlo gradient of the smoothed function at x, in ambient
    coordinates (lying in the piece span). Unnormalized."""
    budget = budget or MCBudget(DEFAULT_GRADIENT_SAMPLES)
    coords, err = _gradient_coords_mc(instance, x, budget)
    return instance.basis.lift(coords), err


def _fd_tensor(
    instance: HardInstance,
    x: np.ndarray,
    order: int,
    budget: MCBudget,
    h: float,
) -> tuple[np.ndarray, float]:
    """Order-j derivative tensor in basis coordinates by nested central
    differences of the gradient estimator, sharing one stream seed so
    all evaluations use common random numbers."""
    params = instance.params
    r = instance.smoothing_dim
    if order == 1:
        return _gradient_coords_mc(instance, x, budget)
    slabs = []
    sub_err = 0.0
    for axis in range(r):
        step = h * instance.basis.matrix[axis]
        plus, e_plus = _fd_tensor(instance, x + step, order - 1, budget, h)
        minus, e_minus = _fd_tensor(instance, x - step, order - 1, budget, h)
        slabs.append((plus - minus) / (2.0 * h))
        sub_err = max(sub_err, e_plus, e_minus)
    tensor = np.stack(slabs, axis=0)
    # symmetrize over axis permutations
    if order == 2:
        tensor = 0.5 * (tensor + tensor.T)
    elif order > 2:
        from itertools import permutations

        perms = list(permutations(range(order)))
        tensor = sum(np.transpose(tensor, p) for p in perms) / len(perms)
    err = 2.0 * sub_err / h + (h * h / 6.0) * (r / params.delta) ** (order + 1)
    return tensor, err


def oracle_answer(
    instance: HardInstance,
    x: np.ndarray,
    order: int | None = None,
    budget: MCBudget | None = None,
) -> OracleResponse:
    """Full derivative-oracle answer at x, normalized by norm_denom.

    Exact-affine queries are answered in closed form (the smoothing of a
    single affine piece is that piece, so higher orders vanish); others
    fall back to Monte Carlo with the given budget (value uses
    n_samples, gradient 2*n_samples, both on streams derived from the
    budget seed).
    """
    params = instance.params
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) > 1.0 + QUERY_NORM_SLACK:
        raise ValueError(f"query outside the unit ball: ||x|| = {np.linalg.norm(x)}")
    k = params.k if order is None else order
    if not 1 <= k <= params.k:
        raise ValueError(f"order must lie in [1, {params.k}]")
    denom = params.norm_denom
    idx = locally_affine_index(instance, x)
    if idx is not None:
        piece = instance.pieces[idx - 1]
        value = (np.dot(piece.a, x) + piece.shift) / denom
        higher = tuple(HigherDerivative(j, is_zero=True) for j in range(2, k + 1))
        return OracleResponse(
            value=float(value),
            gradient=piece.a / denom,
            higher=higher,
            regime=EXACT_AFFINE,
            affine_index=idx,
            value_stderr=0.0,
            gradient_error=0.0,
        )
    budget = budget or MCBudget()
    value, stderr = smoothed_value_mc(
        instance, x, MCBudget(budget.n_samples, child_seed(budget.seed, "value"))
    )
    grad_budget = MCBudget(2 * budget.n_samples, child_seed(budget.seed, "gradient"))
    coords, gerr = _gradient_coords_mc(instance, x, grad_budget)
    higher = []
    h = FD_STEP_FRACTION * params.delta
    fd_budget = MCBudget(2 * budget.n_samples, child_seed(budget.seed, "fd"))
    for j in range(2, k + 1):
        tensor, terr = _fd_tensor(instance, x, j, fd_budget, h)
        higher.append(
            HigherDerivative(j, is_zero=False, tensor=tensor / denom, error_bound=terr / denom)
        )
    return OracleResponse(
        value=value / denom,
        gradient=instance.basis.lift(coords) / denom,
        higher=tuple(higher),
        regime=MONTE_CARLO,
        affine_index=None,
        value_stderr=stderr / denom,
        gradient_error=gerr / denom,
        basis_matrix=instance.basis.matrix if higher else None,
    )


def rescale_to_smoothness(L_target: float, k: int, T: int) -> float:
    """Multiplier s = L / ((10 k)^k T^(2.5 k)).

    Scaling every oracle output by s gives a function whose order-k
    smoothness coefficient is at most L_target, with suboptimality floor
    s / (2 sqrt(T)).
    """
    if L_target <= 0:
        raise ValueError("L_target must be positive")
    return L_target / ((10.0 * k) ** k * T ** (2.5 * k))


def suboptimality_certificate(
    instance: HardInstance, x: np.ndarray, allow_partial: bool = False
) -> float:
    """Closed-form certified lower bound on the normalized gap between
    the smoothed value at x and its minimum over the unit ball:

        [ f_tilde(x) + 1/sqrt(r) - gamma - 2 k delta ] / norm_denom.

    The smoothed value sits within k*delta of f_tilde, and the witness
    point -sum(a_i)/sqrt(r) caps the minimum at -1/sqrt(r)+gamma+k*delta,
    so no sampling enters the certificate. Requires the full T pieces
    unless allow_partial (then r is the actual piece count).
    """
    params = instance.params
    r = instance.num_pieces
    if r == 0:
        raise ValueError("instance has no pieces")
    if r < params.T and not allow_partial:
        raise ValueError(
            f"certificate needs a completed instance (r = {r} < T = {params.T})"
        )
    f_tilde = piece_values(instance, x).f_tilde
    raw = f_tilde + 1.0 / math.sqrt(r) - params.gamma - 2.0 * params.k * params.delta
    return raw / params.norm_denom
