"""Hard-instance description: parameter schedules, affine pieces with
decreasing shifts, and the closed-form bounds used as certificates.

An instance is a set of unit directions a_i with shifts (1 - i/m)*gamma
defining the shifted max-affine function, plus the orthonormal basis of
the subspace the smoothing averages over.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from .geometry import (
    DEGENERACY_TOL,
    OrthonormalBasis,
    Vector,
    arbitrary_perp_unit,
    orthonormal_extend,
)

DETERMINISTIC = "deterministic"
RANDOMIZED = "randomized"

# Queries live in the closed unit ball; this is the feasibility slack.
QUERY_NORM_SLACK = 1e-9
PIECE_UNIT_TOL = 1e-10
PIECE_SPAN_TOL = 1e-8


@dataclass(frozen=True)
class InstanceParams:
    """Scalar configuration of one hard instance.

    T: query budget; k: derivative order; m: shift denominator (equal to
    T in both standard modes); d: ambient dimension; gamma: shift scale;
    delta: smoothing radius; norm_denom: divisor applied to all oracle
    outputs (the maximum of the shifted max-affine function over the
    unit ball in deterministic mode, 1 in randomized mode).
    """

    T: int
    k: int
    m: int
    d: int
    gamma: float
    delta: float
    mode: str = DETERMINISTIC
    norm_denom: float = 1.0
    fail_prob: float | None = None

    @property
    def floor(self) -> float:
        """Certified suboptimality floor 1/(2 sqrt(T)) for every query."""
        return 1.0 / (2.0 * math.sqrt(self.T))


def certified_floor_margin(params: InstanceParams) -> float:
    """Worst-query slack of the closed-form gap certificate over the floor.

    The certificate at query i is at least
        [(1 - i/m) gamma + 1/sqrt(T) - gamma - 2 k delta] / norm_denom,
    worst at i = T; randomized mode loses a further 1/(20 T^1.5) under
    the low-correlation event. Non-negative margin means every queried
    point is certifiably 1/(2 sqrt(T)) suboptimal.
    """
    worst = 1.0 / math.sqrt(params.T) - params.gamma - 2.0 * params.k * params.delta
    if params.mode == RANDOMIZED:
        worst -= 1.0 / (20.0 * params.T**1.5)
    return worst / params.norm_denom - params.floor


def params_deterministic(T: int, k: int, d: int | None = None) -> InstanceParams:
    """Deterministic-mode schedule: gamma = 1/(3 sqrt(T)), delta = gamma/(3 k T).

    d defaults to T + 1 and may only be raised. Rejects budgets whose
    closed-form certificate cannot clear the 1/(2 sqrt(T)) floor.
    """
    if T < 1 or k < 1:
        raise ValueError("T and k must be positive integers")
    gamma = 1.0 / (3.0 * math.sqrt(T))
    delta = gamma / (3.0 * k * T)
    if d is None:
        d = T + 1
    if d <= T:
        raise ValueError(f"deterministic mode needs d > T, got d={d}, T={T}")
    params = InstanceParams(
        T=T,
        k=k,
        m=T,
        d=d,
        gamma=gamma,
        delta=delta,
        mode=DETERMINISTIC,
        norm_denom=1.0 + (1.0 - 1.0 / T) * gamma,
    )
    if certified_floor_margin(params) < 0:
        raise ValueError(
            f"T={T} cannot certify the 1/(2*sqrt(T)) floor "
            f"(margin {certified_floor_margin(params):.3e} < 0)"
        )
    return params


def randomized_dimension(T: int, fail_prob: float) -> int:
    """Smallest d with T * exp(-(1/(20 T^1.5))^2 (d - T)/2) <= fail_prob / T."""
    return T + math.ceil(800.0 * T**3 * math.log(T * T / fail_prob))


def params_randomized(T: int, k: int, fail_prob: float) -> InstanceParams:
    """Randomized-mode schedule: gamma = 1/(3 sqrt(T)), delta = 1/(20 k T^1.5).

    The ambient dimension is the smallest integer that pushes the
    union bound over the basis-query correlations below fail_prob.
    """
    if T < 1 or k < 1:
        raise ValueError("T and k must be positive integers")
    if not 0.0 < fail_prob < 1.0:
        raise ValueError("fail_prob must lie in (0, 1)")
    gamma = 1.0 / (3.0 * math.sqrt(T))
    delta = 1.0 / (20.0 * k * T**1.5)
    params = InstanceParams(
        T=T,
        k=k,
        m=T,
        d=randomized_dimension(T, fail_prob),
        gamma=gamma,
        delta=delta,
        mode=RANDOMIZED,
        norm_denom=1.0,
        fail_prob=fail_prob,
    )
    if certified_floor_margin(params) < 0:
        raise ValueError(f"T={T} cannot certify the 1/(2*sqrt(T)) floor")
    return params


def shift_of(params: InstanceParams, i: int) -> float:
    """Shift of the i-th piece: (1 - i/m) * gamma, strictly decreasing in i."""
    if not 1 <= i <= params.m:
        raise ValueError(f"piece index {i} out of range [1, {params.m}]")
    return (1.0 - i / params.m) * params.gamma


def validate(params: InstanceParams) -> list[str]:
    """Named inequality violations; empty iff the params are usable."""
    v: list[str] = []
    if params.gamma <= 0:
        v.append("gamma > 0 violated")
    if params.delta <= 0:
        v.append("delta > 0 violated")
    if params.m < 1 or params.T < 1 or params.k < 1:
        v.append("T, k, m must be positive")
        return v
    lhs = 2.0 * params.k * params.delta
    rhs = params.gamma / params.m
    if lhs > rhs:
        v.append(f"2k*delta <= gamma/m violated: {lhs:.6g} > {rhs:.6g}")
    if params.mode == DETERMINISTIC:
        if params.d <= params.T:
            v.append("d > T violated")
    elif params.mode == RANDOMIZED:
        margin = lhs + 1.0 / (10.0 * params.T**1.5)
        cap = params.gamma / params.T
        if margin >= cap:
            v.append(
                f"2k*delta + 1/(10*T^1.5) < gamma/T violated: {margin:.6g} >= {cap:.6g}"
            )
        if params.fail_prob is None or not 0.0 < params.fail_prob < 1.0:
            v.append("fail_prob in (0, 1) required in randomized mode")
        else:
            dmin = randomized_dimension(params.T, params.fail_prob)
            if params.d < dmin:
                v.append(f"d >= {dmin} violated: d = {params.d}")
    else:
        v.append(f"unknown mode {params.mode!r}")
    if not v and certified_floor_margin(params) < 0:
        v.append(
            "floor 1/(2*sqrt(T)) not certifiable: worst-query margin "
            f"{certified_floor_margin(params):.6g} < 0"
        )
    return v


@dataclass(frozen=True)
class AffinePiece:
    """One affine piece a.x + shift of the max; a is a unit vector."""

    index: int
    a: np.ndarray
    shift: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).copy()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > PIECE_UNIT_TOL:
            raise ValueError(f"piece direction must be unit, ||a|| = {norm}")


@dataclass(frozen=True)
class HardInstance:
    """Pieces plus the orthonormal basis of the subspace they span.

    The smoothing averages over the basis span, so its size (not the
    piece count) is the smoothing dimension. Standard instances built
    by append_piece or from_basis have pieces equal to the basis rows.
    """

    params: InstanceParams
    pieces: tuple[AffinePiece, ...]
    basis: OrthonormalBasis

    def __post_init__(self):
        for piece in self.pieces:
            residual = piece.a - self.basis.lift(self.basis.coords(piece.a))
            if np.linalg.norm(residual) > PIECE_SPAN_TOL:
                raise ValueError(
                    f"piece {piece.index} does not lie in the basis span "
                    f"(residual {np.linalg.norm(residual):.3e})"
                )

    @property
    def num_pieces(self) -> int:
        return len(self.pieces)

    @property
    def smoothing_dim(self) -> int:
        return len(self.basis)

    @property
    def complete(self) -> bool:
        return self.num_pieces == self.params.T

    @cached_property
    def piece_matrix(self) -> np.ndarray:
        return np.array([p.a for p in self.pieces])

    @cached_property
    def piece_shifts(self) -> np.ndarray:
        return np.array([p.shift for p in self.pieces])

    @cached_property
    def piece_coords(self) -> np.ndarray:
        """Piece directions in basis coordinates, shape (pieces, smoothing_dim)."""
        return np.array([self.basis.coords(p.a) for p in self.pieces])

    @classmethod
    def empty(cls, params: InstanceParams) -> "HardInstance":
        return cls(params, (), OrthonormalBasis.empty(params.d))

    @classmethod
    def from_basis(cls, params: InstanceParams, basis: OrthonormalBasis) -> "HardInstance":
        """All pieces fixed up front from an orthonormal basis (one per row)."""
        if len(basis) > params.T:
            raise ValueError("basis has more vectors than the budget T")
        pieces = tuple(
            AffinePiece(index=i + 1, a=row, shift=shift_of(params, i + 1))
            for i, row in enumerate(basis.matrix)
        )
        return cls(params, pieces, basis)

    @classmethod
    def custom(
        cls,
        params: InstanceParams,
        directions: np.ndarray,
        shifts: np.ndarray,
    ) -> "HardInstance":
        """Hand-built fixture (directions need not be orthonormal).

        The smoothing basis is the Gram-Schmidt span of the directions.
        Used for analytic test cases such as the two-piece |a.x| function;
        adversarial instances never go through here.
        """
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        shifts = np.asarray(shifts, dtype=float)
        if directions.shape[0] != shifts.shape[0]:
            raise ValueError("one shift per direction required")
        basis = OrthonormalBasis.empty(params.d)
        for row in directions:
            basis, _ = orthonormal_extend(basis, row)
        pieces = tuple(
            AffinePiece(index=i + 1, a=row, shift=float(s))
            for i, (row, s) in enumerate(zip(directions, shifts))
        )
        return cls(params, pieces, basis)


def append_piece(
    instance: HardInstance, x: Vector, rng: np.random.Generator
) -> HardInstance:
    """New instance with one more piece built from the query x.

    The direction is the normalized component of x perpendicular to the
    current basis; a degenerate x (already in the span) gets a random
    perpendicular unit vector from rng instead.
    """
    params = instance.params
    if instance.num_pieces >= params.T:
        raise ValueError(f"piece budget exhausted (T = {params.T})")
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) > 1.0 + QUERY_NORM_SLACK:
        raise ValueError(f"query outside the unit ball: ||x|| = {np.linalg.norm(x)}")
    basis, unit = orthonormal_extend(instance.basis, x, DEGENERACY_TOL)
    if unit is None:
        unit = arbitrary_perp_unit(instance.basis, rng)
        basis = OrthonormalBasis(
            np.vstack([instance.basis.matrix, unit]), instance.basis.tol
        )
    idx = instance.num_pieces + 1
    piece = AffinePiece(index=idx, a=unit, shift=shift_of(params, idx))
    return HardInstance(params, instance.pieces + (piece,), basis)


def pessimal_point(instance: HardInstance) -> tuple[Vector, float]:
    """The witness point -sum(a_i)/sqrt(r) and the certified upper bound
    (-1/sqrt(r) + gamma + k*delta)/norm_denom on the normalized minimum."""
    r = instance.num_pieces
    if r == 0:
        raise ValueError("instance has no pieces")
    params = instance.params
    xhat = -instance.piece_matrix.sum(axis=0) / math.sqrt(r)
    bound = (-1.0 / math.sqrt(r) + params.gamma + params.k * params.delta)
    return xhat, bound / params.norm_denom


def to_json(instance: HardInstance) -> str:
    """Serialize as {params, pieces:[{index, shift, a:[...]}]}.

    Coordinates go through Python's shortest-repr floats, which
    round-trip binary64 exactly.
    """
    doc = {
        "params": asdict(instance.params),
        "pieces": [
            {"index": p.index, "shift": p.shift, "a": p.a.tolist()}
            for p in instance.pieces
        ],
    }
    return json.dumps(doc)


def from_json(text: str) -> HardInstance:
    doc = json.loads(text)
    params = InstanceParams(**doc["params"])
    pieces = tuple(
        AffinePiece(index=p["index"], a=np.array(p["a"], dtype=float), shift=p["shift"])
        for p in sorted(doc["pieces"], key=lambda p: p["index"])
    )
    rows = np.array([p.a for p in pieces])
    candidate = OrthonormalBasis(rows) if len(pieces) else OrthonormalBasis.empty(params.d)
    if not candidate.violations():
        basis = candidate
    else:
        basis = OrthonormalBasis.empty(params.d)
        for row in rows:
            basis, _ = orthonormal_extend(basis, row)
    return HardInstance(params, pieces, basis)
