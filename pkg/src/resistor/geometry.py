"""Vector substrate: orthonormal bases, incremental Gram-Schmidt, and
uniform sampling on balls and spheres.

Vectors are plain 1-d numpy arrays. Every sampling function takes an
explicit numpy Generator, so reproducibility is controlled entirely by
the caller's stream (see streams.py).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Vector = np.ndarray

ORTHONORMALITY_TOL = 1e-10
# Below this perpendicular norm the normalized direction is numerically
# meaningless, so the extension is treated as degenerate.
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class OrthonormalBasis:
    """Ordered orthonormal vectors, stored as the rows of an (n, d) matrix.

    Immutable after construction; extension returns a new basis.
    """

    matrix: np.ndarray
    tol: float = ORTHONORMALITY_TOL

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("basis matrix must have shape (n, d)")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def empty(cls, dim: int, tol: float = ORTHONORMALITY_TOL) -> "OrthonormalBasis":
        return cls(np.zeros((0, dim)), tol)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def __iter__(self):
        return iter(self.matrix)

    def coords(self, x: Vector) -> Vector:
        """Coordinates of x against this basis (projection onto the span)."""
        return self.matrix @ np.asarray(x, dtype=float)

    def lift(self, coords: Vector) -> Vector:
        """Ambient vector with the given basis coordinates."""
        return self.matrix.T @ np.asarray(coords, dtype=float)

    def violations(self) -> list[str]:
        """Orthonormality defects exceeding tol, as readable strings."""
        out: list[str] = []
        n = len(self)
        if n == 0:
            return out
        gram = self.matrix @ self.matrix.T
        for i in range(n):
            diag = abs(gram[i, i] - 1.0)
            if diag > self.tol:
                out.append(f"| ||u_{i}|| - 1 | = {diag:.3e} > {self.tol:.1e}")
        off = gram - np.diag(np.diag(gram))
        worst = np.abs(off).max() if n > 1 else 0.0
        if worst > self.tol:
            i, j = np.unravel_index(np.abs(off).argmax(), off.shape)
            out.append(f"|<u_{i}, u_{j}>| = {worst:.3e} > {self.tol:.1e}")
        if n > self.dim:
            out.append(f"count {n} exceeds dimension {self.dim}")
        return out


def _check_dim(x: np.ndarray, basis: OrthonormalBasis) -> None:
    if x.shape != (basis.dim,):
        raise ValueError(
            f"dimension mismatch: vector has shape {x.shape}, basis is {basis.dim}-dimensional"
        )


def perp_component(x: Vector, basis: OrthonormalBasis) -> Vector:
    """Component of x orthogonal to the basis span: x - sum_j <x,u_j> u_j."""
    x = np.asarray(x, dtype=float)
    _check_dim(x, basis)
    if len(basis) == 0:
        return x.copy()
    return x - basis.matrix.T @ (basis.matrix @ x)


def orthonormal_extend(
    basis: OrthonormalBasis, x: Vector, degeneracy_tol: float = DEGENERACY_TOL
) -> tuple[OrthonormalBasis, Vector | None]:
    """Append the normalized perpendicular of x, or report degeneracy.

    Returns (basis', unit); unit is None and the basis is unchanged when
    the perpendicular norm is at most degeneracy_tol. The projection is
    applied twice ("twice is enough") so the extended basis stays
    orthonormal to tol even in very high dimension.
    """
    if degeneracy_tol <= 0:
        raise ValueError("degeneracy_tol must be positive")
    p = perp_component(x, basis)
    if np.linalg.norm(p) <= degeneracy_tol:
        return basis, None
    p = perp_component(p, basis)
    norm = np.linalg.norm(p)
    if norm <= degeneracy_tol:
        return basis, None
    unit = p / norm
    extended = OrthonormalBasis(np.vstack([basis.matrix, unit]), basis.tol)
    return extended, unit


def arbitrary_perp_unit(basis: OrthonormalBasis, rng: np.random.Generator) -> Vector:
    """Unit vector orthogonal to the basis span, drawn from rng.

    Deterministic given the stream position. Raises if the basis already
    spans the whole space.
    """
    if len(basis) >= basis.dim:
        raise ValueError("basis already spans the full space")
    for _ in range(16):
        g = rng.standard_normal(basis.dim)
        p = perp_component(perp_component(g, basis), basis)
        norm = np.linalg.norm(p)
        if norm > 1e-8:
            return p / norm
    raise RuntimeError("could not draw a perpendicular direction")


def sample_sphere(r: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform sample(s) on the unit sphere of R^r.

    Returns shape (r,) for size=None, else (size, r). Outputs are
    normalized exactly, so | ||v|| - 1 | is at roundoff level.
    """
    if r < 1:
        raise ValueError("r must be a positive integer")
    n = 1 if size is None else int(size)
    g = rng.standard_normal((n, r))
    norms = np.linalg.norm(g, axis=1)
    while np.any(norms == 0.0):  # probability-zero guard
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), r))
        norms = np.linalg.norm(g, axis=1)
    v = g / norms[:, None]
    return v[0] if size is None else v


def sample_ball(r: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform sample(s) in the closed unit ball of R^r.

    Gaussian direction times a U^(1/r) radius, which works at any r
    (no rejection). Returns shape (r,) for size=None, else (size, r).
    """
    if r < 1:
        raise ValueError("r must be a positive integer")
    n = 1 if size is None else int(size)
    v = sample_sphere(r, rng, size=n)
    radii = rng.random(n) ** (1.0 / r)
    v = v * radii[:, None]
    return v[0] if size is None else v


def random_orthonormal_basis(
    d: int, count: int, rng: np.random.Generator, tol: float = ORTHONORMALITY_TOL
) -> OrthonormalBasis:
    """Gram-Schmidt on i.i.d. Gaussian vectors: a rotation-invariant
    random orthonormal set of `count` vectors in R^d."""
    if d < count:
        raise ValueError(f"cannot fit {count} orthonormal vectors in dimension {d}")
    basis = OrthonormalBasis.empty(d, tol)
    while len(basis) < count:
        basis, unit = orthonormal_extend(basis, rng.standard_normal(d))
        # a degenerate Gaussian draw has probability zero; just redraw
    return basis
