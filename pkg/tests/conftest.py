import numpy as np
import pytest

from resistor.geometry import OrthonormalBasis
from resistor.instance import DETERMINISTIC, HardInstance, InstanceParams


def unit(d: int, i: int) -> np.ndarray:
    e = np.zeros(d)
    e[i] = 1.0
    return e


@pytest.fixture
def plane_instance() -> HardInstance:
    """Two orthonormal pieces e1, e2 with gamma=0.1, m=2, k=1, delta=0.01.

    Shifts are 0.05 and 0.0; the near-tie band 2*k*delta is 0.02.
    """
    params = InstanceParams(
        T=2, k=1, m=2, d=3, gamma=0.1, delta=0.01, mode=DETERMINISTIC, norm_denom=1.0
    )
    basis = OrthonormalBasis(np.vstack([unit(3, 0), unit(3, 1)]))
    return HardInstance.from_basis(params, basis)


def abs_instance(params) -> HardInstance:
    """Two-piece |a.x| fixture: pieces {a, -a}, zero shifts, 1-dim span."""
    a = unit(params.d, 0)
    return HardInstance.custom(params, np.vstack([a, -a]), [0.0, 0.0])


def fd_gradient_crn(
    instance: HardInstance, x: np.ndarray, h: float, n: int, seed: int
) -> tuple[np.ndarray, float]:
    """Independent gradient oracle: central finite differences of a
    hand-rolled smoothed-value Monte Carlo, common random numbers across
    the +/- evaluations.

    Deliberately avoids the library's estimators and streams: own RNG,
    own ball sampler, own (vectorized) max-affine arithmetic. Truncation
    error is O((r/delta) h) per coordinate; noise is O(1/sqrt(n)) per
    coordinate thanks to the shared samples.
    """
    params = instance.params
    r = instance.smoothing_dim
    rng = np.random.default_rng(seed)
    total = np.zeros((n, r))
    for _ in range(params.k):
        g = rng.standard_normal((n, r))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        total += g * rng.random((n, 1)) ** (1.0 / r)
    pieces = instance.piece_matrix
    shifts = instance.piece_shifts
    basis = instance.basis.matrix
    proj = params.delta * (total @ (pieces @ basis.T).T)  # (n, pieces)
    grad = np.zeros(r)
    errs = np.zeros(r)
    for axis in range(r):
        base_p = pieces @ (x + h * basis[axis]) + shifts
        base_m = pieces @ (x - h * basis[axis]) + shifts
        quot = ((base_p[None, :] + proj).max(axis=1) - (base_m[None, :] + proj).max(axis=1)) / (2.0 * h)
        grad[axis] = quot.mean()
        errs[axis] = quot.std(ddof=1) / np.sqrt(n)
    return basis.T @ grad, float(np.sqrt((errs**2).sum()))
