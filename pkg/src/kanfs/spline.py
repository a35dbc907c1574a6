"""Clamped B-spline bases: knot construction, Cox-de Boor evaluation, derivatives.

All evaluation routines clamp their input to the knot domain, so values
outside ``[lo, hi]`` reuse the boundary basis and their derivative is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Nondecreasing knot sequence with ``degree + 1`` repeated knots at each end."""

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).copy()
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        p = int(self.degree)
        if p < 0:
            raise ValueError(f"degree must be nonnegative, got {p}")
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise ValueError("knot vector too short for the requested degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if not (np.all(knots[: p + 1] == knots[0]) and np.all(knots[-(p + 1):] == knots[-1])):
            raise ValueError("knot vector is not clamped")
        if knots[0] >= knots[-1]:
            raise ValueError("knot domain has zero width")

    @property
    def lo(self) -> float:
        return float(self.knots[0])

    @property
    def hi(self) -> float:
        return float(self.knots[-1])

    @property
    def n_basis(self) -> int:
        return self.knots.size - self.degree - 1

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __repr__(self):
        return f"KnotVector(degree={self.degree}, K={self.n_basis}, domain=[{self.lo:g}, {self.hi:g}])"


@dataclass(frozen=True)
class BasisEval:
    x: float
    values: np.ndarray
    derivatives: np.ndarray


def build_knots(lo: float, hi: float, grid_size: int, degree: int) -> KnotVector:
    """Clamped uniform knots over ``[lo, hi]`` with ``grid_size`` intervals.

    The resulting basis has ``grid_size + degree`` functions.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise ValueError(f"invalid range: lo={lo} must be < hi={hi}")
    if grid_size < 1:
        raise ValueError(f"invalid size: grid_size={grid_size} must be >= 1")
    if degree < 0:
        raise ValueError(f"invalid size: degree={degree} must be >= 0")
    interior = np.linspace(lo, hi, grid_size + 1)
    knots = np.concatenate([np.full(degree, lo), interior, np.full(degree, hi)])
    return KnotVector(knots, degree)


def knots_for_column(x: np.ndarray, grid_size: int = 5, degree: int = 3) -> KnotVector:
    """Knots spanning the observed range of ``x``; a constant column gets a unit-wide domain."""
    x = np.asarray(x, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return build_knots(lo, hi, grid_size, degree)


def basis_functions(kv: KnotVector, x, derivative: bool = True):
    """Evaluate all basis functions (and optionally derivatives) at each point of ``x``.

    Returns arrays of shape ``(len(x), K)``.
    """
    t = kv.knots
    p = kv.degree
    x_raw = np.atleast_1d(np.asarray(x, dtype=float))
    x = np.clip(x_raw, t[0], t[-1])
    L = t.size

    # degree 0: half-open spans, the last nonempty span is closed on the right
    N = ((t[None, :-1] <= x[:, None]) & (x[:, None] < t[None, 1:])).astype(float)
    last = np.nonzero(t[:-1] < t[1:])[0][-1]
    at_hi = x >= t[-1]
    if np.any(at_hi):
        N[at_hi] = 0.0
        N[at_hi, last] = 1.0

    N_lower = None
    for q in range(1, p + 1):
        i = np.arange(L - 1 - q)
        den_l = t[i + q] - t[i]
        den_r = t[i + q + 1] - t[i + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(den_l > 0, (x[:, None] - t[i]) / den_l, 0.0)
            b = np.where(den_r > 0, (t[i + q + 1] - x[:, None]) / den_r, 0.0)
        N_lower = N
        N = a * N[:, :-1] + b * N[:, 1:]

    if not derivative:
        return N
    if p == 0:
        dN = np.zeros_like(N)
    else:
        i = np.arange(L - p - 1)
        den_l = t[i + p] - t[i]
        den_r = t[i + p + 1] - t[i + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            cl = np.where(den_l > 0, p / den_l, 0.0)
            cr = np.where(den_r > 0, p / den_r, 0.0)
        dN = cl * N_lower[:, :-1] - cr * N_lower[:, 1:]
    outside = (x_raw < t[0]) | (x_raw > t[-1])
    if np.any(outside):
        dN[outside] = 0.0
    return N, dN


def eval_basis(kv: KnotVector, x: float) -> BasisEval:
    values, derivs = basis_functions(kv, [x])
    return BasisEval(float(x), values[0], derivs[0])


def _check_shared_basis(kvs: Sequence[KnotVector], X: np.ndarray) -> int:
    if X.ndim != 2 or X.shape[1] != len(kvs):
        raise ValueError(
            f"dimension mismatch: {len(kvs)} knot vectors for X of shape {X.shape}")
    sizes = {kv.n_basis for kv in kvs}
    if len(sizes) != 1:
        raise ValueError(f"all features must share the basis size, got {sorted(sizes)}")
    return sizes.pop()


def basis_tensor(kvs: Sequence[KnotVector], X, derivative: bool = True):
    """Per-feature basis values as an ``(n, d, K)`` tensor (plus derivatives)."""
    X = np.asarray(X, dtype=float)
    K = _check_shared_basis(kvs, X)
    n, d = X.shape
    B = np.empty((n, d, K))
    dB = np.empty((n, d, K)) if derivative else None
    for j, kv in enumerate(kvs):
        if derivative:
            B[:, j], dB[:, j] = basis_functions(kv, X[:, j])
        else:
            B[:, j] = basis_functions(kv, X[:, j], derivative=False)
    return (B, dB) if derivative else B


def expand_batch(kvs: Sequence[KnotVector], X) -> np.ndarray:
    """Concatenated basis expansion ``[b_1(X_1) | ... | b_d(X_d)]`` of shape ``(n, d*K)``."""
    B = basis_tensor(kvs, X, derivative=False)
    n, d, K = B.shape
    return B.reshape(n, d * K)
