"""Degree-2 polynomial surrogate fitted to uniform samples of a box."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .domain import BoxDomain, FeatureSchema, FixedValue

logger = logging.getLogger(__name__)


class SurrogateFitError(np.linalg.LinAlgError):
    pass


def n_coefficients(dim: int) -> int:
    return 1 + dim + dim * (dim + 1) // 2


@dataclass(frozen=True)
class QuadraticSurrogate:
    """``g(x) = constant + linear . x + sum_{i<=j} quad[i, j] x_i x_j``.

    ``quad`` is upper triangular; entries below the diagonal are zero and
    never read.
    """

    constant: float
    linear: np.ndarray
    quad: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.linear, dtype=float).reshape(-1)
        b = np.triu(np.asarray(self.quad, dtype=float))
        if b.shape != (a.size, a.size):
            raise ValueError(f"quad must be {a.size}x{a.size}, got {b.shape}")
        object.__setattr__(self, "linear", a)
        object.__setattr__(self, "quad", b)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def dim(self) -> int:
        return self.linear.size

    @classmethod
    def from_vector(cls, w, dim: int) -> "QuadraticSurrogate":
        """Inverse of :meth:`to_vector`; ``w`` uses the design-matrix column order."""
        w = np.asarray(w, dtype=float)
        if w.size != n_coefficients(dim):
            raise ValueError(f"expected {n_coefficients(dim)} coefficients, got {w.size}")
        quad = np.zeros((dim, dim))
        quad[np.triu_indices(dim)] = w[1 + dim:]
        return cls(w[0], w[1:1 + dim], quad)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.constant], self.linear, self.quad[np.triu_indices(self.dim)]])

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.constant + X @ self.linear + np.einsum("ki,ij,kj->k", X, self.quad, X)

    def __neg__(self) -> "QuadraticSurrogate":
        return QuadraticSurrogate(-self.constant, -self.linear, -self.quad)

    def to_json(self) -> dict:
        return {"constant": self.constant, "linear": self.linear.tolist(),
                "quad": self.quad.tolist()}


def sample_box(domain: BoxDomain, schema: FeatureSchema, k: int,
               rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` points uniformly from the box; FixedValue dims are exact."""
    X = rng.uniform(domain.lower, domain.upper, size=(k, domain.size))
    for i, d in enumerate(schema.dims):
        if isinstance(d.constraint, FixedValue):
            X[:, i] = d.constraint.value
    return X


def design_matrix(X) -> np.ndarray:
    """Columns ``[1, x_1..x_D, x_i x_j for i <= j in lexicographic order]``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    iu, ju = np.triu_indices(X.shape[1])
    return np.hstack([np.ones((X.shape[0], 1)), X, X[:, iu] * X[:, ju]])


def fit(X, y, ridge: float = 1e-6) -> QuadraticSurrogate:
    """Ridge least-squares fit of the quadratic; the intercept is not penalized.

    The minimizer of ``|Phi w - y|^2 + ridge |w[1:]|^2`` is computed from the
    augmented system ``[Phi; sqrt(ridge) I'] w = [y; 0]``, which shares the
    normal equations' solution without squaring the condition number.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    k, dim = X.shape
    p = n_coefficients(dim)
    if y.size != k:
        raise ValueError(f"{k} inputs but {y.size} outputs")
    if k < 2:
        raise ValueError("need at least 2 samples")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if ridge == 0 and k < p:
        raise SurrogateFitError(
            f"{k} samples cannot determine {p} coefficients without regularization; use ridge > 0")

    phi = design_matrix(X)
    if ridge > 0:
        reg = np.sqrt(ridge) * np.eye(p)[1:]
        A = np.vstack([phi, reg])
        b = np.concatenate([y, np.zeros(p - 1)])
    else:
        A, b = phi, y
    w, _, rank, _ = scipy.linalg.lstsq(A, b, lapack_driver="gelsd")
    if rank < p:
        raise SurrogateFitError(f"design matrix is rank deficient ({rank} < {p}); use ridge > 0")
    if not np.all(np.isfinite(w)):
        raise SurrogateFitError("non-finite surrogate coefficients")
    return QuadraticSurrogate.from_vector(w, dim)
