"""Closed-form mean of a quadratic over a box and its gradient.

Integrating each monomial over ``prod [c_k - s_k, c_k + s_k]`` gives a factor
``prod 2 s_k`` times

    1            -> 1
    x_i          -> c_i
    x_i x_j      -> c_i c_j           (i != j)
    x_i^2        -> c_i^2 + s_i^2 / 3

so dividing by the box volume leaves a polynomial in (c, s) with no volume
term at all. Everything here works with that normalized mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import BoxDomain, SchemaError
from .surrogate import QuadraticSurrogate


@dataclass(frozen=True)
class MeanAndGrad:
    mean: float
    d_center: np.ndarray
    d_half: np.ndarray


def _check(s: QuadraticSurrogate, domain: BoxDomain):
    if s.dim != domain.size:
        raise SchemaError(f"surrogate has {s.dim} dims, domain has {domain.size}")
    if np.any(domain.half_lengths <= 0):
        raise SchemaError("half-lengths must be positive")


def box_mean(s: QuadraticSurrogate, domain: BoxDomain) -> float:
    _check(s, domain)
    c, sig = domain.centers, domain.half_lengths
    diag = np.diag(s.quad)
    return float(s.constant + s.linear @ c + c @ s.quad @ c + diag @ (sig * sig) / 3.0)


def box_mean_grad(s: QuadraticSurrogate, domain: BoxDomain) -> MeanAndGrad:
    _check(s, domain)
    c, sig = domain.centers, domain.half_lengths
    sym = s.quad + s.quad.T  # diagonal doubled, off-diagonal mirrored
    return MeanAndGrad(
        mean=box_mean(s, domain),
        d_center=s.linear + sym @ c,
        d_half=(2.0 / 3.0) * np.diag(s.quad) * sig,
    )
