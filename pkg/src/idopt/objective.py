"""Per-iteration objective: surrogate box mean plus width gain and penalties."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .box_integral import box_mean_grad
from .domain import (BoxDomain, FeatureSchema, Maximize, Minimize, ObjectiveMode,
                     PenaltyWeights, SchemaError, TargetMean, free_mask)
from .surrogate import QuadraticSurrogate

REPORT_TERMS = ("gain_half", "pen_center", "pen_binary", "pen_cat_width", "pen_group_sum")


@dataclass(frozen=True)
class ObjectiveReport:
    value: float
    surrogate_mean: float
    gain_half: float
    pen_center: float
    pen_binary: float
    pen_cat_width: float
    pen_group_sum: float
    grad_center: np.ndarray
    grad_half: np.ndarray

    @property
    def grad(self) -> np.ndarray:
        return np.concatenate([self.grad_center, self.grad_half])


def mode_transform(mean: float, mode: ObjectiveMode):
    """Return ``(value, d value / d mean)`` for the objective mode."""
    if isinstance(mode, Maximize):
        return mean, 1.0
    if isinstance(mode, Minimize):
        return -mean, -1.0
    if isinstance(mode, TargetMean):
        diff = mean - mode.target
        return -diff * diff, -2.0 * diff
    raise SchemaError(f"unknown objective mode {mode!r}")


def penalties(domain: BoxDomain, schema: FeatureSchema, w: PenaltyWeights):
    """Gain and penalty terms with their gradients.

    Returns ``(terms, grad_center, grad_half)`` where ``terms`` maps each name
    in REPORT_TERMS to its (non-negative) magnitude and the gradients are of
    ``gain - sum(penalties)``. Constrained dims contribute nothing; a group
    whose dims are all constrained is skipped, otherwise its sum includes the
    pinned centers as constants.
    """
    if domain.size != schema.size:
        raise SchemaError(f"domain has {domain.size} dims, schema has {schema.size}")
    c, s = domain.centers, domain.half_lengths
    free = free_mask(schema)
    numeric = schema.numeric_mask() & free
    onehot = ~schema.numeric_mask() & free

    gc = np.zeros_like(c)
    gs = np.zeros_like(s)

    gain = w.lam * np.sum(s[numeric] ** 2)
    gs[numeric] += 2.0 * w.lam * s[numeric]

    pen_center = w.beta * np.sum(c[numeric] ** 2)
    gc[numeric] -= 2.0 * w.beta * c[numeric]

    q = c[onehot] * (1.0 - c[onehot])
    pen_binary = w.mu * np.sum(q * q)
    gc[onehot] -= 2.0 * w.mu * q * (1.0 - 2.0 * c[onehot])

    pen_width = w.omega * np.sum(s[onehot] ** 2)
    gs[onehot] -= 2.0 * w.omega * s[onehot]

    pen_sum = 0.0
    for members in schema.groups:
        idx = np.asarray(members)
        active = idx[free[idx]]
        if active.size == 0:
            continue
        excess = c[idx].sum() - 1.0
        pen_sum += w.gamma * excess * excess
        gc[active] -= 2.0 * w.gamma * excess

    terms = {"gain_half": float(gain), "pen_center": float(pen_center),
             "pen_binary": float(pen_binary), "pen_cat_width": float(pen_width),
             "pen_group_sum": float(pen_sum)}
    return terms, gc, gs


def evaluate(s: QuadraticSurrogate, domain: BoxDomain, schema: FeatureSchema,
             w: PenaltyWeights, mode: ObjectiveMode) -> ObjectiveReport:
    mg = box_mean_grad(s, domain)
    value, dmean = mode_transform(mg.mean, mode)
    terms, gc, gs = penalties(domain, schema, w)
    free = free_mask(schema)
    grad_center = np.where(free, dmean * mg.d_center + gc, 0.0)
    grad_half = np.where(free, dmean * mg.d_half + gs, 0.0)
    total = (value + terms["gain_half"] - terms["pen_center"] - terms["pen_binary"]
             - terms["pen_cat_width"] - terms["pen_group_sum"])
    return ObjectiveReport(value=float(total), surrogate_mean=mg.mean,
                           grad_center=grad_center, grad_half=grad_half, **terms)
