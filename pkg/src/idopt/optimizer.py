"""The iterative loop: sample, fit, differentiate the box mean, step."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domain import (Adam, BoxDomain, FeatureSchema, ObjectiveMode,
                     OptimizerConfig, PenaltyWeights, SchemaError, apply_constraints,
                     free_mask)
from .objective import REPORT_TERMS, evaluate
from .surrogate import QuadraticSurrogate, fit, n_coefficients, sample_box

logger = logging.getLogger(__name__)


class NonFiniteEvaluation(RuntimeError):
    pass


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, settings: Adam = Adam()) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, settings.beta1, settings.beta2, settings.eps)


def ascend_step(params, grad, state: Optional[AdamState], lr: float, mask):
    """One ascent step on the masked entries of ``params``.

    With ``state=None`` this is plain gradient ascent. Otherwise it is an Adam
    step moving along ``+m_hat / (sqrt(v_hat) + eps)``; moments of masked-out
    entries are left untouched. Returns ``(new_params, state)``.
    """
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not (params.shape == grad.shape == mask.shape):
        raise ValueError("params, grad and mask must have the same shape")
    out = params.copy()
    if state is None:
        out[mask] += lr * grad[mask]
        return out, None

    state.step_count += 1
    g = grad[mask]
    state.m[mask] = state.beta1 * state.m[mask] + (1.0 - state.beta1) * g
    state.v[mask] = state.beta2 * state.v[mask] + (1.0 - state.beta2) * g * g
    m_hat = state.m[mask] / (1.0 - state.beta1 ** state.step_count)
    v_hat = state.v[mask] / (1.0 - state.beta2 ** state.step_count)
    out[mask] += lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out, state


@dataclass
class Record:
    iteration: int
    objective: float
    mean: float
    terms: dict
    centers: np.ndarray
    half_lengths: np.ndarray
    surrogate: Optional[QuadraticSurrogate] = None


@dataclass
class Trajectory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        if name in ("objective", "mean", "iteration"):
            return np.array([getattr(r, name) for r in self.records])
        return np.array([r.terms[name] for r in self.records])

    @property
    def centers(self) -> np.ndarray:
        return np.array([r.centers for r in self.records])

    @property
    def half_lengths(self) -> np.ndarray:
        return np.array([r.half_lengths for r in self.records])

    def header(self) -> list:
        dim = self.records[0].centers.size if self.records else 0
        return (["iter", "objective", "mean", *REPORT_TERMS]
                + [f"c_{i}" for i in range(dim)] + [f"s_{i}" for i in range(dim)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for r in self.records:
            row = [r.iteration, r.objective, r.mean, *(r.terms[t] for t in REPORT_TERMS),
                   *r.centers, *r.half_lengths]
            writer.writerow([repr(float(v)) if not isinstance(v, int) else v for v in row])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def random_domain(schema: FeatureSchema, rng: np.random.Generator,
                  spread: float = 0.5, half_length: float = 0.5) -> BoxDomain:
    """Centers uniform in ``[-spread, spread]``, every half-length equal."""
    n = schema.size
    return BoxDomain(rng.uniform(-spread, spread, size=n), np.full(n, half_length))


def evaluate_batch(f: Callable, X: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on every row of ``X`` and reject non-finite outputs."""
    if hasattr(f, "evaluate"):
        y = np.asarray(f.evaluate(X), dtype=float).reshape(-1)
    else:
        y = np.array([float(f(x)) for x in X])
    if y.size != X.shape[0]:
        raise ValueError(f"black box returned {y.size} values for {X.shape[0]} inputs")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        i = bad[0]
        raise NonFiniteEvaluation(f"black box returned {y[i]} at input {X[i].tolist()}")
    return y


def run(f, schema: FeatureSchema, cfg: OptimizerConfig, weights: PenaltyWeights,
        mode: ObjectiveMode, init: Optional[BoxDomain] = None,
        keep_surrogates: bool = False):
    """Optimize a box domain for ``f``; returns ``(final domain, Trajectory)``.

    ``f`` is either an object with a batch ``evaluate(X)`` method (see
    :mod:`idopt.models`) or a plain callable on a single point. When ``init``
    is None the free dims start from :func:`random_domain` seeded by
    ``cfg.seed``.
    """
    rng = np.random.default_rng(cfg.seed)
    if init is None:
        init = random_domain(schema, rng)
    if init.size != schema.size:
        raise SchemaError(f"initial domain has {init.size} dims, schema has {schema.size}")
    free = free_mask(schema)
    domain = apply_constraints(_clamp(init, free, cfg.sigma_min), schema, cfg.sigma_min)

    p = n_coefficients(schema.size)
    if cfg.sample_count < p:
        logger.warning("K=%d samples for %d surrogate coefficients; the fit relies on ridge=%g",
                       cfg.sample_count, p, cfg.ridge)

    mask = np.concatenate([free, free])
    state = AdamState.zeros(mask.size, cfg.optimizer) if isinstance(cfg.optimizer, Adam) else None
    traj = Trajectory()
    for t in range(1, cfg.iterations + 1):
        X = sample_box(domain, schema, cfg.sample_count, rng)
        y = evaluate_batch(f, X)
        s = fit(X, y, cfg.ridge)
        rep = evaluate(s, domain, schema, weights, mode)
        traj.records.append(Record(
            iteration=t, objective=rep.value, mean=float(y.mean()),
            terms={k: getattr(rep, k) for k in REPORT_TERMS},
            centers=domain.centers.copy(), half_lengths=domain.half_lengths.copy(),
            surrogate=s if keep_surrogates else None,
        ))
        params, state = ascend_step(domain.params(), rep.grad, state, cfg.learning_rate, mask)
        domain = apply_constraints(_clamp(BoxDomain.from_params(params), free, cfg.sigma_min),
                                   schema, cfg.sigma_min)
    return domain, traj


def _clamp(domain: BoxDomain, free: np.ndarray, sigma_min: float) -> BoxDomain:
    s = domain.half_lengths.copy()
    s[free] = np.maximum(s[free], sigma_min)
    return BoxDomain(domain.centers, s)


def read_trajectory_csv(path) -> Trajectory:
    """Parse a trajectory CSV written by :meth:`Trajectory.write_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: no records") from None
        fixed = ["iter", "objective", "mean", *REPORT_TERMS]
        if header[:len(fixed)] != fixed or (len(header) - len(fixed)) % 2:
            raise ValueError(f"{path}:1: not a trajectory header")
        dim = (len(header) - len(fixed)) // 2
        traj = Trajectory()
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row[1:]]
                it = int(row[0])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            n = len(REPORT_TERMS)
            traj.records.append(Record(
                iteration=it, objective=vals[0], mean=vals[1],
                terms=dict(zip(REPORT_TERMS, vals[2:2 + n])),
                centers=np.array(vals[2 + n:2 + n + dim]),
                half_lengths=np.array(vals[2 + n + dim:]),
            ))
    if not traj.records:
        raise ValueError(f"{path}: no records")
    return traj
