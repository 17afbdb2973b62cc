"""Core value types: box domains, feature schemas, constraints and run settings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

SIGMA_MIN = 1e-3


class SchemaError(ValueError):
    """Raised when a schema, domain or configuration is inconsistent."""


# Constraints ---------------------------------------------------------------


@dataclass(frozen=True)
class Free:
    pass


@dataclass(frozen=True)
class FixedValue:
    value: float


@dataclass(frozen=True)
class FixedInterval:
    center: float
    half_length: float

    def __post_init__(self):
        if not self.half_length > 0:
            raise SchemaError(f"FixedInterval half_length must be > 0, got {self.half_length}")


Constraint = Union[Free, FixedValue, FixedInterval]


def constraint_to_json(c: Constraint) -> dict:
    if isinstance(c, FixedValue):
        return {"type": "fixed_value", "value": c.value}
    if isinstance(c, FixedInterval):
        return {"type": "fixed_interval", "center": c.center, "half_length": c.half_length}
    return {"type": "free"}


def constraint_from_json(doc: Optional[dict]) -> Constraint:
    if doc is None:
        return Free()
    kind = doc.get("type", "free")
    if kind == "free":
        return Free()
    if kind == "fixed_value":
        return FixedValue(float(doc["value"]))
    if kind == "fixed_interval":
        return FixedInterval(float(doc["center"]), float(doc["half_length"]))
    raise SchemaError(f"unknown constraint type {kind!r}")


# Schema --------------------------------------------------------------------


@dataclass(frozen=True)
class DimSpec:
    """One coordinate of the search space.

    ``group`` is None for numeric dims and the index of the owning one-hot
    group otherwise. One-hot dims carry the identity normalization.
    """

    name: str
    group: Optional[int] = None
    norm_mean: float = 0.0
    norm_std: float = 1.0
    constraint: Constraint = Free()

    def __post_init__(self):
        if self.group is None and not self.norm_std > 0:
            raise SchemaError(f"dim {self.name!r}: norm_std must be > 0")

    @property
    def is_numeric(self) -> bool:
        return self.group is None

    @property
    def is_free(self) -> bool:
        return isinstance(self.constraint, Free)


@dataclass(frozen=True)
class FeatureSchema:
    dims: tuple
    groups: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        object.__setattr__(self, "groups", tuple(tuple(int(i) for i in g) for g in self.groups))
        seen = set()
        for gid, members in enumerate(self.groups):
            if not members:
                raise SchemaError(f"group {gid} is empty")
            for i in members:
                if not 0 <= i < len(self.dims):
                    raise SchemaError(f"group {gid} references dim {i} outside 0..{len(self.dims) - 1}")
                if i in seen:
                    raise SchemaError(f"dim {i} appears in more than one group")
                seen.add(i)
                if self.dims[i].group != gid:
                    raise SchemaError(f"dim {i} ({self.dims[i].name!r}) is listed in group {gid} "
                                      f"but declares group {self.dims[i].group}")
        for i, d in enumerate(self.dims):
            if d.group is not None and i not in seen:
                raise SchemaError(f"dim {i} ({d.name!r}) declares group {d.group} but is not listed in it")

    @classmethod
    def numeric(cls, n: int, names=None) -> "FeatureSchema":
        """All-numeric schema with identity normalization."""
        names = names or [f"x{i}" for i in range(n)]
        return cls(tuple(DimSpec(name) for name in names))

    @property
    def size(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list:
        return [d.name for d in self.dims]

    def index(self, name: str) -> int:
        for i, d in enumerate(self.dims):
            if d.name == name:
                return i
        raise SchemaError(f"unknown dimension {name!r}")

    def group_name(self, gid: int) -> str:
        first = self.dims[self.groups[gid][0]].name
        return first.split("=", 1)[0]

    def group_modalities(self, gid: int) -> list:
        return [self.dims[i].name.split("=", 1)[-1] for i in self.groups[gid]]

    def group_index(self, feature: str) -> int:
        for gid in range(len(self.groups)):
            if self.group_name(gid) == feature:
                return gid
        raise SchemaError(f"unknown categorical feature {feature!r}")

    def numeric_mask(self) -> np.ndarray:
        return np.array([d.is_numeric for d in self.dims], dtype=bool)

    def with_constraints(self, constraints: dict) -> "FeatureSchema":
        """Copy with ``{dim index: Constraint}`` applied."""
        dims = list(self.dims)
        for i, c in constraints.items():
            dims[i] = replace(dims[i], constraint=c)
        return FeatureSchema(tuple(dims), self.groups)

    def to_json(self) -> dict:
        return {
            "dims": [
                {
                    "name": d.name,
                    "kind": "numeric" if d.group is None else {"one_hot": d.group},
                    "norm_mean": d.norm_mean,
                    "norm_std": d.norm_std,
                    "constraint": constraint_to_json(d.constraint),
                }
                for d in self.dims
            ],
            "groups": [list(g) for g in self.groups],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FeatureSchema":
        dims = []
        for d in doc["dims"]:
            kind = d.get("kind", "numeric")
            group = None if kind == "numeric" else int(kind["one_hot"])
            dims.append(DimSpec(
                name=d["name"],
                group=group,
                norm_mean=float(d.get("norm_mean", 0.0)),
                norm_std=float(d.get("norm_std", 1.0)),
                constraint=constraint_from_json(d.get("constraint")),
            ))
        return cls(tuple(dims), tuple(tuple(g) for g in doc.get("groups", [])))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "FeatureSchema":
        return cls.from_json(json.loads(text))


# Box domain ----------------------------------------------------------------


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``prod_i [c_i - s_i, c_i + s_i]``."""

    centers: np.ndarray
    half_lengths: np.ndarray

    def __post_init__(self):
        c = np.array(self.centers, dtype=float).reshape(-1)
        s = np.array(self.half_lengths, dtype=float).reshape(-1)
        if c.shape != s.shape or c.size < 1:
            raise SchemaError(f"centers and half_lengths must have equal length >= 1, "
                              f"got {c.size} and {s.size}")
        c.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "half_lengths", s)

    @property
    def size(self) -> int:
        return self.centers.size

    @property
    def lower(self) -> np.ndarray:
        return self.centers - self.half_lengths

    @property
    def upper(self) -> np.ndarray:
        return self.centers + self.half_lengths

    def params(self) -> np.ndarray:
        """Concatenated ``(centers, half_lengths)`` vector of length 2D."""
        return np.concatenate([self.centers, self.half_lengths])

    @classmethod
    def from_params(cls, p) -> "BoxDomain":
        p = np.asarray(p, dtype=float)
        n = p.size // 2
        return cls(p[:n], p[n:])

    def __eq__(self, other):
        if not isinstance(other, BoxDomain):
            return NotImplemented
        return (np.array_equal(self.centers, other.centers)
                and np.array_equal(self.half_lengths, other.half_lengths))

    __hash__ = None


def free_mask(schema: FeatureSchema) -> np.ndarray:
    return np.array([d.is_free for d in schema.dims], dtype=bool)


def apply_constraints(domain: BoxDomain, schema: FeatureSchema,
                      sigma_min: float = SIGMA_MIN) -> BoxDomain:
    """Pin constrained dims to their configured center and half-length.

    FixedValue dims become a ``sigma_min`` sliver around the value; sampling
    treats them as the exact value.
    """
    if domain.size != schema.size:
        raise SchemaError(f"domain has {domain.size} dims, schema has {schema.size}")
    c = domain.centers.copy()
    s = domain.half_lengths.copy()
    for i, d in enumerate(schema.dims):
        if isinstance(d.constraint, FixedValue):
            c[i] = d.constraint.value
            s[i] = sigma_min
        elif isinstance(d.constraint, FixedInterval):
            c[i] = d.constraint.center
            s[i] = d.constraint.half_length
    return BoxDomain(c, s)


# Settings ------------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyWeights:
    """Gain on numeric widths (lam), numeric center penalty (beta), and the
    one-hot penalties: binary centers (mu), widths (omega), group sums (gamma)."""

    lam: float = 0.0
    beta: float = 0.0
    mu: float = 0.0
    omega: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        for k in ("lam", "beta", "mu", "omega", "gamma"):
            v = getattr(self, k)
            if not (v >= 0 and np.isfinite(v)):
                raise SchemaError(f"penalty weight {k} must be finite and >= 0, got {v}")

    def to_json(self) -> dict:
        return {"lambda": self.lam, "beta": self.beta, "mu": self.mu,
                "omega": self.omega, "gamma": self.gamma}

    @classmethod
    def from_json(cls, doc: dict) -> "PenaltyWeights":
        unknown = set(doc) - {"lambda", "lam", "beta", "mu", "omega", "gamma"}
        if unknown:
            raise SchemaError(f"unknown penalty weights: {sorted(unknown)}")
        return cls(lam=float(doc.get("lambda", doc.get("lam", 0.0))),
                   beta=float(doc.get("beta", 0.0)), mu=float(doc.get("mu", 0.0)),
                   omega=float(doc.get("omega", 0.0)), gamma=float(doc.get("gamma", 0.0)))


@dataclass(frozen=True)
class Maximize:
    pass


@dataclass(frozen=True)
class Minimize:
    pass


@dataclass(frozen=True)
class TargetMean:
    target: float


ObjectiveMode = Union[Maximize, Minimize, TargetMean]


def mode_from_json(doc) -> ObjectiveMode:
    if doc in ("maximize", "max"):
        return Maximize()
    if doc in ("minimize", "min"):
        return Minimize()
    if isinstance(doc, dict) and "target" in doc:
        return TargetMean(float(doc["target"]))
    raise SchemaError(f"unknown objective mode {doc!r}")


def mode_to_json(mode: ObjectiveMode):
    if isinstance(mode, TargetMean):
        return {"target": mode.target}
    return "minimize" if isinstance(mode, Minimize) else "maximize"


@dataclass(frozen=True)
class GradientAscent:
    pass


@dataclass(frozen=True)
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class OptimizerConfig:
    iterations: int = 300
    sample_count: int = 50
    learning_rate: float = 0.07
    optimizer: Union[GradientAscent, Adam] = field(default_factory=Adam)
    sigma_min: float = SIGMA_MIN
    ridge: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise SchemaError("iterations must be >= 1")
        if self.sample_count < 2:
            raise SchemaError("sample_count must be >= 2")
        if not self.learning_rate > 0:
            raise SchemaError("learning_rate must be > 0")
        if not self.sigma_min > 0:
            raise SchemaError("sigma_min must be > 0")
        if self.ridge < 0:
            raise SchemaError("ridge must be >= 0")
        if self.seed < 0:
            raise SchemaError("seed must be non-negative")

    def to_json(self) -> dict:
        opt = self.optimizer
        doc = {"iterations": self.iterations, "sample_count": self.sample_count,
               "learning_rate": self.learning_rate, "sigma_min": self.sigma_min,
               "ridge": self.ridge, "seed": self.seed}
        if isinstance(opt, Adam):
            doc["optimizer"] = {"type": "adam", "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps}
        else:
            doc["optimizer"] = {"type": "gradient_ascent"}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "OptimizerConfig":
        opt = doc.get("optimizer", {"type": "adam"})
        if isinstance(opt, str):
            opt = {"type": opt}
        if opt.get("type") == "adam":
            optimizer = Adam(float(opt.get("beta1", 0.9)), float(opt.get("beta2", 0.999)),
                             float(opt.get("eps", 1e-8)))
        elif opt.get("type") in ("gradient_ascent", "plain"):
            optimizer = GradientAscent()
        else:
            raise SchemaError(f"unknown optimizer {opt.get('type')!r}")
        return cls(iterations=int(doc.get("iterations", 300)),
                   sample_count=int(doc.get("sample_count", doc.get("K", 50))),
                   learning_rate=float(doc.get("learning_rate", 0.07)),
                   optimizer=optimizer,
                   sigma_min=float(doc.get("sigma_min", SIGMA_MIN)),
                   ridge=float(doc.get("ridge", 1e-6)),
                   seed=int(doc.get("seed", 0)))
