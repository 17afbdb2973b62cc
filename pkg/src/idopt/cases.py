"""Case configurations: which model, which weights, which constraints."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import models
from .dataset import denormalize_report
from .domain import (BoxDomain, FeatureSchema, FixedInterval, FixedValue, ObjectiveMode,
                     OptimizerConfig, PenaltyWeights, SchemaError, free_mask,
                     mode_from_json, mode_to_json)
from .objective import penalties
from .optimizer import evaluate_batch, run
from .surrogate import sample_box

REPORT_SAMPLES = 10_000


@dataclass
class CaseConfig:
    name: str
    model: str
    mode: ObjectiveMode
    weights: PenaltyWeights
    optimizer: OptimizerConfig
    constraints: list = field(default_factory=list)
    density: Optional[str] = None
    init: dict = field(default_factory=lambda: {"type": "random"})
    dim: Optional[int] = None  # only for built-in test functions
    base_dir: Path = Path(".")

    @classmethod
    def from_json(cls, doc: dict, base_dir=".") -> "CaseConfig":
        known = {"name", "model", "mode", "weights", "optimizer", "constraints",
                 "density", "init", "dim", "description"}
        unknown = set(doc) - known
        if unknown:
            raise SchemaError(f"unknown case config keys: {sorted(unknown)}")
        if "model" not in doc:
            raise SchemaError("case config needs a 'model'")
        init = doc.get("init", {"type": "random"})
        if init.get("type") not in ("random", "data_row"):
            raise SchemaError(f"unknown init type {init.get('type')!r}")
        return cls(
            name=doc.get("name", "case"),
            model=doc["model"],
            mode=mode_from_json(doc.get("mode", "maximize")),
            weights=PenaltyWeights.from_json(doc.get("weights", {})),
            optimizer=OptimizerConfig.from_json(doc.get("optimizer", {})),
            constraints=list(doc.get("constraints", [])),
            density=doc.get("density"),
            init=init,
            dim=doc.get("dim"),
            base_dir=Path(base_dir),
        )

    @classmethod
    def load(cls, path) -> "CaseConfig":
        path = Path(path)
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_json(doc, base_dir=path.parent)

    def to_json(self) -> dict:
        doc = {"name": self.name, "model": self.model, "mode": mode_to_json(self.mode),
               "weights": self.weights.to_json(), "optimizer": self.optimizer.to_json(),
               "constraints": self.constraints, "init": self.init}
        if self.density is not None:
            doc["density"] = self.density
        if self.dim is not None:
            doc["dim"] = self.dim
        return doc

    def resolve(self, ref: str) -> Path:
        p = Path(ref)
        return p if p.is_absolute() else self.base_dir / p


def resolve_constraints(schema: FeatureSchema, constraints: list) -> FeatureSchema:
    """Turn config constraint records into a constrained schema.

    Records look like ``{"feature": "embarked", "modality": "Q"}`` (the chosen
    dim is pinned to 1, its siblings to 0), ``{"feature": "age", "interval":
    [center, half_length]}`` or ``{"feature": "age", "value": v}``, all in
    normalized units.
    """
    pinned = {}
    for rec in constraints:
        feature = rec.get("feature")
        if feature is None:
            raise SchemaError(f"constraint without 'feature': {rec}")
        if "modality" in rec:
            gid = schema.group_index(feature)
            mods = schema.group_modalities(gid)
            if str(rec["modality"]) not in mods:
                raise SchemaError(f"feature {feature!r} has no modality {rec['modality']!r}; "
                                  f"valid modalities: {mods}")
            chosen = mods.index(str(rec["modality"]))
            for k, i in enumerate(schema.groups[gid]):
                pinned[i] = FixedValue(1.0 if k == chosen else 0.0)
        elif "interval" in rec:
            center, half = rec["interval"]
            pinned[schema.index(feature)] = FixedInterval(float(center), float(half))
        elif "value" in rec:
            pinned[schema.index(feature)] = FixedValue(float(rec["value"]))
        else:
            raise SchemaError(f"constraint on {feature!r} needs 'modality', 'interval' or 'value'")
    return schema.with_constraints(pinned)


def load_case_inputs(case: CaseConfig, model_path=None):
    """Load ``(model, schema, density)`` named by the case (or ``model_path``)."""
    ref = str(model_path) if model_path is not None else case.model
    if ref.startswith("builtin:"):
        if case.dim is None:
            raise SchemaError("built-in test functions need 'dim'")
        try:
            model = models.builtin(ref.split(":", 1)[1], int(case.dim))
        except KeyError as exc:
            raise SchemaError(str(exc.args[0])) from None
        schema = FeatureSchema.numeric(int(case.dim))
    else:
        path = Path(ref) if model_path is not None else case.resolve(ref)
        if not path.exists():
            raise FileNotFoundError(f"model file not found: {path}")
        model, doc = models.load_model(path)
        if "schema" not in doc:
            raise SchemaError(f"{path}: model document has no schema")
        schema = FeatureSchema.from_json(doc["schema"])
    density = None
    if case.density is not None:
        path = case.resolve(case.density)
        if not path.exists():
            raise FileNotFoundError(f"density file not found: {path}")
        density, _ = models.load_model(path)
        if density.dim != schema.size:
            raise SchemaError(f"density has {density.dim} dims, model schema has {schema.size}")
    return model, schema, density


def initial_domain(case: CaseConfig, schema: FeatureSchema, support=None) -> Optional[BoxDomain]:
    if case.init.get("type") == "data_row":
        if support is None:
            raise SchemaError("data_row initialization needs a dataset or density")
        idx = int(case.init.get("index", 0))
        if not 0 <= idx < len(support):
            raise SchemaError(f"data row {idx} out of range 0..{len(support) - 1}")
        sigma = float(case.init.get("sigma", 0.1))
        return BoxDomain(np.asarray(support[idx], dtype=float), np.full(schema.size, sigma))
    return None


def mc_mean(f, domain: BoxDomain, schema: FeatureSchema, n: int, seed) -> float:
    rng = np.random.default_rng(seed)
    return float(evaluate_batch(f, sample_box(domain, schema, n, rng)).mean())


def constraint_residuals(domain: BoxDomain, schema: FeatureSchema) -> dict:
    c, s = domain.centers, domain.half_lengths
    out = {}
    for gid, members in enumerate(schema.groups):
        idx = np.asarray(members)
        out[schema.group_name(gid)] = {
            "max_binary_gap": float(np.max(np.minimum(np.abs(c[idx]), np.abs(1 - c[idx])))),
            "sum_gap": float(abs(c[idx].sum() - 1.0)),
            "max_half_length": float(np.max(s[idx])),
        }
    return out


def run_case(case: CaseConfig, model, schema: FeatureSchema, density=None,
             report_samples: int = REPORT_SAMPLES):
    """Optimize one case. Returns ``(final domain, trajectory, report dict)``."""
    schema = resolve_constraints(schema, case.constraints)
    f = model if density is None else models.density_weighted(model, density)
    support = density.support if density is not None else None
    init = initial_domain(case, schema, support)
    cfg = case.optimizer
    domain, traj = run(f, schema, cfg, case.weights, case.mode, init=init)

    first = BoxDomain(traj[0].centers, traj[0].half_lengths)
    terms, _, _ = penalties(domain, schema, case.weights)
    report = {
        "name": case.name,
        "config": case.to_json(),
        "iterations": len(traj),
        "centers": domain.centers.tolist(),
        "half_lengths": domain.half_lengths.tolist(),
        "free": free_mask(schema).tolist(),
        "domain": denormalize_report(domain, schema),
        "final_mean": mc_mean(f, domain, schema, report_samples, [cfg.seed, 1]),
        "final_objective": traj[-1].objective,
        "penalties": terms,
        "constraint_residuals": constraint_residuals(domain, schema),
    }
    if density is not None:
        report["final_model_mean"] = mc_mean(model, domain, schema, report_samples, [cfg.seed, 2])
        report["initial_model_mean"] = mc_mean(model, first, schema, report_samples, [cfg.seed, 2])
    return domain, traj, report
