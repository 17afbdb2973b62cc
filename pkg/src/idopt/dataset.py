"""CSV ingestion, Titanic-style preprocessing and denormalized reporting."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .domain import BoxDomain, DimSpec, FeatureSchema, SchemaError

MAX_MODALITIES = 32

TITANIC_KINDS = {
    "age": "numeric", "sibsp": "numeric", "parch": "numeric", "fare": "numeric",
    "sex": "categorical", "pclass": "categorical", "embarked": "categorical",
}
TITANIC_LABEL = "survived"


def titanic_path() -> Path:
    """Path of the bundled Titanic passenger CSV (891 rows)."""
    return Path(str(resources.files("idopt") / "data" / "titanic.csv"))


class DataError(ValueError):
    pass


@dataclass
class TabularData:
    """Retained columns of a CSV. Missing cells are ``None``."""

    columns: list
    kinds: dict
    rows: list
    label: str
    labels: np.ndarray

    def column(self, name):
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def __len__(self):
        return len(self.rows)


def load_csv(path, kinds: dict = None, label: str = TITANIC_LABEL) -> TabularData:
    """Read a headed CSV, keeping the columns named in ``kinds`` plus ``label``.

    Numeric cells are parsed as floats, categorical ones kept as stripped
    strings; blank cells become None.
    """
    kinds = dict(TITANIC_KINDS if kinds is None else kinds)
    for k, v in kinds.items():
        if v not in ("numeric", "categorical"):
            raise SchemaError(f"column {k!r}: kind must be numeric or categorical, got {v!r}")
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file (no header)") from None
        missing = [c for c in list(kinds) + [label] if c not in header]
        if missing:
            raise SchemaError(f"{path}: columns not in header: {missing}")
        columns = list(kinds)
        pos = [header.index(c) for c in columns]
        lpos = header.index(label)
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            row = []
            for c, j in zip(columns, pos):
                cell = rec[j].strip()
                if cell == "":
                    row.append(None)
                elif kinds[c] == "numeric":
                    try:
                        row.append(float(cell))
                    except ValueError:
                        raise DataError(f"{path}:{lineno}: column {c!r}: {cell!r} is not a number") from None
                else:
                    row.append(cell)
            try:
                lab = float(rec[lpos])
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {rec[lpos]!r} is not 0/1") from None
            if lab not in (0.0, 1.0):
                raise DataError(f"{path}:{lineno}: label {rec[lpos]!r} is not 0/1")
            rows.append(row)
            labels.append(lab)
    return TabularData(columns, kinds, rows, label, np.array(labels, dtype=float))


@dataclass
class EncodedDataset:
    features: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema
    row_index: np.ndarray  # positions in the source TabularData

    def to_json(self) -> dict:
        return {"features": self.features.tolist(), "labels": self.labels.tolist(),
                "schema": self.schema.to_json(), "row_index": self.row_index.tolist()}

    @classmethod
    def from_json(cls, doc) -> "EncodedDataset":
        return cls(np.array(doc["features"], dtype=float), np.array(doc["labels"], dtype=float),
                   FeatureSchema.from_json(doc["schema"]), np.array(doc["row_index"], dtype=int))


@dataclass
class Encoder:
    """Fitted preprocessing: fill values, standard scores and modality order."""

    schema: FeatureSchema
    columns: list
    fills: dict

    def transform(self, data: TabularData, rows=None) -> EncodedDataset:
        rows = np.arange(len(data)) if rows is None else np.asarray(rows, dtype=int)
        out = np.zeros((rows.size, self.schema.size))
        col = 0
        for j, name in enumerate(self.columns):
            raw = [data.rows[r][j] for r in rows]
            raw = [self.fills[name] if v is None else v for v in raw]
            if data.kinds[name] == "numeric":
                d = self.schema.dims[col]
                out[:, col] = (np.array(raw, dtype=float) - d.norm_mean) / d.norm_std
                col += 1
            else:
                gid = self.schema.group_index(name)
                mods = self.schema.group_modalities(gid)
                for r, v in enumerate(raw):
                    if v not in mods:
                        raise DataError(f"column {name!r}: unseen modality {v!r}")
                    out[r, col + mods.index(v)] = 1.0
                col += len(mods)
        return EncodedDataset(out, data.labels[rows].copy(), self.schema, rows)


def fit_encoder(data: TabularData, train_rows) -> Encoder:
    """Fit fill values and standard scores on ``train_rows``.

    Numeric gaps take the training median, categorical gaps the training
    mode. Modalities are ordered by first appearance over all rows.
    """
    train_rows = np.asarray(train_rows, dtype=int)
    dims, groups, fills = [], [], {}
    for j, name in enumerate(data.columns):
        values = [data.rows[r][j] for r in train_rows]
        present = [v for v in values if v is not None]
        if not present:
            raise DataError(f"column {name!r} has no values in the training rows")
        if data.kinds[name] == "numeric":
            fill = float(np.median(present))
            filled = np.array([fill if v is None else v for v in values], dtype=float)
            std = float(filled.std())
            if std == 0:
                raise DataError(f"column {name!r} is constant on the training rows")
            dims.append(DimSpec(name, None, float(filled.mean()), std))
        else:
            fill = Counter(present).most_common(1)[0][0]
            mods = list(dict.fromkeys(r[j] for r in data.rows if r[j] is not None))
            if len(mods) > MAX_MODALITIES:
                raise SchemaError(f"column {name!r} has {len(mods)} modalities (limit {MAX_MODALITIES})")
            gid = len(groups)
            groups.append(tuple(range(len(dims), len(dims) + len(mods))))
            dims.extend(DimSpec(f"{name}={m}", gid) for m in mods)
        fills[name] = fill
    return Encoder(FeatureSchema(tuple(dims), tuple(groups)), list(data.columns), fills)


def split_rows(n: int, split_fraction: float, seed: int):
    if not 0 < split_fraction < 1:
        raise SchemaError(f"split_fraction must be in (0, 1), got {split_fraction}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(split_fraction * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def preprocess(data: TabularData, split_fraction: float = 0.8, seed: int = 0):
    """Split, fill, standardize and one-hot encode; returns ``(train, test)``."""
    train_rows, test_rows = split_rows(len(data), split_fraction, seed)
    enc = fit_encoder(data, train_rows)
    return enc.transform(data, train_rows), enc.transform(data, test_rows)


def encode_all(data: TabularData, split_fraction: float = 0.8, seed: int = 0) -> EncodedDataset:
    """Every row, in file order, encoded with the statistics ``preprocess`` fits."""
    train_rows, _ = split_rows(len(data), split_fraction, seed)
    return fit_encoder(data, train_rows).transform(data)


def save_dataset(ds: EncodedDataset, path):
    with open(path, "w") as fh:
        json.dump(ds.to_json(), fh)


def load_dataset(path) -> EncodedDataset:
    with open(path) as fh:
        return EncodedDataset.from_json(json.load(fh))


# Reporting -----------------------------------------------------------------


def denormalize_report(domain: BoxDomain, schema: FeatureSchema) -> dict:
    """Raw-unit intervals for numeric dims and decoded modalities for groups."""
    if domain.size != schema.size:
        raise SchemaError(f"domain has {domain.size} dims, schema has {schema.size}")
    c, s = domain.centers, domain.half_lengths
    numeric = {}
    for i, d in enumerate(schema.dims):
        if d.is_numeric:
            numeric[d.name] = {
                "interval": [d.norm_mean + (c[i] - s[i]) * d.norm_std,
                             d.norm_mean + (c[i] + s[i]) * d.norm_std],
                "center": float(c[i]), "half_length": float(s[i]),
            }
    categorical = {}
    for gid, members in enumerate(schema.groups):
        mods = schema.group_modalities(gid)
        centers = [float(c[i]) for i in members]
        categorical[schema.group_name(gid)] = {
            "modality": mods[int(np.argmax(centers))],
            "centers": dict(zip(mods, centers)),
            "half_lengths": dict(zip(mods, (float(s[i]) for i in members))),
        }
    return {"numeric": numeric, "categorical": categorical}


def renormalize_interval(lo: float, hi: float, spec: DimSpec):
    """Inverse of the numeric interval mapping: raw ``[lo, hi]`` to ``(c, s)``."""
    a = (lo - spec.norm_mean) / spec.norm_std
    b = (hi - spec.norm_mean) / spec.norm_std
    return 0.5 * (a + b), 0.5 * (b - a)
