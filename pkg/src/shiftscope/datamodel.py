"""Core value types shared by every other module.

Everything here is an immutable value: construction validates, and a
constructed object can be passed around without defensive copies.  Feature
matrices are float64 and marked read-only; labels are plain strings so that
CSV round-trips are loss-free.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "TriState",
    "Causality",
    "ScenarioKind",
    "WeightKind",
    "LabelSpace",
    "Dataset",
    "DomainPair",
    "ShiftScenario",
    "ShiftMatrix",
    "WeightVector",
    "DataFormatError",
    "validate_domain_pair",
    "empirical_prior",
    "read_dataset_csv",
    "write_dataset_csv",
]


class TriState(enum.Enum):
    """Three-valued logic used by evidence, assertions and shift matrices."""

    YES = "Yes"
    NO = "No"
    UNKNOWN = "Unknown"

    def __str__(self) -> str:
        return self.value


class Causality(enum.Enum):
    """Direction of the data-generating process: features cause labels or
    labels cause features.  Unknown is a legal answer and a hard stop for
    diagnosis."""

    X_TO_Y = "XtoY"
    Y_TO_X = "YtoX"
    UNKNOWN = "Unknown"

    def __str__(self) -> str:
        return self.value


class ScenarioKind(enum.Enum):
    PRIOR = "Prior"
    CLASS_CONDITIONAL = "ClassConditional"
    COVARIATE = "Covariate"
    CONCEPT = "Concept"
    GENERAL = "General"

    def __str__(self) -> str:
        return self.value


class WeightKind(enum.Enum):
    PER_SAMPLE = "per_sample"
    PER_CLASS = "per_class"

    def __str__(self) -> str:
        return self.value


class DataFormatError(ValueError):
    """Raised on malformed external data; carries the first offending cell."""

    def __init__(self, message: str, row: Optional[int] = None,
                 column: Optional[int] = None):
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class LabelSpace:
    """Ordered, duplicate-free set of class labels.

    Order matters: priors, confusion matrices and tie-breaking all follow
    the order given here.
    """

    labels: tuple

    def __post_init__(self):
        labels = tuple(str(l) for l in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ValueError("label space needs at least two labels")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in label space")
        if any(l == "" for l in labels):
            raise ValueError("empty label name")

    @property
    def k(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"label outside space: {label!r}") from None

    def __contains__(self, label) -> bool:
        return label in self.labels

    def to_dict(self) -> dict:
        return {"labels": list(self.labels)}


def label_space_from_dict(d: dict) -> LabelSpace:
    return LabelSpace(tuple(d["labels"]))


@dataclass(frozen=True, eq=False)
class Dataset:
    """A sample of feature rows with optional labels.

    features : (n, d) float64, finite, read-only after construction.
    labels   : tuple of n label strings, or None for an unlabeled sample.
    """

    features: np.ndarray
    labels: Optional[tuple] = None
    name: str = "dataset"

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if x.shape[0] == 0:
            raise ValueError("empty dataset")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite feature value")
        x = np.ascontiguousarray(x)
        x.setflags(write=False)
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            labels = tuple(str(l) for l in self.labels)
            if len(labels) != x.shape[0]:
                raise ValueError("label count does not match row count")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def column(self, j: int) -> np.ndarray:
        return self.features[:, j]

    def class_rows(self, label: str) -> np.ndarray:
        """Feature rows belonging to one class."""
        if self.labels is None:
            raise ValueError("unlabeled dataset")
        mask = np.array([l == label for l in self.labels])
        return self.features[mask]


@dataclass(frozen=True)
class DomainPair:
    """Source and target samples over a shared label space.

    Construction checks types only; semantic consistency is reported by
    `validate_domain_pair` so that malformed pairs can be inspected and
    rejected with a message instead of an exception mid-pipeline.
    """

    source: Dataset
    target: Dataset
    label_space: LabelSpace

    def __post_init__(self):
        if not isinstance(self.source, Dataset) or not isinstance(self.target, Dataset):
            raise TypeError("source and target must be Dataset values")
        if not isinstance(self.label_space, LabelSpace):
            raise TypeError("label_space must be a LabelSpace")


def validate_domain_pair(pair: DomainPair) -> list:
    """Return the list of violated pair invariants (empty when valid).

    Checked: shared feature dimensionality; source is labeled; every label
    used by either domain belongs to the label space.
    """
    violations = []
    if pair.source.d != pair.target.d:
        violations.append("feature dimension mismatch")
    if not pair.source.is_labeled:
        violations.append("unlabeled source")
    for ds in (pair.source, pair.target):
        if ds.labels is None:
            continue
        bad = sorted({l for l in ds.labels if l not in pair.label_space})
        if bad:
            violations.append("label outside space")
            break
    return violations


def empirical_prior(dataset: Dataset, space: LabelSpace) -> np.ndarray:
    """Class frequencies in label-space order.  Errors on unlabeled input."""
    if dataset.labels is None:
        raise ValueError("unlabeled dataset")
    counts = np.zeros(space.k)
    for l in dataset.labels:
        counts[space.index(l)] += 1
    return counts / dataset.n


# --- shift scenarios -------------------------------------------------------

# Which causal direction each scenario kind is defined under.  General shift
# is meaningful under either direction; the four basic shifts are not.
_SCENARIO_CAUSALITY = {
    ScenarioKind.PRIOR: (Causality.Y_TO_X,),
    ScenarioKind.CLASS_CONDITIONAL: (Causality.Y_TO_X,),
    ScenarioKind.COVARIATE: (Causality.X_TO_Y,),
    ScenarioKind.CONCEPT: (Causality.X_TO_Y,),
    ScenarioKind.GENERAL: (Causality.X_TO_Y, Causality.Y_TO_X),
}


@dataclass(frozen=True)
class ShiftScenario:
    """A shift kind together with the causal direction it presumes."""

    kind: ScenarioKind
    causality: Causality

    def __post_init__(self):
        allowed = _SCENARIO_CAUSALITY[self.kind]
        if self.causality not in allowed:
            names = " or ".join(c.value for c in allowed)
            raise ValueError(
                f"{self.kind.value} shift is only defined under {names} causality"
            )

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "causality": self.causality.value}


def shift_scenario_from_dict(d: dict) -> ShiftScenario:
    return ShiftScenario(ScenarioKind(d["kind"]), Causality(d["causality"]))


def valid_scenarios() -> tuple:
    """All constructible (kind, causality) combinations, in kind order."""
    out = []
    for kind in ScenarioKind:
        for c in _SCENARIO_CAUSALITY[kind]:
            out.append(ShiftScenario(kind, c))
    return tuple(out)


_MATRIX_FIELDS = (
    "delta_prior",              # P(y)
    "delta_features",           # P(x)
    "delta_class_conditionals", # P(x|y)
    "delta_posteriors",         # P(y|x)
    "delta_joint",              # P(x, y)
)


@dataclass(frozen=True)
class ShiftMatrix:
    """Which of the five joint-decomposition quantities move under a shift.

    `definitional` names the fields whose value is forced by the scenario's
    definition rather than inferred; those entries are never Unknown.
    """

    delta_prior: TriState
    delta_features: TriState
    delta_class_conditionals: TriState
    delta_posteriors: TriState
    delta_joint: TriState
    definitional: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "definitional", frozenset(self.definitional))
        for name in self.definitional:
            if name not in _MATRIX_FIELDS:
                raise ValueError(f"unknown shift-matrix field: {name!r}")
            if getattr(self, name) is TriState.UNKNOWN:
                raise ValueError(f"definitional cell {name!r} cannot be Unknown")

    def to_dict(self) -> dict:
        d = {name: getattr(self, name).value for name in _MATRIX_FIELDS}
        d["definitional"] = sorted(self.definitional)
        return d


def shift_matrix_from_dict(d: dict) -> ShiftMatrix:
    return ShiftMatrix(
        *(TriState(d[name]) for name in _MATRIX_FIELDS),
        definitional=frozenset(d.get("definitional", ())),
    )


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Nonnegative importance weights, per sample or per class."""

    kind: WeightKind
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("weights must form a nonempty 1-D vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite weight")
        if np.any(v < 0):
            raise ValueError("negative weight")
        if not np.any(v > 0):
            raise ValueError("all weights are zero")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "values": self.values.tolist()}


def weight_vector_from_dict(d: dict) -> WeightVector:
    return WeightVector(WeightKind(d["kind"]), np.asarray(d["values"]))


# --- CSV form --------------------------------------------------------------
#
# Header: x1,...,xd with an optional trailing `label` column.  Values use
# repr precision so that write → read is bit-exact.


def write_dataset_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = [f"x{j + 1}" for j in range(dataset.d)]
        if dataset.is_labeled:
            header.append("label")
        w.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.features[i]]
            if dataset.is_labeled:
                row.append(dataset.labels[i])
            w.writerow(row)


def read_dataset_csv(path, name: Optional[str] = None) -> Dataset:
    """Parse the CSV dataset form.

    Errors carry 1-based row/column positions of the first offending cell
    (the header is row 1).
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file", row=1) from None
        header = [h.strip() for h in header]
        labeled = bool(header) and header[-1] == "label"
        d = len(header) - (1 if labeled else 0)
        if d < 1:
            raise DataFormatError("no feature columns in header", row=1)
        for j, h in enumerate(header[:d]):
            if h != f"x{j + 1}":
                raise DataFormatError(
                    f"bad header field {h!r}: expected 'x{j + 1}'",
                    row=1, column=j + 1)
        rows = []
        labels = [] if labeled else None
        for i, rec in enumerate(reader, start=2):
            if not rec:
                continue  # ignore blank lines
            if len(rec) != len(header):
                raise DataFormatError(
                    f"row has {len(rec)} fields, header has {len(header)}",
                    row=i)
            vals = []
            for j in range(d):
                tok = rec[j].strip()
                try:
                    v = float(tok)
                except ValueError:
                    raise DataFormatError(
                        f"could not parse {tok!r} as a number",
                        row=i, column=j + 1) from None
                if not math.isfinite(v):
                    raise DataFormatError(
                        f"non-finite value {tok!r}", row=i, column=j + 1)
                vals.append(v)
            rows.append(vals)
            if labeled:
                lab = rec[d].strip()
                if lab == "":
                    raise DataFormatError("empty label", row=i, column=d + 1)
                labels.append(lab)
        if not rows:
            raise DataFormatError("no data rows", row=2)
    import os
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return Dataset(np.array(rows), tuple(labels) if labeled else None, name=name)
