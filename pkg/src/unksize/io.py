"""CSV ingestion, design-matrix construction and JSON (de)serialization of fits."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import Dataset, FitResult, MixingDistribution, Theta

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelSpec:
    """Which CSV columns enter the model and how.

    Factor columns are one-hot coded with their first-appearing level as the
    reference (absorbed into the intercept).
    """

    response: str
    covariates: tuple[str, ...] = ()
    factors: tuple[str, ...] = ()
    link: str = "logit"
    intercept: bool = True

    def as_dict(self) -> dict:
        return {
            "response": self.response,
            "covariates": list(self.covariates),
            "factors": list(self.factors),
            "link": self.link,
            "intercept": self.intercept,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ModelSpec:
        return cls(d["response"], tuple(d.get("covariates", ())), tuple(d.get("factors", ())),
                   d.get("link", "logit"), bool(d.get("intercept", True)))


def _parse_count(text: str, line: int, column: str) -> int:
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"line {line}: response {column!r} is not numeric: {text!r}") from None
    if not math.isfinite(value) or value < 0 or value != int(value):
        raise ValidationError(f"line {line}: response {column!r} must be a nonnegative integer, got {text!r}")
    return int(value)


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"line {line}: covariate {column!r} is not numeric: {text!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"line {line}: covariate {column!r} is not finite")
    return value


def design_from_rows(rows: list[dict], spec: ModelSpec, first_line: int = 2) -> Dataset:
    if not rows:
        raise ValidationError("no data rows")
    header = set(rows[0])
    for col in (spec.response, *spec.covariates, *spec.factors):
        if col not in header:
            raise ValidationError(f"missing column {col!r}; have {sorted(header)}")

    y = [_parse_count(row[spec.response].strip(), first_line + i, spec.response)
         for i, row in enumerate(rows)]
    columns: list[np.ndarray] = []
    names: list[str] = []
    if spec.intercept:
        columns.append(np.ones(len(rows)))
        names.append("(intercept)")
    for col in spec.covariates:
        columns.append(np.array([_parse_float(row[col].strip(), first_line + i, col)
                                 for i, row in enumerate(rows)]))
        names.append(col)
    for col in spec.factors:
        values = [row[col].strip() for row in rows]
        levels = list(dict.fromkeys(values))
        for level in levels[1:]:
            columns.append(np.array([v == level for v in values], dtype=float))
            names.append(f"{col}[{level}]")
    if not columns:
        raise ValidationError("model has no columns (no intercept, covariates or factors)")
    X = np.column_stack(columns)
    rank = np.linalg.matrix_rank(X)
    if X.shape[0] < X.shape[1]:
        # too few rows to tell collinearity from a short file; loading is fine, fitting is not
        log.warning("only %d rows for %d design columns", X.shape[0], X.shape[1])
    elif rank < X.shape[1]:
        raise ValidationError(f"design matrix is rank deficient (rank {rank} < {X.shape[1]} columns)")
    return Dataset(np.array(y, dtype=np.int64), X, tuple(names))


def load_csv(path: str | Path, spec: ModelSpec) -> Dataset:
    """Read a headed CSV and build the dataset described by ``spec``."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty file")
        rows = []
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                raise ValidationError(f"{path}: line {reader.line_num}: wrong number of fields")
            if all(not v.strip() for v in row.values()):
                continue
            rows.append(row)
    return design_from_rows(rows, spec)


# ---------------------------------------------------------------------------
# shipped data
# ---------------------------------------------------------------------------

MBOVIS_SPEC = ModelSpec(response="colonies", factors=("level",))


def mbovis_path() -> Path:
    """Path to the bundled M. bovis colony counts, after checking its digest."""
    base = resources.files("unksize") / "data"
    csv_path = Path(str(base / "mbovis.csv"))
    expected = (base / "mbovis.csv.sha256").read_text().split()[0]
    digest = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    if digest != expected:
        raise ValidationError(f"bundled mbovis.csv checksum mismatch ({digest})")
    return csv_path


def load_mbovis() -> Dataset:
    """The 129-observation dataset coded as control + 11 dose-level contrasts."""
    return load_csv(mbovis_path(), MBOVIS_SPEC)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def fit_to_dict(fit: FitResult, spec: ModelSpec | None = None, seed: int | None = None,
                column_names=()) -> dict:
    return {
        "model": spec.as_dict() if spec else {"link": fit.link},
        "columns": list(column_names),
        "theta": {
            "beta": fit.beta.tolist(),
            "alphas": fit.mixing.alphas.tolist(),
            "lambdas": fit.mixing.lambdas.tolist(),
        },
        "loglik": fit.loglik,
        "bic": fit.bic,
        "K": fit.K,
        "r": fit.r,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "seed": seed,
    }


def theta_from_dict(d: dict) -> Theta:
    t = d["theta"]
    return Theta(np.array(t["beta"], dtype=float), MixingDistribution(t["alphas"], t["lambdas"]))


def save_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_fit_json(path: str | Path) -> tuple[dict, Theta]:
    d = json.loads(Path(path).read_text())
    return d, theta_from_dict(d)
