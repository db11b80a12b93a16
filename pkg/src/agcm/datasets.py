"""Longitudinal datasets, CSV ingestion and AIC selection over degree grids."""

from __future__ import annotations

import csv
import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TextIO

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    AgcmError,
    EmptyGroup,
    IoError,
    MissingValue,
    NonNumeric,
    ShapeMismatch,
    UnsortedTimepoints,
    ValidationError,
)
from .estimation import FitResult, fit
from .linalg import Matrix
from .model import ORTHOGONALITY_TOL, ModelSpec, indicator_spec

__all__ = [
    "LongitudinalDataset",
    "SelectionEntry",
    "SelectionResult",
    "dental_dataset",
    "fit_degrees",
    "load_csv",
    "select_degrees",
]

_MISSING = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True, eq=False)
class LongitudinalDataset:
    """``n x p`` measurements with rows grouped contiguously by label.

    ``permutation[i]`` is the original (input) index of row ``i``.
    """

    Y: Matrix
    timepoints: np.ndarray
    groups: tuple[str, ...]
    group_order: tuple[str, ...]
    permutation: np.ndarray

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    @property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(self.groups.count(g) for g in self.group_order)

    def group_rows(self, label: str) -> Matrix:
        return self.Y[np.array([g == label for g in self.groups])]

    def spec(self, degrees: Sequence[int], *, tol: float = ORTHOGONALITY_TOL) -> ModelSpec:
        return indicator_spec(self.group_sizes, self.timepoints, degrees, self.group_order, tol=tol)

    @classmethod
    def from_arrays(
        cls,
        y: ArrayLike,
        timepoints: ArrayLike,
        groups: Sequence[str],
        group_order: Sequence[str] | None = None,
    ) -> LongitudinalDataset:
        y = np.asarray(y, dtype=np.float64)
        t = np.asarray(timepoints, dtype=np.float64).ravel()
        labels = [str(g) for g in groups]
        if y.ndim != 2 or y.shape[1] != t.size or y.shape[0] != len(labels):
            raise ShapeMismatch("measurements, timepoints and group labels do not conform")
        bad = np.argwhere(~np.isfinite(y))
        if bad.size:
            raise MissingValue(int(bad[0, 0]) + 1, str(t[bad[0, 1]]))
        if np.any(np.diff(t) <= 0):
            raise UnsortedTimepoints(f"timepoints must be strictly increasing, got {t.tolist()}")
        if group_order is None:
            group_order = list(dict.fromkeys(labels))
        group_order = [str(g) for g in group_order]
        if not labels:
            raise EmptyGroup(group_order[0] if group_order else "*")
        unknown = set(labels) - set(group_order)
        if unknown:
            raise ValidationError(f"rows carry labels not in the group order: {sorted(unknown)}")
        for g in group_order:
            if g not in labels:
                raise EmptyGroup(g)
        perm = np.array(
            [i for g in group_order for i, lab in enumerate(labels) if lab == g], dtype=np.intp
        )
        return cls(y[perm], t, tuple(labels[i] for i in perm), tuple(group_order), perm)

    def write_csv(self, fh: TextIO, group_column: str = "group") -> None:
        """Write the CSV form to an open text stream (values round-trip exactly)."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([group_column] + [_fmt_time(t) for t in self.timepoints])
        for g, row in zip(self.groups, self.Y):
            w.writerow([g] + [repr(float(v)) for v in row])

    def to_csv(self, path: str | Path, group_column: str = "group") -> None:
        try:
            with open(path, "w", newline="") as fh:
                self.write_csv(fh, group_column)
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc


def _fmt_time(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def _parse_float(text: str, row: int, col: str) -> float:
    s = text.strip()
    if s.lower() in _MISSING:
        raise MissingValue(row, col)
    try:
        v = float(s)
    except ValueError:
        raise NonNumeric(row, col, text) from None
    if not math.isfinite(v):
        raise NonNumeric(row, col, text)
    return v


def load_csv(
    path: str | Path,
    *,
    group_column: str = "group",
    group_order: Sequence[str] | None = None,
    ignore_columns: Sequence[str] = (),
) -> LongitudinalDataset:
    """Read one-row-per-subject CSV data.

    The header holds ``group_column`` plus one numeric timepoint per
    measurement column (strictly increasing). Columns listed in
    ``ignore_columns`` (e.g. a subject id) are skipped. Row numbers in
    errors count data rows from 1.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise ValidationError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if group_column not in header:
        raise ValidationError(f"no group column {group_column!r} in header {header}")
    g_idx = header.index(group_column)
    t_idx = [j for j, h in enumerate(header) if j != g_idx and h not in ignore_columns]
    times = [_parse_float(header[j], 0, header[j]) for j in t_idx]
    if any(b <= a for a, b in itertools.pairwise(times)):
        raise UnsortedTimepoints(f"timepoint columns must be strictly increasing, got {times}")
    labels, values = [], []
    for r, raw in enumerate(rows[1:], start=1):
        if len(raw) > len(header):
            raise ValidationError(f"data row {r} has {len(raw)} cells, header has {len(header)}")
        cells = raw + [""] * (len(header) - len(raw))
        label = cells[g_idx].strip()
        if not label:
            raise MissingValue(r, group_column)
        labels.append(label)
        values.append([_parse_float(cells[j], r, header[j]) for j in t_idx])
    y = np.array(values, dtype=np.float64).reshape(len(values), len(times))
    return LongitudinalDataset.from_arrays(y, times, labels, group_order)


def dental_dataset() -> LongitudinalDataset:
    """Potthoff-Roy dental measurements: 11 girls and 16 boys at ages 8, 10, 12, 14."""
    ref = resources.files("agcm").joinpath("assets/dental.csv")
    with resources.as_file(ref) as path:
        return load_csv(path, group_order=("girls", "boys"))


def fit_degrees(
    data: LongitudinalDataset, degrees: Sequence[int], *, tol: float = ORTHOGONALITY_TOL
) -> tuple[ModelSpec, FitResult]:
    spec = data.spec(degrees, tol=tol)
    return spec, fit(data.Y, spec)


@dataclass(frozen=True)
class SelectionEntry:
    degrees: tuple[int, ...]
    aic: float | None
    n_params: int | None
    rmss: float | None
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SelectionResult:
    grid: tuple[SelectionEntry, ...]
    best: tuple[int, ...] | None
    ties: tuple[tuple[int, ...], ...] = field(default=())
    group_order: tuple[str, ...] = ()

    def entry(self, degrees: Sequence[int]) -> SelectionEntry:
        key = tuple(degrees)
        for e in self.grid:
            if e.degrees == key:
                return e
        raise KeyError(key)

    def aic(self, degrees: Sequence[int]) -> float:
        value = self.entry(degrees).aic
        if value is None:
            raise KeyError(tuple(degrees))
        return value

    @property
    def invalid(self) -> tuple[SelectionEntry, ...]:
        return tuple(e for e in self.grid if not e.valid)


def select_degrees(
    data: LongitudinalDataset,
    max_degrees: Sequence[int] | int,
    min_degrees: Sequence[int] | int = 1,
    *,
    tie_tol: float = 1e-9,
    tol: float = ORTHOGONALITY_TOL,
) -> SelectionResult:
    """Fit every degree tuple in the grid and pick the minimum-AIC model.

    AICs within ``tie_tol`` (relative) of the minimum are ties; they are
    broken by fewer parameters, then by the lexicographically smaller
    degree tuple. Candidates that fail to fit are kept in the grid with
    their error message and excluded from selection.
    """
    k = len(data.group_order)
    hi = [max_degrees] * k if isinstance(max_degrees, int) else list(max_degrees)
    lo = [min_degrees] * k if isinstance(min_degrees, int) else list(min_degrees)
    if len(hi) != k or len(lo) != k:
        raise ShapeMismatch(f"need one degree bound per group ({k})")
    entries = []
    for degrees in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        try:
            spec, res = fit_degrees(data, degrees, tol=tol)
        except AgcmError as exc:
            entries.append(SelectionEntry(tuple(degrees), None, None, None, f"{type(exc).__name__}: {exc}"))
            continue
        entries.append(SelectionEntry(tuple(degrees), res.aic, spec.n_params, res.rmss))
    valid = [e for e in entries if e.valid]
    if not valid:
        return SelectionResult(tuple(entries), None, (), tuple(data.group_order))
    low = min(e.aic for e in valid)
    tied = [e for e in valid if e.aic - low <= tie_tol * max(1.0, abs(low))]
    tied.sort(key=lambda e: (e.n_params, e.degrees))
    return SelectionResult(
        tuple(entries),
        tied[0].degrees,
        tuple(e.degrees for e in tied[1:]),
        tuple(data.group_order),
    )
