"""System-level datasets and their CSV file format.

One row per system::

    system_id,time,c1,...,cm[,covariate columns]

Component columns hold 1 (caused the failure), 2 (right-censored),
3 (left-censored) or ``M`` (masked).
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .inference import ComponentData
from .structures import SystemStructure, eval_lifetime

__all__ = ["SystemDataset", "DatasetError", "IngestResult", "ingest", "emit", "row_is_feasible",
           "masked_set_is_valid"]

MASKED = 0


class DatasetError(ValueError):
    """Malformed or structurally inconsistent dataset."""


@dataclass
class SystemDataset:
    """Failure times and per-component status codes; 0 marks a masked entry.

    ``lifetimes`` and ``true_status`` are only known for simulated data.
    """

    times: np.ndarray
    status: np.ndarray
    system_ids: list = None
    covariates: np.ndarray | None = None
    covariate_names: tuple = ()
    lifetimes: np.ndarray | None = None
    true_status: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.status = np.atleast_2d(np.asarray(self.status, dtype=int))
        if self.status.shape[0] != self.times.size:
            raise DatasetError("one status row per system time is required")
        if self.system_ids is None:
            self.system_ids = [str(i + 1) for i in range(self.times.size)]

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def m(self) -> int:
        return self.status.shape[1]

    def component(self, j: int) -> ComponentData:
        """Observations of component ``j`` (1-based)."""
        return ComponentData(self.times, self.status[:, j - 1], self.covariates)

    def masked_sets(self) -> list[tuple[int, ...]]:
        return [tuple(int(j) + 1 for j in np.flatnonzero(row == MASKED)) for row in self.status]

    @property
    def masked_rows(self) -> np.ndarray:
        return np.any(self.status == MASKED, axis=1)

    def cause_table(self) -> dict[str, int]:
        """Systems per observed cause, then per distinct masked set.

        Causes come first in component order; masked sets follow sorted by
        size, then lexicographically.
        """
        table = {}
        unmasked = ~self.masked_rows
        for j in range(self.m):
            table[f"cause {j + 1}"] = int(np.sum(unmasked & (self.status[:, j] == 1)))
        sets = Counter(s for s in self.masked_sets() if s)
        for s in sorted(sets, key=lambda s: (len(s), s)):
            table["M{" + ",".join(map(str, s)) + "}"] = sets[s]
        return table


@dataclass
class IngestResult:
    dataset: SystemDataset
    cause_table: dict
    warnings: list = field(default_factory=list)


def masked_set_is_valid(structure: SystemStructure, masked: tuple[int, ...]) -> bool:
    """A masked set must sit inside one minimal cut set or be a union of them."""
    ms = set(masked)
    cuts = [set(c) for c in structure.cut_sets]
    if any(ms <= c for c in cuts):
        return True
    inside = [c for c in cuts if c <= ms]
    return bool(inside) and set().union(*inside) == ms


def row_is_feasible(structure: SystemStructure, codes, max_masked: int = 10) -> bool:
    """Whether some lifetimes produce the observed codes (0 = masked).

    Min/max expressions only see how each lifetime orders against the system
    time, so failed components are placed at ``T/2`` and survivors at ``2T``.
    Rows with more than ``max_masked`` masked entries are not checked.
    """
    codes = np.asarray(codes)
    masked = np.flatnonzero(codes == MASKED)
    if masked.size > max_masked:
        return True
    for fill in product((1, 2, 3), repeat=masked.size):
        full = codes.copy()
        full[masked] = fill
        if np.sum(full == 1) != 1:
            continue
        x = np.where(full == 1, 1.0, np.where(full == 2, 2.0, 0.5))
        if eval_lifetime(structure, x) == 1.0:
            return True
    return False


def _parse_code(text, line_no, col):
    text = text.strip()
    if text.upper() == "M":
        return MASKED
    if text in ("1", "2", "3"):
        return int(text)
    raise DatasetError(f"line {line_no}: bad status {text!r} in column {col}")


def ingest(source, structure: SystemStructure | None = None, *, covariate_names=(),
           allowed_masked_sets=None, strict: bool = False) -> IngestResult:
    """Read a dataset file and validate it against a structure.

    Parameters
    ----------
    source : path or str
        A file path, or the CSV text itself when it contains a newline.
    structure : SystemStructure, optional
        When given, component count, masked sets and row consistency are
        checked against it.
    covariate_names : sequence of str
        Extra columns to read as covariates.
    allowed_masked_sets : iterable of tuples, optional
        Masked sets the data collection can produce. Other masked sets are
        reported as warnings, or rejected when ``strict``.

    Raises
    ------
    DatasetError
        On malformed rows (with the line number) and on masked sets that do
        not fit the structure's minimal cut sets.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DatasetError("empty dataset file") from None
    if header[:2] != ["system_id", "time"]:
        raise DatasetError("line 1: header must start with system_id,time")
    comp_cols = [i for i, h in enumerate(header) if h.startswith("c") and h[1:].isdigit()]
    m = len(comp_cols)
    if m == 0:
        raise DatasetError("line 1: no component columns c1..cm")
    if [header[i] for i in comp_cols] != [f"c{j}" for j in range(1, m + 1)]:
        raise DatasetError("line 1: component columns must be c1..cm in order")
    if structure is not None and structure.m != m:
        raise DatasetError(f"file has {m} components, structure has {structure.m}")
    cov_idx = []
    for name in covariate_names:
        if name not in header:
            raise DatasetError(f"line 1: covariate column {name!r} missing")
        cov_idx.append(header.index(name))
    allowed = None if allowed_masked_sets is None else {tuple(sorted(s)) for s in allowed_masked_sets}

    ids, times, rows, covs, notes = [], [], [], [], []
    for line_no, rec in enumerate(reader, start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != len(header):
            raise DatasetError(f"line {line_no}: expected {len(header)} fields, got {len(rec)}")
        try:
            t = float(rec[1])
        except ValueError:
            raise DatasetError(f"line {line_no}: bad time {rec[1]!r}") from None
        if not (np.isfinite(t) and t > 0):
            raise DatasetError(f"line {line_no}: time must be positive")
        codes = np.array([_parse_code(rec[i], line_no, header[i]) for i in comp_cols])
        masked = tuple(int(j) + 1 for j in np.flatnonzero(codes == MASKED))
        n_cause = int(np.sum(codes == 1))
        if masked and n_cause:
            raise DatasetError(f"line {line_no}: the cause is observed but components are masked")
        if not masked and n_cause != 1:
            raise DatasetError(f"line {line_no}: exactly one component must have status 1")
        if structure is not None:
            if masked and not masked_set_is_valid(structure, masked):
                raise DatasetError(f"line {line_no}: masked set {set(masked)} does not match any minimal cut set")
            if not row_is_feasible(structure, codes):
                raise DatasetError(f"line {line_no}: statuses are impossible for this structure")
        if masked and allowed is not None and masked not in allowed:
            msg = f"line {line_no}: masked set {set(masked)} is not an allowed masked set"
            if strict:
                raise DatasetError(msg)
            notes.append(msg)
        if cov_idx:
            try:
                covs.append([float(rec[i]) for i in cov_idx])
            except ValueError:
                raise DatasetError(f"line {line_no}: bad covariate value") from None
        ids.append(rec[0].strip())
        times.append(t)
        rows.append(codes)
    if not rows:
        raise DatasetError("dataset has no rows")
    dataset = SystemDataset(np.array(times), np.array(rows), system_ids=ids,
                            covariates=np.array(covs) if cov_idx else None,
                            covariate_names=tuple(covariate_names))
    return IngestResult(dataset, dataset.cause_table(), notes)


def emit(dataset: SystemDataset) -> str:
    """CSV text for ``dataset``; ``ingest(emit(ds))`` reproduces it exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["system_id", "time"] + [f"c{j}" for j in range(1, dataset.m + 1)]
                    + list(dataset.covariate_names))
    for i in range(dataset.n):
        codes = ["M" if c == MASKED else str(int(c)) for c in dataset.status[i]]
        extra = [] if dataset.covariates is None else [repr(float(v)) for v in dataset.covariates[i]]
        writer.writerow([dataset.system_ids[i], repr(float(dataset.times[i]))] + codes + extra)
    return buf.getvalue()
