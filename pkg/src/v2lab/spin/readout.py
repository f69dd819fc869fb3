"""Threshold post-selection and normalized readout with propagated errors."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

CSV_HEADER = ["sweep_value", "rep", "check", "norm1", "norm0", "ro"]


class NormalizationError(ValueError):
    pass


@dataclass
class SpinSweepRecord:
    """Per-repetition block counts for one sweep value."""

    sweep_value: float
    check: np.ndarray
    norm1: np.ndarray
    norm0: np.ndarray
    ro: np.ndarray

    def __post_init__(self):
        self.check = np.asarray(self.check, dtype=np.int64)
        self.norm1 = np.asarray(self.norm1, dtype=np.int64)
        self.norm0 = np.asarray(self.norm0, dtype=np.int64)
        self.ro = np.asarray(self.ro, dtype=np.int64)
        n = self.check.size
        if not (self.norm1.size == self.norm0.size == self.ro.size == n):
            raise ValueError("count arrays differ in length")
        if n and min(a.min() for a in (self.check, self.norm1, self.norm0, self.ro)) < 0:
            raise ValueError("counts must be non-negative")


@dataclass
class NormalizedReadout:
    sweep: np.ndarray
    r: np.ndarray
    sigma: np.ndarray
    n_used: np.ndarray
    skipped: dict


def normalized_readout(a, b, c, sigma_a=0.0, sigma_b=0.0, sigma_c=0.0):
    """``R = (C - B)/(A - B)`` and its first-order uncertainty.

    ``sigma_R^2 = (C-B)^2/(A-B)^4 sA^2 + (A-C)^2/(A-B)^4 sB^2 + sC^2/(A-B)^2``.
    """
    d = a - b
    if abs(d) <= np.finfo(float).eps * max(abs(a), abs(b), 1.0):
        raise NormalizationError("norm.1 and norm.0 means coincide")
    r = (c - b) / d
    var = ((c - b) ** 2 * sigma_a ** 2 + (a - c) ** 2 * sigma_b ** 2) / d ** 4 + sigma_c ** 2 / d ** 2
    return r, math.sqrt(var)


def normalize_readout(records, check_threshold: int, strict: bool = True) -> NormalizedReadout:
    """Post-select repetitions with ``check >= check_threshold`` and normalize.

    ``A``, ``B``, ``C`` are the mean norm.1, norm.0 and readout counts of the
    passing repetitions; their uncertainties are standard errors of the mean
    (unbiased sample standard deviation over ``sqrt(n)``). With ``strict`` a
    sweep value with fewer than two passing repetitions or ``A == B`` raises;
    otherwise it is dropped and listed in ``skipped``.
    """
    sweep, rs, sig, used, skipped = [], [], [], [], {}
    for rec in records:
        keep = rec.check >= check_threshold
        n = int(keep.sum())
        if n < 2:
            if strict:
                raise NormalizationError(f"sweep value {rec.sweep_value}: {n} repetitions pass the threshold")
            skipped[rec.sweep_value] = "insufficient"
            continue
        cols = [rec.norm1[keep].astype(float), rec.norm0[keep].astype(float), rec.ro[keep].astype(float)]
        means = [float(c.mean()) for c in cols]
        sems = [float(c.std(ddof=1)) / math.sqrt(n) for c in cols]
        try:
            r, s = normalized_readout(*means, *sems)
        except NormalizationError as exc:
            if strict:
                raise NormalizationError(f"sweep value {rec.sweep_value}: {exc}") from None
            skipped[rec.sweep_value] = "degenerate"
            continue
        sweep.append(rec.sweep_value)
        rs.append(r)
        sig.append(s)
        used.append(n)
    return NormalizedReadout(np.array(sweep), np.array(rs), np.array(sig), np.array(used, dtype=int), skipped)


def write_sweep_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in records:
            for k in range(rec.check.size):
                w.writerow([repr(float(rec.sweep_value)), k, int(rec.check[k]), int(rec.norm1[k]),
                            int(rec.norm0[k]), int(rec.ro[k])])


def read_sweep_csv(path) -> list[SpinSweepRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        rows = [r for r in reader if r]
    groups: dict[float, list] = {}
    for r in rows:
        groups.setdefault(float(r[0]), []).append((int(r[1]), *map(int, r[2:])))
    out = []
    for value, items in groups.items():
        items.sort()
        arr = np.array([i[1:] for i in items], dtype=np.int64).reshape(-1, 4)
        out.append(SpinSweepRecord(value, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]))
    return out
