"""CSV persistence for check/probe records."""

from __future__ import annotations

import csv

import numpy as np

from .models import CheckProbeRecords

BASE_HEADER = ["rep", "delay_ms", "check_counts", "probe_counts"]
DETUNING_COLUMN = "probe_detuning_mhz"


def write_records_csv(path, records) -> None:
    """Write ``rep,delay_ms,check_counts,probe_counts``.

    A trailing ``probe_detuning_mhz`` column is added only when some record
    probes away from zero detuning.
    """
    table = CheckProbeRecords.from_records(records)
    with_det = bool(np.any(table.probe_detuning_mhz != 0))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BASE_HEADER + ([DETUNING_COLUMN] if with_det else []))
        for i in range(len(table)):
            row = [int(table.rep[i]), repr(float(table.delay_ms[i])),
                   int(table.check_counts[i]), int(table.probe_counts[i])]
            if with_det:
                row.append(repr(float(table.probe_detuning_mhz[i])))
            w.writerow(row)


def read_records_csv(path) -> CheckProbeRecords:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header[:4] != BASE_HEADER:
            raise ValueError(f"unexpected header {header!r}; expected {','.join(BASE_HEADER)}")
        rows = [r for r in reader if r]
    if not rows:
        return CheckProbeRecords([], [], [], [])
    cols = list(zip(*rows))
    det = np.asarray(cols[4], dtype=float) if len(header) > 4 and header[4] == DETUNING_COLUMN else None
    return CheckProbeRecords(
        np.asarray(cols[0], dtype=np.int64),
        np.asarray(cols[1], dtype=float),
        np.asarray(cols[2], dtype=np.int64),
        np.asarray(cols[3], dtype=np.int64),
        det,
    )
