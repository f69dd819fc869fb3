"""Text formats for PLE scans, peak lists, PL maps and damage tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .peaks import PlePeak, PleSpectrum
from .stats import DamageTable, PlMap

PLE_HEADER = ["pillar_id", "frequency_ghz", "rate_khz"]
DAMAGE_HEADER = ["energy_uj", "exposed", "damaged"]


def _check_header(got, want, path):
    got = [h.strip() for h in got]
    if got != want:
        raise ValueError(f"{path}: expected header {','.join(want)}, got {','.join(got)}")


def write_ple_csv(path, spectra) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLE_HEADER)
        for s in spectra:
            for f, r in zip(s.frequency_ghz, s.rate_khz):
                w.writerow([s.pillar_id, f"{f:.6f}", f"{r:.6f}"])


def read_ple_csv(path) -> list[PleSpectrum]:
    """Spectra in file order of first appearance, each sorted by frequency."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader), PLE_HEADER, path)
        groups: dict[str, list] = {}
        for row in reader:
            if row:
                groups.setdefault(row[0], []).append((float(row[1]), float(row[2])))
    out = []
    for pid, rows in groups.items():
        arr = np.array(sorted(rows))
        out.append(PleSpectrum(pid, arr[:, 0], arr[:, 1]))
    return out


def write_peaks_json(path, pillar_id: str, peaks) -> None:
    doc = {"pillar_id": pillar_id, "peaks": [p.to_dict() for p in peaks]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_peaks_dir(directory) -> dict[str, list[PlePeak]]:
    """All ``*.json`` peak files in a directory, keyed by pillar id.

    ``*.meta.json`` sidecars (run summaries) are skipped.
    """
    out = {}
    for path in sorted(Path(directory).glob("*.json")):
        if path.name.endswith(".meta.json"):
            continue
        doc = json.loads(path.read_text())
        out[str(doc["pillar_id"])] = [PlePeak.from_dict(d) for d in doc.get("peaks", [])]
    return out


def write_plmap_csv(path, pl: PlMap) -> None:
    """First line: ``y_um\\x_um`` then the x axis; each following row starts with its y."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y_um\\x_um"] + [repr(float(x)) for x in pl.x_um])
        for y, row in zip(pl.y_um, pl.counts):
            w.writerow([repr(float(y))] + [repr(float(v)) for v in row])


def read_plmap_csv(path, baseline_rows=()) -> PlMap:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: empty map")
    x = np.array([float(v) for v in rows[0][1:]])
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    return PlMap(body[:, 1:], x, body[:, 0], list(baseline_rows))


def write_damage_csv(path, table: DamageTable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DAMAGE_HEADER)
        for e, n, k in zip(table.energy_uj, table.exposed, table.damaged):
            w.writerow([repr(float(e)), int(n), int(k)])


def read_damage_csv(path) -> DamageTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader), DAMAGE_HEADER, path)
        rows = [r for r in reader if r]
    return DamageTable([float(r[0]) for r in rows], [int(r[1]) for r in rows], [int(r[2]) for r in rows])
