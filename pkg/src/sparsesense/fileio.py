"""CSV panels, report tables, per-run series and run manifests."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Location, MeasurementPanel, ParseError
from .dsar import DsarModel

REPORT_HEADER = "strategy,param,mean_rmse,stddev,repeats"
SERIES_HEADER = "t,cycle_rmse,lambda_tu,lambda_if,lambda_at"


def _float(text: str, lineno: int, path) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: non-numeric field {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"{path}:{lineno}: non-finite field {text!r}")
    return value


def parse_panel_csv(path) -> MeasurementPanel:
    """Read a wide panel: ``cycle,<name_0>,...`` then optional ``coord,<x:y>,...``, then one row per cycle.

    Empty fields are missing cells. Cycles must run 0, 1, 2, ... without gaps.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0].strip() != "cycle":
        raise ParseError(f"{path}:1: header must start with 'cycle'")
    names = [n.strip() for n in rows[0][1:]]
    S = len(names)
    if S == 0:
        raise ParseError(f"{path}:1: no location columns")
    coords = None
    body_start = 1
    if len(rows) > 1 and rows[1] and rows[1][0].strip() == "coord":
        if len(rows[1]) != S + 1:
            raise ParseError(f"{path}:2: expected {S + 1} fields, got {len(rows[1])}")
        coords = []
        for field_ in rows[1][1:]:
            parts = field_.split(":")
            if len(parts) != 2:
                raise ParseError(f"{path}:2: coordinate {field_!r} is not of the form x:y")
            coords.append((_float(parts[0], 2, path), _float(parts[1], 2, path)))
        body_start = 2
    values, mask = [], []
    for offset, row in enumerate(rows[body_start:]):
        lineno = body_start + offset + 1
        if not row:
            continue
        if len(row) != S + 1:
            raise ParseError(f"{path}:{lineno}: expected {S + 1} fields, got {len(row)}")
        try:
            cycle = int(row[0])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: cycle {row[0]!r} is not an integer") from None
        if cycle != len(values):
            raise ParseError(f"{path}:{lineno}: expected cycle {len(values)}, got {cycle}")
        vrow, mrow = [], []
        for field_ in row[1:]:
            if field_.strip() == "":
                vrow.append(0.0)
                mrow.append(False)
            else:
                vrow.append(_float(field_, lineno, path))
                mrow.append(True)
        values.append(vrow)
        mask.append(mrow)
    if not values:
        raise ParseError(f"{path}: no data rows")
    locs = tuple(Location(s, names[s], None if coords is None else coords[s]) for s in range(S))
    return MeasurementPanel(locs, np.array(values).T, np.array(mask).T)


def parse_long_csv(path) -> MeasurementPanel:
    """Read ``cycle,station,value`` rows and pivot to a wide panel.

    Stations are ordered by first appearance; absent (cycle, station) pairs are
    missing; a repeated pair is an error.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["cycle", "station", "value"]:
        raise ParseError(f"{path}:1: header must be 'cycle,station,value'")
    cells: dict = {}
    stations: dict = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            cycle = int(row[0])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: cycle {row[0]!r} is not an integer") from None
        station = row[1].strip()
        stations.setdefault(station, len(stations))
        if (cycle, station) in cells:
            raise ParseError(f"{path}:{lineno}: duplicate entry for cycle {cycle}, station {station!r}")
        cells[(cycle, station)] = None if row[2].strip() == "" else _float(row[2], lineno, path)
    if not cells:
        raise ParseError(f"{path}: no data rows")
    cycles = sorted({c for c, _ in cells})
    if cycles != list(range(len(cycles))):
        raise ParseError(f"{path}: cycles must be consecutive integers from 0")
    S, T = len(stations), len(cycles)
    values = np.zeros((S, T))
    mask = np.zeros((S, T), dtype=bool)
    for (cycle, station), v in cells.items():
        if v is not None:
            values[stations[station], cycle] = v
            mask[stations[station], cycle] = True
    locs = tuple(Location(i, name) for name, i in stations.items())
    return MeasurementPanel(locs, values, mask)


def write_panel_csv(panel: MeasurementPanel, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle"] + [loc.name for loc in panel.locations])
        if panel.has_coords:
            w.writerow(["coord"] + [f"{loc.coords[0]!r}:{loc.coords[1]!r}" for loc in panel.locations])
        for t in range(panel.T):
            w.writerow([t] + [repr(float(panel.values[s, t])) if panel.mask[s, t] else "" for s in range(panel.S)])
    return path


def write_truth_csv(model: DsarModel, weight_kind: str, seed: int, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "lag", "phi", "weight_kind", "seed"])
        for s in range(model.S):
            for i in range(model.p):
                w.writerow([s, i + 1, repr(float(model.phi[s, i])), weight_kind, seed])
    return path


def _f4(x: float) -> str:
    return f"{x:.4f}"


def write_report_csv(rows: Iterable, path) -> Path:
    """Write ``strategy,param,mean_rmse,stddev,repeats`` rows sorted by (strategy, param)."""
    path = Path(path)
    lines = [REPORT_HEADER]
    for r in sorted(rows, key=lambda r: (r.strategy, r.param)):
        lines.append(f"{r.strategy},{_f4(r.param)},{_f4(r.mean_rmse)},{_f4(r.stddev)},{int(r.repeats)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_series_csv(reports: Sequence, path) -> Path:
    path = Path(path)
    lines = [SERIES_HEADER]
    for r in reports:
        lam = r.lambdas
        lines.append(f"{r.t},{r.cycle_rmse:.6f},{lam[0]:.6f},{lam[1]:.6f},{lam[2]:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@dataclass
class RunManifest:
    config_checksum: str
    seed: int
    started: str = field(default_factory=lambda: _now())
    finished: str = ""
    artifacts: list = field(default_factory=list)

    def add(self, path) -> None:
        self.artifacts.append(str(path))

    def write(self, out_dir) -> Path:
        """Write ``manifest.txt`` listing every artifact relative to ``out_dir``."""
        out_dir = Path(out_dir)
        self.finished = self.finished or _now()
        lines = [
            f"config_sha256: {self.config_checksum}",
            f"seed: {self.seed}",
            f"started: {self.started}",
            f"finished: {self.finished}",
        ]
        for a in self.artifacts:
            lines.append(f"artifact: {Path(a).relative_to(out_dir).as_posix()}")
        path = out_dir / "manifest.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def read_manifest_artifacts(path) -> list[str]:
    return [line.split(": ", 1)[1] for line in Path(path).read_text().splitlines() if line.startswith("artifact: ")]
