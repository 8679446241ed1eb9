"""Reading and writing the challenge's CSV files.

Dialect: comma separated, dot decimal, header row, no quoting. Floats are
written with ``repr`` so that write-then-read reproduces every value bit for
bit.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from fleetrisk.schema import (
    FEATURE_PREFIX,
    N_VARIANT_SPECS,
    FleetTable,
    LabelError,
    RiskLabel,
    SchemaError,
    VariantsTable,
    feature_names,
)

TIMESTEP_COL = "Timesteps"
CHASSIS_COL = "ChassisId_encoded"
GEN_COL = "gen"
RISK_COL = "risk_level"
PRED_COL = "pred"


class ParseError(ValueError):
    """A cell could not be parsed; carries the 0-based data row index."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class CountError(ValueError):
    """Row count differs from what the caller expected."""


def _fleet_header(n_features: int, labeled: bool) -> list[str]:
    head = [TIMESTEP_COL, CHASSIS_COL, GEN_COL]
    if labeled:
        head.append(RISK_COL)
    return head + feature_names(n_features)


def _check_fleet_header(header: list[str], expect_labels: bool) -> int:
    mandatory = [TIMESTEP_COL, CHASSIS_COL, GEN_COL] + ([RISK_COL] if expect_labels else [])
    for pos, name in enumerate(mandatory):
        if pos >= len(header) or header[pos] != name:
            raise SchemaError(f"missing mandatory column {name!r} at position {pos}")
    rest = header[len(mandatory):]
    if not expect_labels and RISK_COL in rest:
        raise SchemaError(f"unexpected column {RISK_COL!r} in an unlabeled table")
    for k, name in enumerate(rest):
        if name != f"{FEATURE_PREFIX}{k}":
            raise SchemaError(f"unexpected column {name!r}; expected {FEATURE_PREFIX}{k}")
    return len(rest)


def read_fleet_table(path: str | Path, expect_labels: bool) -> FleetTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        n_features = _check_fleet_header(header, expect_labels)
        offset = len(header) - n_features
        width = len(header)

        steps: list[int] = []
        ids: list[str] = []
        gens: list[str] = []
        risks: list[int] = []
        feats: list[list[float]] = []
        for i, row in enumerate(reader):
            if len(row) != width:
                raise ParseError(f"expected {width} cells, found {len(row)}", i)
            try:
                steps.append(int(row[0]))
            except ValueError:
                raise ParseError(f"non-integer timestep {row[0]!r}", i) from None
            ids.append(row[1])
            gens.append(row[2])
            if expect_labels:
                try:
                    risks.append(int(RiskLabel.parse(row[3])))
                except LabelError as exc:
                    raise LabelError(f"row {i}: {exc}") from None
            vals = []
            for j, cell in enumerate(row[offset:]):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"non-numeric value {cell!r} in column {header[offset + j]}", i) from None
            feats.append(vals)

    table = FleetTable(
        timestep=np.asarray(steps, dtype=np.int64),
        chassis_id=np.asarray(ids, dtype=object),
        gen=np.asarray(gens, dtype=object),
        features=np.asarray(feats, dtype=np.float64).reshape(len(feats), n_features),
        risk_level=np.asarray(risks, dtype=np.int64) if expect_labels else None,
    )
    table.validate()
    return table


def write_fleet_table(table: FleetTable, path: str | Path) -> None:
    table.validate()
    labeled = table.labeled
    with open(path, "w", newline="") as fh:
        fh.write(",".join(_fleet_header(table.n_features, labeled)) + "\n")
        risk = table.risk_level
        for i in range(len(table)):
            head = [str(int(table.timestep[i])), str(table.chassis_id[i]), str(table.gen[i])]
            if labeled:
                head.append(str(RiskLabel(int(risk[i]))))
            fh.write(",".join(head + [repr(v) for v in table.features[i].tolist()]) + "\n")


def read_variants(path: str | Path) -> VariantsTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != N_VARIANT_SPECS + 1:
            raise SchemaError(f"variants file must have {N_VARIANT_SPECS + 1} columns")
        if header[0] != CHASSIS_COL:
            raise SchemaError(f"missing mandatory column {CHASSIS_COL!r}")
        ids, specs = [], []
        for i, row in enumerate(reader):
            if len(row) != N_VARIANT_SPECS + 1:
                raise SchemaError(f"row {i}: expected {N_VARIANT_SPECS + 1} columns, found {len(row)}")
            ids.append(row[0])
            try:
                specs.append([int(c) for c in row[1:]])
            except ValueError:
                raise ParseError("non-integer spec value", i) from None
    table = VariantsTable(np.asarray(ids, dtype=object), np.asarray(specs, dtype=np.int64))
    table.validate()
    return table


def write_variants(table: VariantsTable, path: str | Path) -> None:
    table.validate()
    with open(path, "w", newline="") as fh:
        fh.write(",".join([CHASSIS_COL] + [f"spec_{k}" for k in range(N_VARIANT_SPECS)]) + "\n")
        for cid, spec in zip(table.chassis_id, table.specs.tolist()):
            fh.write(",".join([str(cid)] + [str(v) for v in spec]) + "\n")


def write_prediction_file(labels: Sequence[RiskLabel], path: str | Path) -> None:
    if len(labels) == 0:
        raise CountError("refusing to write an empty prediction file")
    with open(path, "w", newline="") as fh:
        fh.write(PRED_COL + "\n")
        for lab in labels:
            fh.write(str(RiskLabel(lab)) + "\n")


def read_prediction_file(path: str | Path, expected_rows: int | None = None) -> list[RiskLabel]:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != PRED_COL:
        raise SchemaError(f"prediction file must start with header {PRED_COL!r}")
    body = lines[1:]
    if expected_rows is not None and len(body) != expected_rows:
        raise CountError(f"expected {expected_rows} prediction rows, found {len(body)}")
    out = []
    for i, text in enumerate(body):
        try:
            out.append(RiskLabel.parse(text))
        except LabelError as exc:
            raise LabelError(f"row {i}: {exc}") from None
    return out


def write_failures(failures: Mapping[str, int | None], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("chassis_id,failure_timestep\n")
        for cid, t in failures.items():
            fh.write(f"{cid},{'' if t is None else int(t)}\n")


def read_failures(path: str | Path) -> dict[str, int | None]:
    out: dict[str, int | None] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["chassis_id", "failure_timestep"]:
            raise SchemaError("failures file needs columns chassis_id,failure_timestep")
        for i, row in enumerate(reader):
            if len(row) != 2:
                raise ParseError("expected 2 cells", i)
            try:
                out[row[0]] = int(row[1]) if row[1] else None
            except ValueError:
                raise ParseError(f"bad failure timestep {row[1]!r}", i) from None
    return out


def write_truth(labels: Sequence[RiskLabel], gens: Sequence[str], chassis: Sequence[str],
                steps: Sequence[int], path: str | Path) -> None:
    """Held-out truth, one row per test readout."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{TIMESTEP_COL},{CHASSIS_COL},{GEN_COL},{RISK_COL}\n")
        for t, c, g, lab in zip(steps, chassis, gens, labels):
            fh.write(f"{int(t)},{c},{g},{RiskLabel(lab)}\n")


def read_truth(path: str | Path) -> tuple[list[RiskLabel], list[str]]:
    labels, gens = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != [TIMESTEP_COL, CHASSIS_COL, GEN_COL, RISK_COL]:
            raise SchemaError("truth file needs columns Timesteps,ChassisId_encoded,gen,risk_level")
        for i, row in enumerate(reader):
            if len(row) != 4:
                raise ParseError("expected 4 cells", i)
            gens.append(row[2])
            try:
                labels.append(RiskLabel.parse(row[3]))
            except LabelError as exc:
                raise LabelError(f"row {i}: {exc}") from None
    return labels, gens
