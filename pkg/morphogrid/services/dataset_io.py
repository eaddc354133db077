"""Landmark ingestion (TPS, CSV) and the canonical JSON dataset format."""
import io
import json
import math
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import jsonschema
import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError

from morphogrid.core.config import DATASET_JSON_SCHEMA, DATASET_SCHEMA_VERSION, DEFAULT_GROUP
from morphogrid.core.errors import HomologyError, ParseError, SchemaMismatchError
from morphogrid.models.landmarks import (
    CoordinateUnit,
    Dataset,
    LandmarkConfiguration,
    Provenance,
    Sample,
    default_labels,
)

_KEY_VALUE = re.compile(r"^\s*([A-Za-z]+)\s*=\s*(.*?)\s*$")


def _build_sample(records: List[Dict[str, Any]], labels: Optional[Sequence[str]] = None, metadata=None) -> Sample:
    configurations = []
    groups = {}
    for record in records:
        configurations.append(
            LandmarkConfiguration.from_array(
                record["id"],
                record["coords"],
                labels=labels,
                unit=CoordinateUnit(record.get("unit", CoordinateUnit.RAW.value)),
            )
        )
        groups[record["id"]] = record.get("group") or DEFAULT_GROUP
    return Sample(configurations=configurations, groups=groups, metadata=metadata or {})


def _finite(value: float, where: str, **position) -> float:
    if not math.isfinite(value):
        raise ParseError(f"non-finite coordinate in {where}", **position)
    return value


def parse_tps_file(text: str, group: Optional[str] = None) -> Sample:
    """Parse TPS records: ``LM=k`` then k coordinate lines, optional ``ID=`` and ``SCALE=``."""
    records: List[Dict[str, Any]] = []
    current: Optional[Dict[str, Any]] = None
    remaining = 0
    expected_k: Optional[int] = None

    def close(line_number: int) -> None:
        if current is None:
            return
        if remaining:
            raise ParseError(f"record ends with {remaining} coordinate lines missing", line=line_number)
        coords = np.asarray(current["coords"], dtype=float) * current.get("scale", 1.0)
        current["coords"] = coords
        current.setdefault("id", f"specimen{len(records) + 1}")
        records.append(current)

    lines = text.splitlines()
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if remaining:
            parts = line.split()
            if len(parts) < 2:
                raise ParseError(f"expected two coordinates, got {line!r}", line=number)
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError:
                raise ParseError(f"could not read coordinates from {line!r}", line=number) from None
            current["coords"].append((_finite(x, "TPS record", line=number), _finite(y, "TPS record", line=number)))
            remaining -= 1
            continue
        match = _KEY_VALUE.match(line)
        if not match:
            raise ParseError(f"unexpected line {line!r}", line=number)
        key, value = match.group(1).upper(), match.group(2)
        if key == "LM":
            close(number)
            try:
                k = int(value)
            except ValueError:
                raise ParseError(f"LM= needs an integer, got {value!r}", line=number) from None
            if expected_k is not None and k != expected_k:
                raise ParseError(f"record has {k} landmarks, earlier records have {expected_k}", line=number)
            expected_k = k
            current = {"coords": []}
            remaining = k
            if group:
                current["group"] = group
        elif current is None:
            raise ParseError(f"{key}= appears before any LM= line", line=number)
        elif key == "ID":
            current["id"] = value
        elif key == "SCALE":
            try:
                current["scale"] = _finite(float(value), "SCALE", line=number)
            except ValueError:
                raise ParseError(f"SCALE= needs a number, got {value!r}", line=number) from None
        else:
            logger.debug(f"Ignoring TPS key {key} on line {number}")
    close(len(lines))
    if not records:
        raise ParseError("no LM= records found", line=len(lines))
    logger.info(f"Parsed {len(records)} TPS records with {expected_k} landmarks each")
    return _build_sample(records)


def parse_csv(text: str) -> Sample:
    """Long form ``id,label,x,y[,group]`` or wide form ``id[,group],x1,y1,...,xk,yk``."""
    try:
        frame = pd.read_csv(io.StringIO(text), dtype={"id": str, "label": str, "group": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ParseError(f"unreadable CSV: {exc}") from None
    columns = [c.strip() for c in frame.columns]
    frame.columns = columns
    if "id" not in columns:
        raise SchemaMismatchError("CSV header must start with an 'id' column", {"columns": columns})

    if {"label", "x", "y"} <= set(columns):
        return _parse_long(frame)
    return _parse_wide(frame)


def _numeric(frame: pd.DataFrame, column: str) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise ParseError(f"malformed or non-finite value in column {column!r}", row=row)
    return values.astype(float)


def _parse_long(frame: pd.DataFrame) -> Sample:
    frame = frame.assign(x=_numeric(frame, "x"), y=_numeric(frame, "y"))
    records = []
    labels = None
    for specimen, block in frame.groupby("id", sort=False):
        block_labels = block["label"].tolist()
        if labels is None:
            labels = block_labels
        elif block_labels != labels:
            raise HomologyError(
                f"configuration {specimen!r} is not homologous with {records[0]['id']!r}: "
                f"labels {block_labels} vs {labels}"
            )
        record = {"id": str(specimen), "coords": block[["x", "y"]].to_numpy()}
        if "group" in block:
            record["group"] = str(block["group"].iloc[0])
        records.append(record)
    return _build_sample(records, labels=labels)


def _parse_wide(frame: pd.DataFrame) -> Sample:
    coordinate_columns = [c for c in frame.columns if c not in ("id", "group")]
    if len(coordinate_columns) % 2 or not coordinate_columns:
        raise SchemaMismatchError(
            "wide CSV needs paired x1,y1,...,xk,yk columns", {"columns": list(frame.columns)}
        )
    k = len(coordinate_columns) // 2
    expected = [f"{axis}{i + 1}" for i in range(k) for axis in ("x", "y")]
    if coordinate_columns != expected:
        raise SchemaMismatchError("wide CSV columns must be x1,y1,...,xk,yk", {"columns": coordinate_columns})
    values = np.column_stack([_numeric(frame, c).to_numpy() for c in coordinate_columns])
    records = []
    for row_index, (specimen, row) in enumerate(zip(frame["id"], values)):
        record = {"id": str(specimen), "coords": row.reshape(k, 2)}
        if "group" in frame.columns:
            record["group"] = str(frame["group"].iloc[row_index])
        records.append(record)
    return _build_sample(records, labels=default_labels(k))


def write_dataset(dataset: Dataset) -> str:
    """Canonical JSON; floats use the shortest representation that reads back bitwise."""
    sample = dataset.sample
    document = {
        "schema": dataset.schema_version,
        "landmarks": sample.labels,
        "configurations": [
            {
                "id": config.name,
                "group": sample.group_of(config.name),
                "unit": config.unit.value,
                "coords": [[lm.position.x, lm.position.y] for lm in config.landmarks],
            }
            for config in sample.configurations
        ],
        "metadata": sample.metadata,
        "provenance": dataset.provenance.model_dump(),
    }
    return json.dumps(document, indent=1, allow_nan=False) + "\n"


def _reject_constant(token: str):
    raise SchemaMismatchError(f"non-finite number {token} in dataset")


def read_dataset(text: str) -> Dataset:
    try:
        document = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    try:
        jsonschema.validate(document, DATASET_JSON_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(part) for part in exc.absolute_path)
        raise SchemaMismatchError(f"dataset does not match schema: {exc.message}", {"at": where or "/"}) from None
    if document["schema"] != DATASET_SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"dataset schema {document['schema']} is not the current version {DATASET_SCHEMA_VERSION}"
        )
    labels = document["landmarks"]
    for record in document["configurations"]:
        if len(record["coords"]) != len(labels):
            raise HomologyError(
                f"configuration {record['id']!r} has {len(record['coords'])} landmarks, header names {len(labels)}"
            )
    try:
        sample = _build_sample(document["configurations"], labels=labels, metadata=document.get("metadata"))
        provenance = Provenance(**document.get("provenance", {}))
    except ValidationError as exc:
        raise SchemaMismatchError(f"dataset violates landmark invariants: {exc.errors()[0]['msg']}") from None
    return Dataset(sample=sample, provenance=provenance)


def ingest_file(path: Path, group: Optional[str] = None) -> Dataset:
    """Read TPS, CSV or canonical JSON by extension."""
    path = Path(path)
    text = path.read_text()
    suffix = path.suffix.lower()
    if suffix == ".tps":
        sample = parse_tps_file(text, group=group)
    elif suffix == ".csv":
        sample = parse_csv(text)
        if group:
            sample = sample.model_copy(update={"groups": {c.name: group for c in sample.configurations}})
    elif suffix == ".json":
        return read_dataset(text)
    else:
        raise SchemaMismatchError(f"unrecognised input format {suffix!r}", {"path": str(path)})
    stamp = datetime.fromtimestamp(path.stat().st_mtime, tz=timezone.utc).isoformat()
    return Dataset(sample=sample, provenance=Provenance(sources=[str(path)], ingested_at=stamp))


def merge_datasets(datasets: Sequence[Dataset]) -> Dataset:
    """Concatenate samples; provenance keeps every source and the newest timestamp."""
    if not datasets:
        raise SchemaMismatchError("nothing to merge")
    if len(datasets) == 1:
        return datasets[0]
    configurations = [c for d in datasets for c in d.sample.configurations]
    groups = {c.name: d.sample.group_of(c.name) for d in datasets for c in d.sample.configurations}
    metadata: Dict[str, Any] = {}
    for dataset in datasets:
        metadata.update(dataset.sample.metadata)
    stamps = [d.provenance.ingested_at for d in datasets if d.provenance.ingested_at]
    provenance = Provenance(
        sources=[s for d in datasets for s in d.provenance.sources],
        ingested_at=max(stamps) if stamps else None,
    )
    sample = Sample(configurations=configurations, groups=groups, metadata=metadata)
    return Dataset(sample=sample, provenance=provenance)


def load_dataset(path: Path) -> Dataset:
    return read_dataset(Path(path).read_text())


def save_dataset(dataset: Dataset, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_dataset(dataset))
    logger.info(f"Wrote dataset with {len(dataset.sample.configurations)} configurations to {path}")
    return path
