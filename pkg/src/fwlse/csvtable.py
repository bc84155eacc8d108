"""Strict CSV ingestion: header row, no missing cells, typed on access.

Cells are kept as text until a column is requested. ``numeric`` rejects
anything that is not a finite decimal number; ``labels`` accepts any text
and is meant for cluster and stratum identifiers.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import DuplicateHeader, MissingValue, ParseError


@dataclass(frozen=True)
class CsvTable:
    header: Tuple[str, ...]
    columns: Dict[str, Tuple[str, ...]]

    @property
    def n(self):
        return len(self.columns[self.header[0]]) if self.header else 0

    def require(self, name):
        if name not in self.columns:
            raise ParseError(f"no such column; available: {', '.join(self.header)}",
                             column=name)
        return self.columns[name]

    def numeric(self, name):
        """Column ``name`` as a float array; data rows are numbered from 1."""
        cells = self.require(name)
        out = np.empty(len(cells))
        for i, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric value {cell!r}", row=i + 1, column=name
                ) from None
            if not math.isfinite(value):
                raise ParseError(f"non-finite value {cell!r}", row=i + 1, column=name)
            out[i] = value
        return out

    def labels(self, name):
        return self.require(name)


def parse_csv(data) -> CsvTable:
    """Parse UTF-8 comma-separated bytes (or text) with a header row."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8: {exc}") from None
    else:
        text = data
    rows = list(csv.reader(io.StringIO(text)))
    while rows and not any(cell.strip() for cell in rows[-1]):
        rows.pop()
    if not rows:
        raise ParseError("empty input; expected a header row")
    header = tuple(cell.strip() for cell in rows[0])
    seen = set()
    for j, name in enumerate(header):
        if not name:
            raise ParseError(f"empty column name at position {j + 1}", row=0)
        if name in seen:
            raise DuplicateHeader("duplicate column name", row=0, column=name)
        seen.add(name)

    body = rows[1:]
    if not body:
        raise ParseError("no data rows")
    cols = [[] for _ in header]
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", row=i
            )
        for j, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                raise MissingValue("missing value", row=i, column=header[j])
            cols[j].append(cell)
    return CsvTable(header, {h: tuple(c) for h, c in zip(header, cols)})
