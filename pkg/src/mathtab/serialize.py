"""Render tables into the three benchmark text formats and parse them back.

Formats are contract surfaces: rendering is deterministic down to the byte,
and parse_back is a structural inverse up to provenance loss. Duplicate
headers (the direct-contradiction trap) are expressible in the serialized
and Markdown formats but illegal in JSON, which rejects them.
"""

from __future__ import annotations

import json
from enum import Enum
from fractions import Fraction
from typing import Optional

from .augment import AugmentedTable
from .transform import Cell, Column, ColumnKind, Provenance


class TableFormat(Enum):
    SERIALIZED = "serialized"
    MARKDOWN = "markdown"
    JSON = "json"


FORMAT_ALIASES = {
    "se": TableFormat.SERIALIZED,
    "serialized": TableFormat.SERIALIZED,
    "md": TableFormat.MARKDOWN,
    "markdown": TableFormat.MARKDOWN,
    "json": TableFormat.JSON,
}


class FormatError(Exception):
    def __init__(self, line: Optional[int], reason: str):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + reason)


def _decimal_digits(value: Fraction) -> Optional[int]:
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    return max(twos, fives) if den == 1 else None


def format_value(value) -> str:
    """Canonical text for a cell: integer, shortest exact decimal, or p/q."""
    if value is None:
        return "null"
    if isinstance(value, str):
        return value
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    digits = _decimal_digits(value)
    if digits is None:
        return f"{value.numerator}/{value.denominator}"
    scaled = value.numerator * 10 ** digits // value.denominator
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled)).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def parse_value(text: str):
    """Inverse of format_value; non-numeric text stays text."""
    if text == "null":
        return None
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        return text


def _cell_texts(table: AugmentedTable) -> list[list[str]]:
    return [
        [format_value(row[c.key].value) for c in table.columns]
        for row in table.rows
    ]


def render(table: AugmentedTable, fmt: TableFormat) -> str:
    """Render a table; see the per-format grammar in parse_back."""
    headers = [c.display for c in table.columns]
    grid = _cell_texts(table)
    if fmt is TableFormat.SERIALIZED:
        lines = [
            ", ".join(f"{h}: {v}" for h, v in zip(headers, row)) for row in grid
        ]
        return "\n".join(lines)
    if fmt is TableFormat.MARKDOWN:
        lines = ["| " + " | ".join(headers) + " |"]
        lines.append("| " + " | ".join("---" for _ in headers) + " |")
        for row in grid:
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines)
    # JSON: array of per-row objects, keys in column order
    if len(set(headers)) != len(headers):
        dupe = next(h for h in headers if headers.count(h) > 1)
        raise FormatError(None, f"duplicate column header '{dupe}' cannot be JSON")
    rows_out = []
    for row in table.rows:
        pairs = []
        for column in table.columns:
            value = row[column.key].value
            if value is None:
                rendered = "null"
            elif isinstance(value, str):
                rendered = json.dumps(value, ensure_ascii=False)
            else:
                rendered = format_value(value)
                if "/" in rendered:
                    rendered = json.dumps(rendered)  # non-terminating: string form
            pairs.append(f"{json.dumps(column.display, ensure_ascii=False)}: {rendered}")
        rows_out.append("  {" + ", ".join(pairs) + "}")
    if not rows_out:
        return "[]"
    return "[\n" + ",\n".join(rows_out) + "\n]"


def _columns_from_headers(headers: list[str]) -> list[Column]:
    columns = []
    seen: dict[str, int] = {}
    for header in headers:
        count = seen.get(header, 0)
        key = header if count == 0 else f"{header}__{count + 1}"
        seen[header] = count + 1
        kind = ColumnKind.NAME if header.lower() == "name" and count == 0 \
            else ColumnKind.GIVEN
        columns.append(Column(key, header, kind))
    return columns


def _make_table(headers: list[str], value_grid: list[list]) -> AugmentedTable:
    columns = _columns_from_headers(headers)
    rows = []
    for raw_row in value_grid:
        row = {}
        for column, value in zip(columns, raw_row):
            provenance = Provenance.NULL if value is None else Provenance.GIVEN
            row[column.key] = Cell(value, provenance)
        rows.append(row)
    return AugmentedTable(
        columns=columns, rows=rows, seed_row_index=None, value_ranges={}
    )


def parse_back(text: str, fmt: TableFormat) -> AugmentedTable:
    """Parse rendered text back into a table (provenance and trap metadata lost)."""
    if fmt is TableFormat.SERIALIZED:
        return _parse_serialized(text)
    if fmt is TableFormat.MARKDOWN:
        return _parse_markdown(text)
    return _parse_json(text)


def _parse_serialized(text: str) -> AugmentedTable:
    headers: Optional[list[str]] = None
    grid = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        pairs = line.split(", ")
        row_headers = []
        row_values = []
        for pair in pairs:
            if ": " not in pair:
                raise FormatError(number, f"expected 'key: value', got {pair!r}")
            key, value = pair.split(": ", 1)
            row_headers.append(key)
            row_values.append(parse_value(value))
        if headers is None:
            headers = row_headers
        elif row_headers != headers:
            raise FormatError(number, "rows disagree on keys or key order")
        grid.append(row_values)
    if headers is None:
        raise FormatError(None, "no rows")
    return _make_table(headers, grid)


def _parse_markdown(text: str) -> AugmentedTable:
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 2:
        raise FormatError(None, "markdown table needs header and separator rows")

    def split_row(line: str, number: int) -> list[str]:
        if not line.startswith("|") or not line.rstrip().endswith("|"):
            raise FormatError(number, "row must start and end with '|'")
        return [cell.strip() for cell in line.strip().strip("|").split("|")]

    headers = split_row(lines[0], 1)
    separator = split_row(lines[1], 2)
    if not all(set(cell) <= {"-"} and cell for cell in separator):
        raise FormatError(2, "separator row must be dashes")
    grid = []
    for number, line in enumerate(lines[2:], start=3):
        cells = split_row(line, number)
        if len(cells) != len(headers):
            raise FormatError(number, f"expected {len(headers)} cells, got {len(cells)}")
        grid.append([parse_value(cell) for cell in cells])
    return _make_table(headers, grid)


def _reject_duplicates(pairs):
    keys = [k for k, _ in pairs]
    if len(set(keys)) != len(keys):
        dupe = next(k for k in keys if keys.count(k) > 1)
        raise FormatError(
            None,
            f"duplicate key '{dupe}': duplicate-header tables are not expressible in JSON",
        )
    return dict(pairs)


def _parse_json(text: str) -> AugmentedTable:
    try:
        payload = json.loads(
            text,
            parse_float=Fraction, parse_int=Fraction,
            object_pairs_hook=_reject_duplicates,
        )
    except json.JSONDecodeError as err:
        raise FormatError(err.lineno, f"invalid JSON: {err.msg}") from None
    if not isinstance(payload, list):
        raise FormatError(None, "expected a JSON array of row objects")
    if not payload:
        raise FormatError(None, "no rows")
    headers = list(payload[0].keys())
    grid = []
    for index, row in enumerate(payload):
        if list(row.keys()) != headers:
            raise FormatError(None, f"row {index} disagrees on keys")
        values = []
        for value in row.values():
            if isinstance(value, str):
                values.append(parse_value(value))
            else:
                values.append(value)
        grid.append(values)
    return _make_table(headers, grid)


def values_grid(table: AugmentedTable) -> list[list]:
    """Displays plus cell values, for order-insensitive equality checks."""
    return [[c.display for c in table.columns]] + [
        [row[c.key].value for c in table.columns] for row in table.rows
    ]
