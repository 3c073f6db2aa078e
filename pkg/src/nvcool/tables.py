"""Comma-separated result tables with ``#`` header and footer lines."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from nvcool import __version__


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.17g}"
    return str(value)


@dataclass
class Table:
    columns: list[str]
    rows: list[Sequence[Any]] = field(default_factory=list)
    header: dict[str, Any] = field(default_factory=dict)
    footer: dict[str, Any] = field(default_factory=dict)
    comments: list[str] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def render(self) -> str:
        lines = [f"# nvcool {__version__}"]
        for key, value in self.header.items():
            lines.append(f"# {key}: {json.dumps(value, sort_keys=True) if not isinstance(value, str) else value}")
        for note in self.comments:
            lines.append(f"# warning: {note}")
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(fmt(v) for v in row))
        for key, value in self.footer.items():
            lines.append(f"# {key}: {fmt(value) if not isinstance(value, str) else value}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render())
        return path


def _parse(token: str):
    try:
        return float(token)
    except ValueError:
        return token


def read_table(path) -> Table:
    """Parse a file written by :meth:`Table.write` (values come back as floats)."""
    header, footer, comments, rows = {}, {}, [], []
    columns = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            body = line[2:]
            if body.startswith("warning: "):
                comments.append(body[len("warning: "):])
                continue
            key, _, value = body.partition(": ")
            if not _:
                continue
            target = header if columns is None else footer
            try:
                target[key] = json.loads(value)
            except json.JSONDecodeError:
                target[key] = value
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append([_parse(tok) for tok in line.split(",")])
    return Table(columns or [], rows, header, footer, comments)
