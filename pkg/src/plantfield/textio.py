"""Deterministic text output helpers.

All CSV and JSON emitted by this package goes through these functions so
that identical inputs produce byte-identical files: floats are written
with ``repr`` (shortest round-trip form), rows keep a fixed column
order, and line endings are always ``\\n``.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Sequence

__all__ = ["format_value", "sha256_hex", "write_csv"]


def format_value(v) -> str:
    """Render one CSV cell: shortest round-trip form for floats."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    # numpy scalars land here; convert through item() when available
    item = getattr(v, "item", None)
    if item is not None:
        return format_value(item())
    return str(v)


def write_csv(
    path,
    header: Sequence[str],
    rows: Iterable[Sequence],
    comments: Sequence[str] = (),
) -> None:
    """Write a CSV file with optional leading ``#`` comment lines."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def sha256_hex(data: bytes) -> str:
    """Hex digest of ``data``."""
    return hashlib.sha256(data).hexdigest()
