"""Round-trip-safe plain-text formatting for scalars and matrix blocks.

Shared by the model format, detector snapshots and solver dumps so every
artifact uses one numeric convention: up to 17 significant digits, which is
lossless for binary64.
"""

from __future__ import annotations

import numpy as np


def fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def fmt_matrix(M) -> str:
    """Bracketed block: rows separated by ';', entries by ', '."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "[" + "; ".join(", ".join(fmt_float(v) for v in row) for row in M) + "]"


def fmt_vector(v) -> str:
    v = np.asarray(v, dtype=float).ravel()
    return "[" + ", ".join(fmt_float(x) for x in v) + "]"


def parse_matrix_literal(text: str) -> np.ndarray:
    """Parse a bracketed numeric block (numbers only, no expressions)."""
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        raise ValueError(f"not a bracketed block: {text!r}")
    body = s[1:-1].strip()
    if not body:
        return np.zeros((0, 0))
    rows = []
    for row_text in body.split(";"):
        entries = [e for e in row_text.replace(",", " ").split() if e]
        rows.append([float(e) for e in entries])
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged matrix literal")
    return np.array(rows, dtype=float)
