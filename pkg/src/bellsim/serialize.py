"""CSV/JSON emission and the matrix interchange format.

Numbers are written with 12 significant digits. Matrices are nested lists of
``[re, im]`` pairs next to an explicit ``num_qubits`` field.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Mapping, Sequence, TextIO

import numpy as np

from .densmat import DensityMatrix, StateLike, ValidationError, as_matrix

SIG_DIGITS = 12


def fmt(x: Any) -> str:
    """Text form used in CSV cells."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        # normalize -0 so repeated runs cannot differ by the sign of zero
        return f"{x + 0.0:.{SIG_DIGITS}g}"
    return str(x)


def rounded(obj: Any) -> Any:
    """Recursively round floats to 12 significant digits for JSON."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x + 0.0:.{SIG_DIGITS}g}")
    if isinstance(obj, Mapping):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    return obj


def matrix_to_json(rho: StateLike) -> dict:
    m = as_matrix(rho)
    n = m.shape[0].bit_length() - 1
    return {
        "num_qubits": n,
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def matrix_from_json(doc: Mapping) -> DensityMatrix:
    try:
        m = np.array([[complex(re, im) for re, im in row] for row in doc["matrix"]])
        n = int(doc["num_qubits"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix document: {exc!r}") from exc
    rho = DensityMatrix(m)
    if rho.num_qubits != n:
        raise ValidationError(f"num_qubits={n} does not match a {m.shape[0]}x{m.shape[0]} matrix")
    return rho


def render_csv(
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comments: Mapping[str, Any] = (),
) -> str:
    """CSV text: ``# key: value`` comment lines, the header row, then data."""
    buf = io.StringIO()
    for key, value in dict(comments).items():
        buf.write(f"# {key}: {fmt(value) if not isinstance(value, str) else value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def render_json(doc: Mapping) -> str:
    return json.dumps(rounded(doc), indent=2) + "\n"


def emit(text: str, path: str | None, stdout: TextIO) -> None:
    """Write to ``path`` or, when it is ``None`` or ``-``, to ``stdout``."""
    if path in (None, "-"):
        stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ValidationError(f"cannot write output {path!r}: {exc.strerror}") from exc
