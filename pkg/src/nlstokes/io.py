"""Deterministic CSV output.

Floats are written in scientific notation with 12 significant digits
(``%.11e``), non-finite values as ``nan``/``inf``/``-inf``, ``None`` as an
empty field.  Lines end with ``\\n`` and files are UTF-8, independent of
the platform and locale.
"""

import csv
import io
import math
import numbers
import os

FLOAT_FORMAT = "%.11e"


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FLOAT_FORMAT % (v + 0.0)  # folds -0.0 into 0.0
    raise TypeError(f"cannot serialize {type(value).__name__} to CSV")


def has_nan(rows):
    return any(isinstance(v, numbers.Real) and not isinstance(v, numbers.Integral)
               and math.isnan(float(v)) for row in rows for v in row)


def csv_text(rows, columns):
    """CSV document as a string; rows must match ``columns`` in length."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for i, row in enumerate(rows):
        row = tuple(row)
        if len(row) != len(columns):
            raise ValueError(f"row {i} has {len(row)} fields, schema has {len(columns)}")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(rows, columns, path):
    """Write ``rows`` under the header ``columns``.

    Returns
    -------
    bool
        True when any value is NaN, so callers can flag it in the exit
        status.
    """
    rows = [tuple(r) for r in rows]
    text = csv_text(rows, columns)
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return has_nan(rows)
