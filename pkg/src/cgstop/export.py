"""CSV/JSON output helpers shared by the CLI and the experiment harness."""

import csv
import datetime as _dt
import json
import math

import numpy as np


def fmt(value):
    """Lossless text for floats (17 significant digits); other values via ``str``."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def timestamp_line(deterministic):
    if deterministic:
        return None
    now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return f"# generated {now}"


def write_csv(path, columns, rows, header_line=None):
    with open(path, "w", newline="") as fh:
        if header_line:
            fh.write(header_line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    """Read a CSV written by :func:`write_csv` (comment header skipped) as dict rows."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def write_json(path, record, deterministic=True):
    record = dict(record)
    stamp = timestamp_line(deterministic)
    if stamp:
        record["generated"] = stamp[len("# generated "):]
    with open(path, "w") as fh:
        json.dump(_jsonable(record), fh, indent=2, sort_keys=True)
        fh.write("\n")
