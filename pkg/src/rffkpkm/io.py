"""Dataset ingestion and run persistence.

Feature matrices are CSV files (optionally gzip-compressed).  A manifest is a
JSON document describing the views of a multi-view dataset::

    {
      "name": "toy",
      "views": [{"path": "v1.csv", "bandwidth": 1000.0},
                {"path": "v2.csv.gz", "has_header": true}],
      "labels": {"path": "labels.csv", "column": 0}
    }

Relative paths are resolved against the manifest's directory.  Run records
are JSON with a ``schema_version`` field; every run also gets a TSV
assignment table and a TSV convergence trace.
"""

import csv
import gzip
import json
import os
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from filelock import FileLock

from .exceptions import ParseError, ValidationError

SCHEMA_VERSION = 1

_NUMBER = re.compile(r"^\s*[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\s*$")


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", newline="", encoding="utf-8")
    return open(path, "r", newline="", encoding="utf-8")


def _dense_labels(raw):
    try:
        values = np.array([float(v) for v in raw])
    except ValueError:
        values = np.array(raw, dtype=object).astype(str)
    _, inverse = np.unique(values, return_inverse=True)
    return inverse.astype(np.int64)


def load_csv(path, has_header=False, label_column=None, delimiter=",", require_features=True):
    """Read a numeric CSV into a float matrix.

    Parameters
    ----------
    path : str or Path
        ``.gz`` files are decompressed on the fly.
    has_header : bool
        Skip (and use for column names) the first row.
    label_column : int, str or None
        Column holding class labels, by index or by header name.  It is
        removed from the features and relabelled to 0..c-1.
    delimiter : str
    require_features : bool
        If False, a file holding only the label column is accepted and X has
        zero columns.

    Returns
    -------
    X : ndarray of shape (n_samples, n_features)
    labels : ndarray of shape (n_samples,) or None
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with _open_text(path) as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh, delimiter=delimiter), start=1)
                if r and any(c.strip() for c in r)]
    header = None
    if has_header:
        if not rows:
            raise ParseError("missing header row", 1, path)
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise ParseError("no data rows", None, path)

    width = len(rows[0][1])
    if header is not None and len(header) != width:
        raise ParseError(f"header has {len(header)} fields but data has {width}",
                         rows[0][0], path)
    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str):
            if header is None or label_column not in header:
                raise ParseError(f"label column {label_column!r} not found", 1, path)
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column)
            if not -width <= label_idx < width:
                raise ParseError(f"label column {label_column} out of range for {width} fields",
                                 rows[0][0], path)
            label_idx %= width

    feats, raw_labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", lineno, path)
        vals = []
        for c, cell in enumerate(row):
            if c == label_idx:
                raw_labels.append(cell.strip())
                continue
            if not _NUMBER.match(cell):
                raise ParseError(f"non-numeric value {cell!r} in column {c}", lineno, path)
            vals.append(float(cell))
        feats.append(vals)
    X = np.array(feats, dtype=np.float64).reshape(len(feats), -1)
    if require_features and X.shape[1] == 0:
        raise ParseError("no feature columns", None, path)
    labels = _dense_labels(raw_labels) if label_idx is not None else None
    return X, labels


@dataclass
class ViewEntry:
    path: str
    format: str = "csv"
    bandwidth: Optional[float] = None
    has_header: bool = False


@dataclass
class DatasetManifest:
    name: str
    views: list
    labels: Optional[dict] = None

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "name": self.name,
                "views": [asdict(v) for v in self.views], "labels": self.labels}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ValidationError("manifest must be a JSON object")
        views = data.get("views") or []
        if not views:
            raise ValidationError("manifest lists no views")
        entries = []
        for v in views:
            if isinstance(v, str):
                v = {"path": v}
            if "path" not in v:
                raise ValidationError("every view needs a path")
            if v.get("format", "csv") != "csv":
                raise ValidationError(f"unsupported view format {v['format']!r}")
            entries.append(ViewEntry(**{k: v[k] for k in ("path", "format", "bandwidth", "has_header")
                                        if k in v}))
        return cls(name=data.get("name", ""), views=entries, labels=data.get("labels"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


@dataclass
class MultiViewDataset:
    name: str
    views: list
    labels: Optional[np.ndarray]
    bandwidths: list

    @property
    def n_samples(self):
        return self.views[0].shape[0]


def load_manifest(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from exc
    manifest = DatasetManifest.from_dict(data)
    base = path.parent
    views = []
    for entry in manifest.views:
        X, _ = load_csv(base / entry.path, has_header=entry.has_header)
        views.append(X)
    n0 = views[0].shape[0]
    for entry, X in zip(manifest.views[1:], views[1:]):
        if X.shape[0] != n0:
            raise ValidationError(
                f"view {manifest.views[0].path!r} has {n0} rows but view "
                f"{entry.path!r} has {X.shape[0]}")
    labels = None
    if manifest.labels:
        spec = manifest.labels
        if isinstance(spec, str):
            spec = {"path": spec}
        _, labels = load_csv(base / spec["path"], has_header=spec.get("has_header", False),
                             label_column=spec.get("column", 0), require_features=False)
        if labels.shape[0] != n0:
            raise ValidationError(f"labels have {labels.shape[0]} rows but views have {n0}")
    return MultiViewDataset(name=manifest.name, views=views, labels=labels,
                            bandwidths=[v.bandwidth for v in manifest.views])


@dataclass
class RunRecord:
    """One solver run.

    ``timing`` holds wall-clock seconds per phase and the start timestamp;
    it is the only field that differs between identical invocations.
    """

    solver: str
    seed: int
    config: dict
    trace: list
    metrics: dict
    assignments: list
    timing: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def deterministic_dict(self):
        d = self.to_dict()
        d.pop("timing")
        return d


def trace_rows(trace):
    """Convert TraceEntry tuples into JSON-friendly dicts."""
    return [{"iteration": int(e.iteration), "s": float(e.s), "objective": float(e.objective),
             "alpha": [float(a) for a in e.alpha]} for e in trace]


def run_stem(record):
    return f"{record.solver}_seed{record.seed}"


def write_run(record, out_dir, stem=None):
    """Write the JSON record, the assignment table and the trace TSV.

    Returns a dict mapping ``record``, ``assignments`` and ``trace`` to the
    written paths.  Writers in the same directory are serialized with a lock
    file.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir} is not writable")
    stem = stem or run_stem(record)
    paths = {"record": out_dir / f"{stem}.json",
             "assignments": out_dir / f"{stem}_assignments.tsv",
             "trace": out_dir / f"{stem}_trace.tsv"}
    L = max((len(r["alpha"]) for r in record.trace), default=0)
    with FileLock(str(out_dir / ".rffkpkm.lock")):
        paths["record"].write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True))
        with open(paths["assignments"], "w", encoding="utf-8") as fh:
            fh.write("row\tcluster\n")
            for i, c in enumerate(record.assignments):
                fh.write(f"{i}\t{int(c)}\n")
        with open(paths["trace"], "w", encoding="utf-8") as fh:
            fh.write("\t".join(["iter", "s", "objective"]
                               + [f"alpha_{l + 1}" for l in range(L)]) + "\n")
            for r in record.trace:
                fh.write("\t".join([str(r["iteration"]), repr(r["s"]), repr(r["objective"])]
                                   + [repr(a) for a in r["alpha"]]) + "\n")
    return paths


def read_run(path):
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(f"unsupported run record schema {data.get('schema_version')!r}")
    return RunRecord.from_dict(data)


def read_trace(path):
    """Parse a trace TSV back into a list of dicts."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            rec = dict(zip(header, parts))
            rows.append({"iteration": int(rec["iter"]), "s": float(rec["s"]),
                         "objective": float(rec["objective"]),
                         "alpha": [float(rec[h]) for h in header[3:]]})
    return rows
