"""Edge-list and node-attribute CSV files.

Edge lists have a ``source,target`` header and one undirected edge per row.
Attribute files have a ``node,<col>,...`` header; each column is numeric or
categorical as declared by a schema mapping (undeclared columns are
numeric if every value parses as a float, categorical otherwise).
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..graph import Graph, NodeData


class DataError(ValueError):
    """Malformed input data; carries the file path and line number when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = "" if path is None else f"{path}" + ("" if line is None else f":{line}")
        super().__init__(f"{where}: {message}" if where else message)
        self.path = None if path is None else str(path)
        self.line = line


def _rows(path: Path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot open: {err.strerror}", path) from err
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].startswith("#"):
                continue
            yield lineno, [c.strip() for c in row]


def read_edge_list(path) -> tuple[list[str], list[tuple[str, str]]]:
    """(labels in first-seen order, edges as label pairs); duplicates collapse."""
    path = Path(path)
    it = _rows(path)
    try:
        lineno, header = next(it)
    except StopIteration:
        raise DataError("empty edge list", path) from None
    if [h.lower() for h in header] != ["source", "target"]:
        raise DataError(f"header must be 'source,target', got {','.join(header)!r}", path, lineno)
    labels: dict[str, int] = {}
    seen = set()
    edges = []
    for lineno, row in it:
        if len(row) != 2:
            raise DataError(f"expected 2 fields, found {len(row)}", path, lineno)
        a, b = row
        if not a or not b:
            raise DataError("empty node label", path, lineno)
        if a == b:
            raise DataError(f"self-loop on node {a!r}", path, lineno)
        for v in (a, b):
            labels.setdefault(v, len(labels))
        key = (a, b) if labels[a] < labels[b] else (b, a)
        if key not in seen:
            seen.add(key)
            edges.append(key)
    return list(labels), edges


def read_attributes(path, schema: dict | None = None):
    """(node labels, {column: raw string values}) with types resolved by ``schema``."""
    path = Path(path)
    it = _rows(path)
    try:
        lineno, header = next(it)
    except StopIteration:
        raise DataError("empty attribute file", path) from None
    if not header or header[0].lower() != "node":
        raise DataError("first header field must be 'node'", path, lineno)
    cols = header[1:]
    if len(set(cols)) != len(cols):
        raise DataError("duplicate column names", path, lineno)
    schema = dict(schema or {})
    unknown = set(schema) - set(cols)
    if unknown:
        raise DataError(f"schema names columns not in the file: {sorted(unknown)}", path)
    nodes, values, lines = [], {c: [] for c in cols}, []
    for lineno, row in it:
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, found {len(row)}", path, lineno)
        if row[0] in nodes:
            raise DataError(f"node {row[0]!r} listed twice", path, lineno)
        for c, v in zip(cols, row[1:]):
            if v == "" or v.upper() == "NA":
                raise DataError(f"missing value in column {c!r} (attribute imputation is "
                                f"not supported)", path, lineno)
            values[c].append(v)
        nodes.append(row[0])
        lines.append(lineno)
    numeric, categorical = {}, {}
    for c in cols:
        kind = schema.get(c)
        if kind is None:
            kind = "numeric" if all(_is_float(v) for v in values[c]) else "categorical"
        if kind == "numeric":
            out = []
            for v, ln in zip(values[c], lines):
                if not _is_float(v):
                    raise DataError(f"column {c!r} is numeric but has value {v!r}", path, ln)
                out.append(float(v))
            numeric[c] = out
        elif kind == "categorical":
            categorical[c] = list(values[c])
        else:
            raise DataError(f"column {c!r}: type must be 'numeric' or 'categorical'", path)
    return nodes, numeric, categorical


def _is_float(v: str) -> bool:
    try:
        return np.isfinite(float(v))
    except ValueError:
        return False


def load_network(edge_path, attr_path=None, schema: dict | None = None,
                 label_map_path=None) -> tuple[Graph, NodeData, list[str]]:
    """Read an edge list (and attributes) into a Graph with 0-based vertices.

    Vertices are numbered in order of first appearance in the edge list;
    attribute-only nodes (isolates) follow in attribute-file order. The
    labels are returned and, with ``label_map_path``, written as JSON.
    """
    labels, edges = read_edge_list(edge_path)
    index = {v: k for k, v in enumerate(labels)}
    numeric, categorical = {}, {}
    if attr_path is not None:
        nodes, num, cat = read_attributes(attr_path, schema)
        missing = [v for v in labels if v not in set(nodes)]
        if missing:
            raise DataError(f"attribute file has no row for node(s) {missing}", attr_path)
        for v in nodes:
            if v not in index:
                index[v] = len(labels)
                labels.append(v)
        order = [nodes.index(v) for v in labels]
        numeric = {c: np.asarray(vals)[order] for c, vals in num.items()}
        categorical = {c: np.asarray(vals, dtype=object)[order] for c, vals in cat.items()}
    n = len(labels)
    g = Graph.from_edges(n, [(index[a], index[b]) for a, b in edges])
    data = NodeData(n, numeric, categorical)
    if label_map_path is not None:
        Path(label_map_path).write_text(json.dumps({"labels": labels}, indent=1) + "\n")
    return g, data, labels


def save_network(g: Graph, edge_path, data: NodeData | None = None, attr_path=None,
                 labels=None) -> None:
    """Write ``g`` (and ``data``) in the formats read by :func:`load_network`."""
    labels = [str(k) for k in range(g.n)] if labels is None else [str(v) for v in labels]
    if len(labels) != g.n:
        raise ValueError("one label per vertex required")
    with open(edge_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "target"])
        for i, j in g.edges():
            w.writerow([labels[i], labels[j]])
    if data is not None and attr_path is not None:
        cols = list(data.numeric) + list(data.categorical)
        with open(attr_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", *cols])
            for k in range(g.n):
                row = [labels[k]]
                row += [repr(float(data.numeric[c][k])) for c in data.numeric]
                row += [str(data.categorical[c][k]) for c in data.categorical]
                w.writerow(row)


def schema_of(data: NodeData) -> dict:
    """Schema mapping that reproduces ``data``'s column types on reload."""
    out = {c: "numeric" for c in data.numeric}
    out.update({c: "categorical" for c in data.categorical})
    return out
