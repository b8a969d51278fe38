"""Graph JSON files and deterministic CSV/JSON emission.

Graph document layout::

    {
      "vertices": [{"id": "a", "condition": {"type": "dirichlet"}},
                   {"id": "b", "condition": {"type": "delta", "strength": -1.0}},
                   {"id": "c", "condition": {"type": "robin", "values": [0.8]}},
                   {"id": "d", "condition": {"type": "custom",
                                             "P": [[...]], "L": [[...]]}}],
      "edges": [{"id": "e1", "from": "a", "to": "b", "length": 1.0}],
      "pair_interactions": {"alpha": 2.0},        # optional
      "domain": {"shape": "pencil", "d": 1.0, "L": 12.0}   # optional
    }

Vertex ids may be any JSON scalars; dense integer ids are assigned in order
of appearance in the "vertices" array, which fixes the boundary-value matrix
ordering.  Custom condition matrices accept numbers or [re, im] pairs.
Validation failures carry a JSON-pointer-style path.
"""

from __future__ import annotations

import json

import numpy as np

from . import __version__
from .errors import ValidationError
from .graphs import Custom, Delta, Dirichlet, Kirchhoff, MetricGraph, Robin, assemble_conditions


def _fail(path, msg):
    raise ValidationError(f"{path}: {msg}")


def _complex_entry(x, path):
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    _fail(path, "matrix entries must be numbers or [re, im] pairs")


def _matrix(doc, path):
    if not isinstance(doc, list) or not doc:
        _fail(path, "expected a nonempty matrix (list of rows)")
    rows = []
    for r, row in enumerate(doc):
        if not isinstance(row, list) or len(row) != len(doc):
            _fail(f"{path}/{r}", "matrix must be square")
        rows.append([_complex_entry(x, f"{path}/{r}/{c}") for c, x in enumerate(row)])
    return np.array(rows, dtype=complex)


def _condition(doc, path):
    if not isinstance(doc, dict) or "type" not in doc:
        _fail(path, "condition must be an object with a 'type'")
    t = doc["type"]
    if t == "dirichlet":
        return Dirichlet()
    if t == "kirchhoff":
        return Kirchhoff()
    if t == "delta":
        if "strength" not in doc:
            _fail(f"{path}/strength", "delta condition needs a strength")
        return Delta(float(doc["strength"]))
    if t == "robin":
        vals = doc.get("values")
        if vals is None or (not isinstance(vals, list)) or not vals:
            _fail(f"{path}/values", "robin condition needs a list of values")
        return Robin(tuple(float(v) for v in vals))
    if t == "custom":
        if "P" not in doc or "L" not in doc:
            _fail(path, "custom condition needs P and L")
        return Custom(_matrix(doc["P"], f"{path}/P"), _matrix(doc["L"], f"{path}/L"))
    _fail(f"{path}/type", f"unknown condition type {t!r}")


def parse_graph_document(doc):
    """(MetricGraph, BoundaryConditions, extras dict) from a parsed document."""
    if not isinstance(doc, dict):
        _fail("", "top-level document must be an object")
    vertices = doc.get("vertices")
    edges = doc.get("edges")
    if not isinstance(vertices, list) or not vertices:
        _fail("/vertices", "need a nonempty vertex list")
    if not isinstance(edges, list) or not edges:
        _fail("/edges", "need a nonempty edge list")

    ids = {}
    specs = {}
    for i, v in enumerate(vertices):
        if not isinstance(v, dict) or "id" not in v:
            _fail(f"/vertices/{i}", "vertex needs an 'id'")
        key = v["id"]
        if key in ids:
            _fail(f"/vertices/{i}/id", f"duplicate vertex id {key!r}")
        ids[key] = i
        specs[i] = _condition(v.get("condition", {"type": "kirchhoff"}),
                              f"/vertices/{i}/condition")

    edge_list, lengths = [], []
    for i, e in enumerate(edges):
        if not isinstance(e, dict):
            _fail(f"/edges/{i}", "edge must be an object")
        for fieldname in ("from", "to", "length"):
            if fieldname not in e:
                _fail(f"/edges/{i}/{fieldname}", "missing")
        for endname in ("from", "to"):
            if e[endname] not in ids:
                _fail(f"/edges/{i}/{endname}", f"unknown vertex id {e[endname]!r}")
        length = e["length"]
        if not isinstance(length, (int, float)) or not length > 0:
            _fail(f"/edges/{i}/length", "length must be a positive number")
        edge_list.append((ids[e["from"]], ids[e["to"]]))
        lengths.append(float(length))

    try:
        graph = MetricGraph(edge_list, lengths)
        bc = assemble_conditions(graph, specs)
    except ValidationError as exc:
        _fail("", str(exc))
    extras = {
        "pair_interactions": doc.get("pair_interactions"),
        "domain": doc.get("domain"),
    }
    return graph, bc, extras


def load_graph(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return parse_graph_document(doc)


def pair_alpha(extras, default=None):
    block = extras.get("pair_interactions")
    if block is None:
        if default is None:
            raise ValidationError("/pair_interactions: missing")
        return default
    if not isinstance(block, dict) or "alpha" not in block:
        raise ValidationError("/pair_interactions/alpha: missing")
    return float(block["alpha"])


# ---------------------------------------------------------------------------
# deterministic emission


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows, params):
    """CSV with a header row and a trailing metadata comment: tool version
    plus the full parameter echo.  Byte-identical for identical inputs."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    echo = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))
    lines.append(f"# graphgas version={__version__} {echo}")
    text = "\n".join(lines) + "\n"
    if path is None:
        return text
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_fmt) + "\n"
    if path is None:
        return text
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def write_matrix_coo(path, A):
    """Sparse matrix in 'row col value' coordinate text form (debug export)."""
    B = A.tocoo()
    order = np.lexsort((B.col, B.row))
    lines = [f"{B.row[i]} {B.col[i]} {repr(float(B.data[i]))}" for i in order]
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
