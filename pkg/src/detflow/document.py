"""JSON network documents.

Serialisation is canonical (sorted keys, no insignificant whitespace), so
``dumps(loads(text)) == text`` for any text produced by :func:`dumps`.

Linear document::

    {"model": "linear", "field": {"p": 2, "q": 1}, "nodes": [...],
     "source": "S", "destinations": ["D"],
     "edges": [{"from": "S", "to": "D", "matrix": [[1]]}]}

General document: ``field`` is replaced by ``alphabets`` (node -> size),
edges carry no matrix, and ``functions`` maps each receiving node to
``{"inputs": [...], "table": [...], "outputs": k}``. Tables are flat and
indexed mixed-radix with the first listed input most significant.
Optional keys: ``unbounded`` (list of ``[from, to]`` pairs), ``name``,
``comment``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DocumentError, NetworkError
from .field import MAX_PRIME, FieldMatrix, is_prime
from .network import (
    GeneralRelayNetwork,
    LinearRelayNetwork,
    RelayNetwork,
    canonical_function,
    validate,
)

COMMON_KEYS = {"model", "nodes", "source", "destinations", "edges", "unbounded", "name", "comment"}
LINEAR_KEYS = COMMON_KEYS | {"field"}
GENERAL_KEYS = COMMON_KEYS | {"alphabets", "functions"}


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _need(cond, message, field):
    if not cond:
        raise DocumentError(message, field=field)


def _string_list(doc, key, unique=True):
    val = doc.get(key)
    _need(isinstance(val, list) and all(isinstance(v, str) and v for v in val),
          f"{key} must be a list of non-empty strings", key)
    if unique:
        _need(len(set(val)) == len(val), f"{key} contains duplicates", key)
    return val


def _edge_pairs(doc, nodes):
    edges = doc.get("edges", [])
    _need(isinstance(edges, list), "edges must be a list", "edges")
    seen = set()
    out = []
    for k, e in enumerate(edges):
        where = f"edges[{k}]"
        _need(isinstance(e, dict), "edge must be an object", where)
        for end in ("from", "to"):
            _need(isinstance(e.get(end), str), f"edge needs a string '{end}'", f"{where}.{end}")
            _need(e[end] in nodes, f"unknown node {e[end]!r}", f"{where}.{end}")
        pair = (e["from"], e["to"])
        _need(pair not in seen, f"duplicate edge {pair}", where)
        seen.add(pair)
        out.append((pair, e, where))
    return out


def _unbounded(doc, pairs):
    raw = doc.get("unbounded", [])
    _need(isinstance(raw, list), "unbounded must be a list of [from, to] pairs", "unbounded")
    out = set()
    for k, e in enumerate(raw):
        _need(isinstance(e, list) and len(e) == 2 and all(isinstance(x, str) for x in e),
              "unbounded entries are [from, to] pairs", f"unbounded[{k}]")
        _need(tuple(e) in pairs, f"unbounded marker {tuple(e)} is not an edge", f"unbounded[{k}]")
        out.add(tuple(e))
    return frozenset(out)


def from_document(doc) -> RelayNetwork:
    """Build a network from a decoded document, raising on schema or semantic errors."""
    _need(isinstance(doc, dict), "document must be a JSON object", None)
    model = doc.get("model")
    _need(model in ("linear", "general"), "model must be 'linear' or 'general'", "model")
    allowed = LINEAR_KEYS if model == "linear" else GENERAL_KEYS
    extra = sorted(set(doc) - allowed)
    if extra:
        raise DocumentError(f"unexpected key {extra[0]!r} for a {model} document", field=extra[0])
    nodes = _string_list(doc, "nodes")
    _need(isinstance(doc.get("source"), str), "source must be a string", "source")
    dests = _string_list(doc, "destinations")
    for key in ("name", "comment"):
        _need(doc.get(key) is None or isinstance(doc[key], str), f"{key} must be a string", key)
    meta = dict(name=doc.get("name"), comment=doc.get("comment"))
    pairs = _edge_pairs(doc, set(nodes))
    unbounded = _unbounded(doc, {p for p, _, _ in pairs})

    if model == "linear":
        fld = doc.get("field")
        _need(isinstance(fld, dict) and set(fld) == {"p", "q"}, "field must be {\"p\": prime, \"q\": dim}", "field")
        p, q = fld["p"], fld["q"]
        _need(_is_int(p) and 2 <= p < MAX_PRIME and is_prime(p),
              f"field.p must be a prime below {MAX_PRIME}", "field.p")
        _need(_is_int(q) and q >= 1, "field.q must be a positive integer", "field.q")
        gains = {}
        for pair, e, where in pairs:
            extra = sorted(set(e) - {"from", "to", "matrix"})
            if extra:
                raise DocumentError(f"unexpected edge key {extra[0]!r}", field=where)
            m = e.get("matrix")
            _need(isinstance(m, list) and len(m) == q and
                  all(isinstance(r, list) and len(r) == q for r in m),
                  f"matrix must be {q}x{q}", f"{where}.matrix")
            _need(all(_is_int(x) for r in m for x in r), "matrix entries must be integers", f"{where}.matrix")
            _need(all(0 <= x < p for r in m for x in r), f"entry out of field range [0, {p})", f"{where}.matrix")
            gains[pair] = FieldMatrix(p, m)
        net = LinearRelayNetwork(tuple(nodes), doc["source"], tuple(dests), p, q, gains, unbounded, **meta)
    else:
        alph = doc.get("alphabets")
        _need(isinstance(alph, dict), "alphabets must be an object", "alphabets")
        for v, a in alph.items():
            _need(v in nodes, f"unknown node {v!r}", f"alphabets.{v}")
            _need(_is_int(a) and a >= 1, "alphabet size must be a positive integer", f"alphabets.{v}")
        for pair, e, where in pairs:
            extra = sorted(set(e) - {"from", "to"})
            if extra:
                raise DocumentError(f"general edges carry no {extra[0]!r}", field=where)
        funcs = doc.get("functions", {})
        _need(isinstance(funcs, dict), "functions must be an object", "functions")
        functions = {}
        for v, f in funcs.items():
            where = f"functions.{v}"
            _need(v in nodes, f"unknown node {v!r}", where)
            _need(isinstance(f, dict) and {"inputs", "table"} <= set(f) <= {"inputs", "table", "outputs"},
                  "function needs 'inputs' and 'table' (and optional 'outputs')", where)
            ins = f["inputs"]
            _need(isinstance(ins, list) and all(isinstance(i, str) for i in ins) and len(set(ins)) == len(ins),
                  "inputs must be a list of distinct node ids", f"{where}.inputs")
            for i in ins:
                _need(i in alph, f"input {i!r} has no declared alphabet", f"{where}.inputs")
            table = f["table"]
            _need(isinstance(table, list) and all(_is_int(x) and x >= 0 for x in table),
                  "table must be a list of non-negative integers", f"{where}.table")
            rows = int(np.prod([alph[i] for i in ins])) if ins else 1
            _need(len(table) == rows,
                  f"function table of node {v!r} has {len(table)} entries, expected {rows}", f"{where}.table")
            outputs = f.get("outputs", max(table, default=0) + 1)
            _need(_is_int(outputs) and outputs >= 1, "outputs must be a positive integer", f"{where}.outputs")
            _need(all(x < outputs for x in table), f"table entry of node {v!r} is not below outputs={outputs}",
                  f"{where}.table")
            functions[v] = canonical_function(ins, table, outputs, alph)
        edge_list = tuple(p for p, _, _ in pairs) if "edges" in doc else None
        net = GeneralRelayNetwork(tuple(nodes), doc["source"], tuple(dests), alph, functions,
                                  edge_list, unbounded, **meta)

    rep = validate(net)
    if not rep.ok:
        raise NetworkError("; ".join(rep.errors))
    return net


def loads(text: str | bytes) -> RelayNetwork:
    """Parse document text; syntax errors carry the line number."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DocumentError(f"document is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"syntax error: {exc.msg}", line=exc.lineno) from None
    return from_document(doc)


def load(path) -> RelayNetwork:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None
    return loads(data)


def to_document(net: RelayNetwork) -> dict:
    doc = {
        "model": net.model,
        "nodes": list(net.nodes),
        "source": net.source,
        "destinations": list(net.destinations),
    }
    if isinstance(net, LinearRelayNetwork):
        doc["field"] = {"p": net.prime, "q": net.dim}
        doc["edges"] = [{"from": u, "to": v, "matrix": g.tolist()} for (u, v), g in net.gains.items()]
    elif isinstance(net, GeneralRelayNetwork):
        doc["alphabets"] = {v: int(a) for v, a in net.alphabets.items()}
        doc["edges"] = [{"from": u, "to": v} for u, v in net.edges]
        doc["functions"] = {v: {"inputs": list(f.inputs), "table": list(f.table), "outputs": f.outputs}
                            for v, f in net.functions.items()}
    else:
        raise TypeError(f"cannot serialise {type(net).__name__}")
    if net.unbounded:
        doc["unbounded"] = [list(e) for e in sorted(net.unbounded)]
    for key in ("name", "comment"):
        if getattr(net, key) is not None:
            doc[key] = getattr(net, key)
    return doc


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def dumps(net: RelayNetwork) -> str:
    return canonical_json(to_document(net)) + "\n"


def dump(net: RelayNetwork, path) -> None:
    Path(path).write_text(dumps(net), encoding="utf-8")
