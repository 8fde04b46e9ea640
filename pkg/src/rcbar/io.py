"""Configuration parsing and file formats (JSON documents, CSV tables).

Floats are written with ``repr``, the shortest decimal that round-trips, so
CSV and JSON files reproduce the in-memory doubles exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math

import numpy as np

from .errors import RcbarError
from .model import INITIAL_KINDS, PAIR_LAW_KINDS, ConstantInitial, ModelSpec
from .montecarlo import MODES
from .tree import Tree, generation_of

TREE_HEADER = ("node", "generation", "value")
CONFIG_KEYS = ("coeff_law", "noise_law", "initial", "experiment")
EXPERIMENT_KEYS = ("generations", "replicates", "seed", "mode")


class ConfigError(RcbarError, ValueError):
    """A configuration or input file is malformed."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


# ------------------------------------------------------------ seeds

def parse_seed(value, field="seed"):
    """Accept a non-negative 64-bit integer given as int, decimal or 0x-hex."""
    if isinstance(value, bool):
        raise ConfigError("seed must be an integer", field)
    if isinstance(value, int):
        seed = value
    elif isinstance(value, str):
        text = value.strip().lower()
        try:
            seed = int(text, 16) if text.startswith("0x") else int(text, 10)
        except ValueError:
            raise ConfigError(f"cannot parse seed {value!r}", field) from None
    else:
        raise ConfigError("seed must be an integer or a string", field)
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed {seed} is outside the 64-bit range", field)
    return seed


# ------------------------------------------------------------ config

def _number(obj, key, path):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("must be a number", f"{path}.{key}")
    if not math.isfinite(v):
        raise ConfigError("must be finite", f"{path}.{key}")
    return float(v)


def _build(kinds, obj, path):
    if not isinstance(obj, dict):
        raise ConfigError("must be an object", path)
    if "kind" not in obj:
        raise ConfigError("missing required field", f"{path}.kind")
    kind = obj["kind"]
    if kind not in kinds:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {sorted(kinds)}", f"{path}.kind")
    cls = kinds[kind]
    names = [f.name for f in dataclasses.fields(cls)]
    for key in obj:
        if key != "kind" and key not in names:
            raise ConfigError(f"unexpected field for kind {kind!r}", f"{path}.{key}")
    kwargs = {k: _number(obj, k, path) for k in names if k in obj}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None


def spec_from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    for key in doc:
        if key not in CONFIG_KEYS:
            raise ConfigError("unexpected field", key)
    for key in ("coeff_law", "noise_law"):
        if key not in doc:
            raise ConfigError("missing required field", key)
    initial = _build(INITIAL_KINDS, doc["initial"], "initial") if "initial" in doc else ConstantInitial()
    return ModelSpec(
        coeff_law=_build(PAIR_LAW_KINDS, doc["coeff_law"], "coeff_law"),
        noise_law=_build(PAIR_LAW_KINDS, doc["noise_law"], "noise_law"),
        initial=initial,
    )


def experiment_from_dict(doc):
    exp = doc.get("experiment", {})
    if not isinstance(exp, dict):
        raise ConfigError("must be an object", "experiment")
    out = {}
    for key, value in exp.items():
        path = f"experiment.{key}"
        if key not in EXPERIMENT_KEYS:
            raise ConfigError("unexpected field", path)
        if key == "seed":
            out[key] = parse_seed(value, path)
        elif key == "mode":
            if value not in MODES:
                raise ConfigError(f"unknown mode {value!r}; expected one of {MODES}", path)
            out[key] = value
        else:
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError("must be a positive integer", path)
            out[key] = value
    return out


def config_to_dict(spec, experiment=None):
    doc = spec.to_dict()
    if experiment:
        doc["experiment"] = {k: (f"0x{v:016x}" if k == "seed" else v) for k, v in experiment.items()}
    return doc


def loads_config(text):
    """Parse configuration text into ``(ModelSpec, experiment dict)``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    return spec_from_dict(doc), experiment_from_dict(doc)


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return loads_config(text)


# ------------------------------------------------------------ JSON

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps_json(obj):
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))


# ------------------------------------------------------------ CSV

def tree_to_csv(tree):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TREE_HEADER)
    for k, v in enumerate(tree.values.tolist(), start=1):
        w.writerow((k, generation_of(k), repr(v)))
    return buf.getvalue()


def write_tree_csv(path, tree):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(tree_to_csv(tree))


def tree_from_csv(text):
    """Parse a tree CSV; the node column must run 1..2^(n+1)-1 with no gaps."""
    rows = csv.reader(io.StringIO(text))
    try:
        header = next(rows)
    except StopIteration:
        raise ConfigError("empty tree file", line=1) from None
    if tuple(h.strip() for h in header) != TREE_HEADER:
        raise ConfigError(f"expected header {','.join(TREE_HEADER)}", line=1)
    values = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ConfigError("expected 3 columns", line=lineno)
        try:
            node, gen, value = int(row[0]), int(row[1]), float(row[2])
        except ValueError:
            raise ConfigError("cannot parse row", line=lineno) from None
        if node != len(values) + 1:
            raise ConfigError(f"expected node {len(values) + 1}, got {node}", "node", lineno)
        if gen != generation_of(node):
            raise ConfigError(f"node {node} belongs to generation {generation_of(node)}", "generation", lineno)
        if not math.isfinite(value):
            raise ConfigError("value must be finite", "value", lineno)
        values.append(value)
    if not values:
        raise ConfigError("tree file has no nodes")
    try:
        return Tree.from_values(values)
    except ValueError:
        raise ConfigError(f"{len(values)} nodes do not form complete generations (partial last generation)") from None


def read_tree_csv(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read tree: {exc}") from None
    return tree_from_csv(text)


def samples_to_csv(replicate_ids, samples):
    samples = np.asarray(samples)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replicate"] + [f"component_{j + 1}" for j in range(samples.shape[1])])
    for r, row in zip(replicate_ids, samples.tolist()):
        w.writerow([int(r)] + [repr(v) for v in row])
    return buf.getvalue()
