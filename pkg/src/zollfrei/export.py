"""Atomic CSV / JSON / SVG writers, config files and angle expressions."""
from __future__ import annotations

import ast
import json
import math
import operator
import os
import platform
import tempfile
from dataclasses import asdict, is_dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np


# -- expressions ------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sin": math.sin, "cos": math.cos, "tan": math.tan, "atan": math.atan,
          "arctan": math.atan, "acos": math.acos, "arccos": math.acos, "asin": math.asin,
          "arcsin": math.asin, "sqrt": math.sqrt, "exp": math.exp, "log": math.log}
_CONSTS = {"pi": math.pi, "e": math.e}


def _eval(node, names):
    if isinstance(node, ast.Expression):
        return _eval(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ValueError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, names), _eval(node.right, names))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval(node.operand, names))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval(node.args[0], names))
    raise ValueError("unsupported expression")


def parse_expr(text: str, names=None) -> float:
    """Arithmetic expression with ``pi``, ``e`` and a few elementary functions.

    A leading ``f:`` applies the function ``f`` to the rest, so ``tan:pi/8``
    is ``tan(pi/8)`` and ``atan:1/4`` is ``arctan(1/4)``.
    """
    text = str(text).strip()
    head, sep, rest = text.partition(":")
    if sep:
        if head.strip() not in _FUNCS:
            raise ValueError(f"unknown function prefix {head!r}")
        return _FUNCS[head.strip()](parse_expr(rest, names))
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}") from exc
    try:
        value = _eval(tree, names or {})
    except (ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from exc
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def parse_angle(text: str) -> float:
    return parse_expr(text)


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def scalar_field(text: str):
    """Callback ``q -> value`` from an expression in ``q0, q1, q2, q3``."""
    tree = ast.parse(str(text).strip(), mode="eval")
    probe = {f"q{i}": 0.5 for i in range(4)}
    _eval(tree, probe)

    def f(q):
        return _eval(tree, {f"q{i}": float(q[i]) for i in range(4)})

    return f


# -- config files -------------------------------------------------------------------

def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


# -- serialisation --------------------------------------------------------------------

def jsonable(obj):
    """Plain JSON types; non-finite floats become ``None``."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def versions() -> dict:
    import scipy

    from . import __version__

    return {"zollfrei": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def atomic_write(path, text: str):
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".",
                               prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_json(command: str, config: dict, results, tolerances: dict) -> str:
    doc = {"command": command, "config": jsonable(config), "results": jsonable(results),
           "tolerances": jsonable(tolerances), "versions": versions()}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def trajectory_csv(s, x, v) -> str:
    """Header ``s,x0,...,v0,...`` and one row per sample with 17 significant digits."""
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    header = ["s"] + [f"x{i}" for i in range(x.shape[1])] + [f"v{i}" for i in range(v.shape[1])]
    rows = [",".join(header)]
    for row in np.column_stack([s, x, v]):
        rows.append(",".join(f"{val:.17g}" for val in row))
    return "\r\n".join(rows) + "\r\n"


def read_trajectory_csv(path):
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data


def polyline_svg(polylines, size: int = 480, pad: float = 0.05) -> str:
    """SVG with one ``<polyline>`` per 2D point array.

    Points are written in chart units; the view box (with the y axis
    flipped) does the scaling.
    """
    pts = np.concatenate([np.asarray(p, dtype=float) for p in polylines])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(np.max(hi - lo), 1e-12))
    x0, y0 = lo[0] - pad * span, -hi[1] - pad * span
    w = (1 + 2 * pad) * span
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="{x0:.17g} {y0:.17g} {w:.17g} {w:.17g}">',
           '<g transform="scale(1,-1)">']
    for p in polylines:
        coords = " ".join(f"{a:.17g},{b:.17g}" for a, b in np.asarray(p, dtype=float))
        out.append(f'<polyline fill="none" stroke="black" stroke-width="{w / size:.6g}" '
                   f'points="{coords}"/>')
    out += ["</g>", "</svg>"]
    return "\n".join(out) + "\n"


def read_svg_polylines(path):
    import xml.etree.ElementTree as ET

    root = ET.parse(path).getroot()
    lines = []
    for el in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pairs = [tuple(float(c) for c in pair.split(",")) for pair in el.get("points").split()]
        lines.append(np.array(pairs))
    return lines
