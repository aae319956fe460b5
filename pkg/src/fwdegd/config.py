"""Experiment files: INI text parsed with :mod:`configparser`.

Example::

    [grid]
    n = 250

    [time]
    dt = 0.005
    t_max = 60

    [protocol]
    kind = logit

    [utility]
    name = resource
    c = 2

    [hjb]
    epsilon = 0.375

    [initial]
    kind = pdf_expr
    expr = x^2

Unknown sections and keys are rejected with their line and column.  A
``[sweep]`` section (``parameter = hjb.epsilon``, ``values = 0.15, 0.3``)
turns one file into several runs.
"""
from __future__ import annotations

import ast
import configparser
import math
import re
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Optional

import numpy as np

from .dynamics import ProtocolSpec, SimConfig
from .errors import ConfigError, FwdEgdError
from .grid import Grid1D, Grid2D, density_from_function, uniform_density
from .hjb import HjbParams
from .utility import UtilitySpec

TABLE1_EPSILONS = (0.150, 0.225, 0.300, 0.375)


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"{s!r} is not finite")
    return v


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _floats(s: str) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", s.strip()) if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(_float(p) for p in parts)


def _str(s: str) -> str:
    return s.strip()


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False


SCHEMA: dict[str, dict[str, _Key]] = {
    "grid": {"n": _Key(_int, required=True), "nz": _Key(_int)},
    "time": {
        "dt": _Key(_float, 0.005),
        "t_max": _Key(_float, 10.0),
        "sample_every": _Key(_int, 200),
        "stationary_tol": _Key(_float, 1e-10),
        "max_steps": _Key(_int),
    },
    "protocol": {"kind": _Key(_str, "logit"), "w": _Key(_float)},
    "utility": {
        "name": _Key(_str, "resource"),
        "c": _Key(_float, 2.0),
        "shift": _Key(_float),
        "u_max": _Key(_float),
    },
    "hjb": {f.name: _Key(_int if f.type in (int, "int") else _float, f.default)
            for f in fields(HjbParams)},
    "initial": {"kind": _Key(_str, "uniform"), "expr": _Key(_str)},
    "output": {"directory": _Key(_str, "out"), "prefix": _Key(_str, "")},
    "sweep": {"parameter": _Key(_str, required=True), "values": _Key(_floats, required=True)},
    "table1": {"epsilons": _Key(_floats, TABLE1_EPSILONS), "reference": _Key(_float, 0.25)},
}
OPTIONAL_SECTIONS = ("sweep", "table1")
SWEEPABLE = {(s, k) for s in ("grid", "time", "protocol", "utility", "hjb")
             for k, key in SCHEMA[s].items() if key.parse in (_float, _int)}


# ---------------------------------------------------------------------------
# polynomial initial-condition expressions
# ---------------------------------------------------------------------------

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_VARS = ("x", "z")


def _check_poly(node, column):
    def fail(n, msg):
        raise ConfigError(msg, None, column(getattr(n, "col_offset", 0)))

    if isinstance(node, ast.Expression):
        return _check_poly(node.body, column)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            fail(node, f"unsupported constant {node.value!r}")
        return False
    if isinstance(node, ast.Name):
        if node.id not in _VARS:
            fail(node, f"unknown variable {node.id!r} (allowed: x, z)")
        return True
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        return _check_poly(node.operand, column)
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        left = _check_poly(node.left, column)
        right = _check_poly(node.right, column)
        if isinstance(node.op, ast.Pow):
            exp = node.right
            ok = (isinstance(exp, ast.Constant) and isinstance(exp.value, int)
                  and not isinstance(exp.value, bool) and 0 <= exp.value <= 64)
            if not ok:
                fail(exp, "exponents must be integer literals in [0, 64]")
        if isinstance(node.op, ast.Div) and right:
            fail(node.right, "division by a variable is not a polynomial")
        return left or right
    fail(node, f"unsupported syntax {type(node).__name__}")


def compile_poly(expr: str, column: int = 1) -> Callable[..., np.ndarray]:
    """Compile a polynomial in ``x`` and ``z`` (``^`` means power)."""
    stripped = expr.strip()
    src, origin = "", []
    for i, ch in enumerate(stripped):
        piece = "**" if ch == "^" else ch
        src += piece
        origin += [i] * len(piece)
    origin.append(len(stripped))

    def col(offset: int) -> int:
        # column in the original text of a 0-based offset into the rewritten source
        return column + origin[min(max(offset, 0), len(origin) - 1)]

    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {expr!r}: {exc.msg}", None, col((exc.offset or 1) - 1)) from None
    _check_poly(tree, col)
    code = compile(tree, "<pdf_expr>", "eval")

    def fn(x, z=None):
        env = {"x": np.asarray(x, dtype=np.float64),
               "z": np.zeros_like(x) if z is None else np.asarray(z, dtype=np.float64)}
        out = eval(code, {"__builtins__": {}}, env)  # nodes whitelisted above
        return np.broadcast_to(np.asarray(out, dtype=np.float64), env["x"].shape).copy()

    return fn


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^(\s*)([^=:\s][^=:]*?)\s*[=:]\s*(.*)$")


def _locate(text: str) -> dict:
    """Map ``(section, key)`` to ``(line, key column, value column)``, 1-based."""
    where: dict = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip()[0] in "#;":
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = (lineno, line.index("[") + 1, None)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[0].isspace():
            key = m.group(2).strip().lower()
            where[(section, key)] = (lineno, len(m.group(1)) + 1, m.start(3) + 1)
    return where


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment: typed values per section plus the built :class:`SimConfig`."""

    values: dict
    sim: SimConfig = field(compare=False)
    source: Optional[str] = field(default=None, compare=False)

    @property
    def output_dir(self) -> str:
        return self.values["output"]["directory"]

    @property
    def prefix(self) -> str:
        return self.values["output"]["prefix"]

    @property
    def sweep(self) -> Optional[tuple[str, tuple[float, ...]]]:
        s = self.values.get("sweep")
        return None if s is None else (s["parameter"], s["values"])

    @property
    def table1(self) -> tuple[tuple[float, ...], float]:
        t = self.values.get("table1") or {k: v.default for k, v in SCHEMA["table1"].items()}
        return tuple(t["epsilons"]), t["reference"]

    def with_value(self, dotted: str, value) -> "ExperimentConfig":
        """Copy with ``section.key`` replaced, rebuilt and revalidated."""
        section, key = _split_param(dotted)
        values = {s: dict(v) for s, v in self.values.items()}
        values[section][key] = SCHEMA[section][key].parse(repr(value))
        return ExperimentConfig(values, build_sim(values), self.source)


def _split_param(dotted: str) -> tuple[str, str]:
    parts = dotted.strip().split(".")
    if len(parts) != 2 or (parts[0], parts[1]) not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {dotted!r}; use section.key of a numeric setting")
    return parts[0], parts[1]


def parse_config(text: str, source: Optional[str] = None) -> ExperimentConfig:
    """Parse and validate experiment-file text."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   empty_lines_in_values=False)
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section]", exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse line {line!r}", lineno, 1) from None

    where = _locate(text)
    values: dict = {}
    for section in cp.sections():
        if section not in SCHEMA:
            line, col, _ = where.get((section, None), (None, None, None))
            raise ConfigError(f"unknown section [{section}]", line, col)
    for section, keys in SCHEMA.items():
        if not cp.has_section(section):
            if section == "grid":
                raise ConfigError("missing required section [grid]")
            if section in OPTIONAL_SECTIONS:
                continue
            values[section] = {k: key.default for k, key in keys.items()}
            continue
        got = cp[section]
        for k in got:
            if k not in keys:
                line, col, _ = where.get((section, k), (None, None, None))
                raise ConfigError(f"unknown key {k!r} in [{section}]", line, col)
        out = {}
        for k, key in keys.items():
            if k not in got:
                if key.required:
                    line, col, _ = where.get((section, None), (None, None, None))
                    raise ConfigError(f"[{section}] needs key {k!r}", line, col)
                out[k] = key.default
                continue
            line, _, vcol = where.get((section, k), (None, None, None))
            raw = got[k]
            try:
                out[k] = key.parse(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {k}: {exc}", line, vcol) from None
        values[section] = out

    if "sweep" in values:
        _split_param(values["sweep"]["parameter"])
    init = values["initial"]
    if init["kind"] == "pdf_expr":
        if not init["expr"]:
            raise ConfigError("[initial] kind = pdf_expr needs an expr")
        line, _, vcol = where.get(("initial", "expr"), (None, 1, 1))
        try:
            compile_poly(init["expr"], vcol or 1)
        except ConfigError as exc:
            raise ConfigError(str(exc.args[0]), line, exc.column) from None
    elif init["kind"] != "uniform":
        line, _, vcol = where.get(("initial", "kind"), (None, None, None))
        raise ConfigError(f"[initial] kind must be uniform or pdf_expr, got {init['kind']!r}", line, vcol)

    return ExperimentConfig(values, build_sim(values, where), source)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, str(path))


def _protocol(p: dict) -> ProtocolSpec:
    kind = p["kind"].lower()
    if kind == "replicator":
        return ProtocolSpec("pairwise", 0.0 if p["w"] is None else p["w"])
    if kind == "bnn":
        return ProtocolSpec("pairwise", 1.0 if p["w"] is None else p["w"])
    return ProtocolSpec(kind, 0.0 if p["w"] is None else p["w"])


def build_sim(values: dict, where: Optional[dict] = None) -> SimConfig:
    """Turn validated section values into a :class:`SimConfig`."""
    where = where or {}
    section = "grid"
    try:
        g = values["grid"]
        grid = Grid1D(g["n"]) if g["nz"] is None else Grid2D(g["n"], g["nz"])
        section = "initial"
        init = values["initial"]
        if init["kind"] == "uniform":
            initial = uniform_density(grid)
        else:
            # cell masses are exact integrals of the polynomial over each cell
            initial = density_from_function(grid, compile_poly(init["expr"]), order=33)
        section = "protocol"
        protocol = _protocol(values["protocol"])
        section = "utility"
        u = values["utility"]
        utility = UtilitySpec(u["name"], u["c"], u["shift"], u["u_max"])
        section = "hjb"
        hjb = HjbParams(**values["hjb"])
        section = "time"
        t = values["time"]
        return SimConfig(grid=grid, dt=t["dt"], t_max=t["t_max"], protocol=protocol,
                         utility=utility, hjb=hjb, initial=initial,
                         stationary_tol=t["stationary_tol"], sample_every=t["sample_every"],
                         max_steps=t["max_steps"])
    except FwdEgdError as exc:
        line, col, _ = where.get((section, None), (None, None, None))
        raise ConfigError(f"[{section}] {exc}", line, col) from None


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize to INI text that parses back to an equal config."""
    lines: list[str] = []
    for section, keys in SCHEMA.items():
        if section not in cfg.values:
            continue
        lines.append(f"[{section}]")
        for k in keys:
            v = cfg.values[section][k]
            if v is None:
                continue
            text = _fmt(v)
            if text == "":
                continue
            lines.append(f"{k} = {text}")
        lines.append("")
    return "\n".join(lines)
