import glob
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fwdegd.config import (SCHEMA, compile_poly, dump_config, load_config, parse_config)
from fwdegd.errors import ConfigError
from fwdegd.grid import Grid1D, Grid2D
from fwdegd.hjb import HjbParams

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

MINIMAL = "[grid]\nn = 8\n"


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIG_DIR, "*.ini"))))
def test_shipped_configs_parse(path):
    cfg = load_config(path)
    assert cfg.sim.grid.size > 0
    assert parse_config(dump_config(cfg)) == cfg


def test_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.sim.grid == Grid1D(8)
    assert cfg.sim.hjb == HjbParams()
    assert cfg.sim.protocol.kind == "logit"
    assert cfg.sweep is None and cfg.table1 == ((0.150, 0.225, 0.300, 0.375), 0.25)


def test_two_dimensional_grid():
    cfg = parse_config("[grid]\nn = 4\nnz = 6\n[utility]\nname = resource2d\n")
    assert cfg.sim.grid == Grid2D(4, 6)


@pytest.mark.parametrize("kind,w", [("replicator", 0.0), ("bnn", 1.0)])
def test_protocol_aliases(kind, w):
    cfg = parse_config(MINIMAL + f"[protocol]\nkind = {kind}\n")
    assert cfg.sim.protocol.kind == "pairwise" and cfg.sim.protocol.w == w


def test_missing_grid():
    with pytest.raises(ConfigError, match=r"missing required section \[grid\]"):
        parse_config("[time]\ndt = 0.1\n")


@pytest.mark.parametrize("text,line,column", [
    ("[grid]\nn = 8\n[hjb]\n  \nepsilom = 0.3\n", 5, 1),
    ("[grid]\nn = 8\n[gird]\n", 3, 1),
    ("[grid]\nn = eight\n", 2, 5),
    ("[grid]\nn = 8\n[initial]\nkind = pdf_expr\nexpr = x^2 + y\n", 5, 14),
    ("[grid]\nn = 8\n[initial]\nkind = pdf_expr\nexpr = x^0.5\n", 5, 10),
    ("[grid]\nn = 8\n[initial]\nkind = gaussian\n", 4, 8),
    ("[grid]\nn = 8\n[hjb]\nepsilon = -1\n", 3, 1),
])
def test_error_positions(text, line, column):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert (info.value.line, info.value.column) == (line, column)
    assert f"line {line}, column {column}" in str(info.value)


@pytest.mark.parametrize("text", [
    "n = 8\n",
    "[grid]\nn = 8\n[grid]\nn = 9\n",
    "[grid]\nn = 8\nn = 9\n",
    "[grid]\nn = 8.5\n",
    "[grid]\nn = 8\n[time]\ndt = inf\n",
    "[grid]\nn = 8\n[sweep]\nparameter = output.directory\nvalues = 1\n",
    "[grid]\nn = 8\n[sweep]\nparameter = hjb.epsilon\n",
    "[grid]\nn = 8\n[initial]\nkind = pdf_expr\n",
])
def test_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@pytest.mark.parametrize("expr,x,z,expected", [
    ("x^2", 3.0, 0.0, 9.0),
    ("1 + 2*x - x*z", 2.0, 3.0, -1.0),
    ("(x + z)^3 / 2", 1.0, 1.0, 4.0),
    ("-x", 1.0, 0.0, -1.0),
    ("7", 0.3, 0.2, 7.0),
])
def test_poly_values(expr, x, z, expected):
    assert compile_poly(expr)(np.array([x]), np.array([z]))[0] == pytest.approx(expected)


@pytest.mark.parametrize("expr", ["exp(x)", "x**x", "1/x", "x^65", "__import__('os')", "x if z else 1",
                                  "x[0]", "True", "'a'", "x +"])
def test_poly_rejects(expr):
    with pytest.raises(ConfigError):
        compile_poly(expr)


def test_pdf_expr_initial_is_exact():
    cfg = parse_config(MINIMAL + "[initial]\nkind = pdf_expr\nexpr = x^2\n")
    edges = np.linspace(0, 1, 9)
    expected = np.diff(edges ** 3) / 3 * 3
    np.testing.assert_allclose(cfg.sim.initial_density().masses, expected / expected.sum(), atol=1e-15)


def test_with_value():
    cfg = parse_config(MINIMAL + "[hjb]\nepsilon = 0.3\n")
    other = cfg.with_value("hjb.epsilon", 0.15)
    assert other.sim.hjb.epsilon == 0.15 and cfg.sim.hjb.epsilon == 0.3
    assert cfg.with_value("grid.n", 16).sim.grid == Grid1D(16)
    with pytest.raises(ConfigError):
        cfg.with_value("protocol.kind", 1)
    with pytest.raises(ConfigError):
        cfg.with_value("hjb.epsilon", -1.0)


settings = st.fixed_dictionaries({
    "n": st.integers(2, 500),
    "dt": st.floats(1e-4, 1.0),
    "t_max": st.floats(0.0, 100.0),
    "epsilon": st.floats(1e-3, 5.0),
    "chi": st.floats(0.0, 1.0),
    "xi": st.floats(0.0, 4.0),
    "kind": st.sampled_from(["logit", "replicator", "bnn"]),
    "prefix": st.sampled_from(["", "run_"]),
})


@given(settings)
def test_round_trip(s):
    text = (f"[grid]\nn = {s['n']}\n[time]\ndt = {s['dt']!r}\nt_max = {s['t_max']!r}\n"
            f"[protocol]\nkind = {s['kind']}\n"
            f"[hjb]\nepsilon = {s['epsilon']!r}\nchi = {s['chi']!r}\nxi = {s['xi']!r}\n"
            f"[output]\nprefix = {s['prefix']}\n")
    cfg = parse_config(text)
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert again.sim.hjb == cfg.sim.hjb and again.sim.dt == cfg.sim.dt


def test_schema_sections():
    assert set(SCHEMA) == {"grid", "time", "protocol", "utility", "hjb", "initial", "output", "sweep", "table1"}
