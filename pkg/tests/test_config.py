import math

import pytest

from mpspline.config import (
    ExperimentConfig,
    dump,
    integer,
    load_preset,
    merge,
    number,
    parse_text,
    preset_names,
    preset_text,
)
from mpspline.errors import ConfigError
from mpspline.multipatch_core import EXACT, truncated

SMALL = """
# two rings
[experiment]
kind = interpolation
name = small

[patch.inner]
r = 0, 0.5, 8
theta = 0, 2*pi, 16

[patch.outer]
r = 0.5, 1, 8
theta = 0, 2*pi, 16

[plan]
modes = exact, truncated:5
"""


def test_parse_sections_and_entries():
    raw = parse_text(SMALL)
    assert list(raw) == ["experiment", "patch.inner", "patch.outer", "plan"]
    assert raw["patch.inner"]["theta"] == "0, 2*pi, 16"


def test_typed_config():
    cfg = ExperimentConfig.from_text(SMALL)
    assert cfg.experiment == "interpolation" and cfg.name == "small"
    assert [p.name for p in cfg.patches] == ["inner", "outer"]
    assert cfg.patches[0].theta == (0.0, 2 * math.pi, 16)
    assert cfg.modes == (EXACT, truncated(5))
    assert cfg.mapping.kind == "czarny" and cfg.mapping.epsilon == 0.3
    assert cfg.advection.omega == pytest.approx(2 * math.pi)


@pytest.mark.parametrize(
    "text,value",
    [("2*pi", 2 * math.pi), ("42/128", 42 / 128), ("-1e-3", -1e-3), ("2**3 + (1 - 0.5)", 8.5), ("+4", 4.0)],
)
def test_numbers(text, value):
    assert number(text) == pytest.approx(value)


@pytest.mark.parametrize("text", ["__import__('os')", "e", "1/0", "abs(2)", "1e400", "", "True"])
def test_bad_numbers(text):
    with pytest.raises(ConfigError):
        number(text)


def test_integer_rejects_fractions():
    assert integer("3*4") == 12
    with pytest.raises(ConfigError):
        integer("2.5")


@pytest.mark.parametrize(
    "text,msg",
    [
        ("x = 1\n", "before the first section"),
        ("[a]\n[a]\n", "repeated"),
        ("[experiment]\nkind = advection\nkind = advection\n", "repeated"),
        ("[experiment]\nthis is not an entry\n", "expected"),
        ("[experiment]\nkind =\n", "empty value"),
        ("[bad name]\n", "expected"),
    ],
)
def test_grammar_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_text(text)


def test_error_message_has_line_number():
    with pytest.raises(ConfigError, match=r"f.cfg:3"):
        parse_text("[experiment]\nkind = coefficients\n???\n", "f.cfg")


@pytest.mark.parametrize(
    "edit",
    [
        {"experiment": {"kind": "simulate"}},
        {"mystery": {"a": "1"}},
        {"plan": {"modes": "fuzzy"}},
        {"plan": {"cross": "diagonal"}},
        {"mapping": {"kind": "torus"}},
        {"mapping": {"epsilon": "3"}},
        {"domain": {"bc_r": "free"}},
        {"advection": {"dt": "0"}},
        {"advection": {"tracer": "euler"}},
        {"advection": {"volume": "1"}},
        {"patch.inner": {"r": "0.5, 0, 8"}},
        {"patch.inner": {"r": "0, 0.5"}},
        {"patch.inner": {"phi": "1"}},
        {"interpolation": {"eval_grid": "10"}},
        {"stability": {"shifts": "0.5, 4, 10"}},
        {"convergence": {"refinements": "2, 1"}},
        {"coefficients": {"n": "0, 5"}},
    ],
)
def test_semantic_errors(edit):
    raw = merge(parse_text(SMALL), edit)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_raw(raw)


def test_missing_kind_and_patches():
    with pytest.raises(ConfigError, match="kind"):
        ExperimentConfig.from_text("[plan]\nmodes = exact\n")
    with pytest.raises(ConfigError, match="patch"):
        ExperimentConfig.from_text("[experiment]\nkind = advection\n")


def test_echo_round_trip():
    cfg = ExperimentConfig.from_text(SMALL)
    again = ExperimentConfig.from_text(cfg.echo())
    assert again == cfg
    assert again.echo() == cfg.echo()
    assert parse_text(dump(parse_text(SMALL))) == parse_text(SMALL)


def test_overrides():
    cfg = ExperimentConfig.from_text(SMALL).with_overrides({"plan": {"modes": "truncated:20"}})
    assert cfg.modes == (truncated(20),)


@pytest.mark.parametrize("name", preset_names())
def test_presets_load_and_echo(name):
    cfg = load_preset(name)
    assert ExperimentConfig.from_text(cfg.echo()) == cfg


def test_expected_presets_ship():
    names = set(preset_names())
    assert {"coefficients", "table3_uniform", "table3_nonuniform", "convergence", "test21", "test22", "stability"} <= names
    with pytest.raises(ConfigError, match="unknown preset"):
        preset_text("nope")
