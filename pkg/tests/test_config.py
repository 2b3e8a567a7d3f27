import numpy as np
import pytest

from phs_lab.config import Scenario, build_model, build_system, parse_matrix, parse_vector, seed_from_env
from phs_lab.core import TwoPortPhs
from phs_lab.errors import ConfigError

LINEAR = """
[model]
type = linear
hamiltonian = 2 0; 0 1   # inline comment
structure = 0 1; -1 0
input_map = 0; 1
"""


def test_vector_and_matrix_grammar():
    np.testing.assert_array_equal(parse_vector("1, 2 3"), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(parse_matrix("1 2; 3 4;"), [[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(ConfigError):
        parse_matrix("1 2; 3")
    with pytest.raises(ConfigError):
        parse_vector("1, x")


def test_linear_model_from_text():
    sys = build_system(Scenario.from_string(LINEAR))
    assert sys.n == 2 and sys.m == 1
    assert sys.dissipation is None
    assert sys.hamiltonian(np.array([1.0, 2.0])) == 3.0


def test_missing_key_is_named():
    text = LINEAR.replace("hamiltonian = 2 0; 0 1   # inline comment\n", "")
    with pytest.raises(ConfigError, match="missing key 'hamiltonian' in \\[model\\]"):
        build_model(Scenario.from_string(text))


@pytest.mark.parametrize(
    "old, new, match",
    [
        ("structure = 0 1; -1 0", "structure = 0 1; 1 0", "skew"),
        ("input_map = 0; 1", "input_map = 0; 1; 2", "rows"),
        ("type = linear", "type = teapot", "unknown model type"),
    ],
)
def test_invalid_linear_models(old, new, match):
    with pytest.raises(ConfigError, match=match):
        build_model(Scenario.from_string(LINEAR.replace(old, new)))


def test_negative_dissipation_rejected():
    text = LINEAR + "dissipation = 0 0; 0 -1\n"
    with pytest.raises(ConfigError, match="semidefinite"):
        build_model(Scenario.from_string(text))


def test_builtin_models_and_case_sensitive_keys():
    sc = Scenario.from_string("[model]\ntype = actuator\nL0 = 2\na = 0.1\nm = 0.5\n")
    model = build_model(sc)
    assert isinstance(model, TwoPortPhs)
    assert model.params.L0 == 2.0
    with pytest.raises(ConfigError, match="unknown key 'mass'"):
        build_model(Scenario.from_string("[model]\ntype = msd\nmass = 1\n"))
    with pytest.raises(ConfigError):
        build_model(Scenario.from_string("[model]\ntype = msd\nk = -1\n"))


def test_typed_accessors():
    sc = Scenario.from_string("[a]\nx = 1.5\nn = 3\nv = 1, 2\ns = word\n")
    assert sc.float("a", "x") == 1.5
    assert sc.int("a", "n") == 3
    assert sc.text("a", "s") == "word"
    assert sc.float("a", "missing", 7.0) == 7.0
    with pytest.raises(ConfigError, match="integer"):
        sc.int("a", "x")
    with pytest.raises(ConfigError, match="not a number"):
        sc.float("a", "s")
    with pytest.raises(ConfigError, match="missing section"):
        sc.float("b", "x")
    with pytest.raises(ConfigError, match="not found"):
        Scenario.read("/nonexistent/file.cfg")


@pytest.mark.parametrize("raw, ok", [("42", True), (" 7 ", True), ("-1", False), ("1.5", False), ("abc", False)])
def test_seed_from_env(monkeypatch, raw, ok):
    monkeypatch.setenv("PHS_LAB_SEED", raw)
    if ok:
        assert seed_from_env() == int(raw)
    else:
        with pytest.raises(ConfigError):
            seed_from_env()
    monkeypatch.delenv("PHS_LAB_SEED")
    assert seed_from_env(5) == 5
