import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmdpsynth.errors import ModelSyntaxError, SpecSyntaxError, UnknownParameter
from pmdpsynth.generators import random_pmc
from pmdpsynth.io import bundled_model_path, parse_model, parse_spec, serialize_model
from pmdpsynth.model import validate_model

HEADER = "pmdp\nparameters: v\nstates: 2\ninitial: 0\n"


def test_fig2_structure(fig2):
    assert fig2.num_states == 5
    assert fig2.parameters == ("v",)
    assert fig2.is_pmc
    assert fig2.labels["target"] == {3}


def test_examples_copy_matches_bundled():
    from pathlib import Path
    repo_copy = Path(__file__).resolve().parents[1] / "examples" / "fig2.pmdp"
    assert repo_copy.read_text() == bundled_model_path().read_text()


def test_unknown_parameter_is_positioned():
    text = HEADER + "state 0\naction a\n  1 : w\n  0 : 1 - w\nstate 1\naction a\n  1 : 1\n"
    with pytest.raises(UnknownParameter) as info:
        parse_model(text)
    assert info.value.line == 7
    assert info.value.col is not None


def test_empty_state_reported_by_validation():
    text = HEADER + "state 0\nstate 1\naction a\n  1 : 1\n"
    m = parse_model(text)
    assert any(d.message == "A(s) empty" for d in validate_model(m))


def test_syntax_error_has_line():
    with pytest.raises(ModelSyntaxError) as info:
        parse_model(HEADER + "state 0\naction a\n  1 ? v\n")
    assert info.value.line == 7


def test_missing_magic():
    with pytest.raises(ModelSyntaxError):
        parse_model("parameters: v\nstates: 1\n")


def test_costs_and_comments():
    text = ("pmdp # header\nparameters:\nstates: 2\ninitial: 0\nlabel goal: 1\ncost 0 go: 3/2\n"
            "state 0\naction go\n  1 : 0.5\n  0 : 1/2\nstate 1\naction stay\n  1 : 1\n")
    m = parse_model(text)
    assert float(m.cost(0, 0)) == 1.5
    assert m.labels["goal"] == {1}


@pytest.mark.parametrize("text,kind,direction,threshold", [
    ("P<=0.1 [F target]", "reach", "<=", 0.1),
    ("E<=14 [F goal]", "cost", "<=", 14.0),
    ("P>=0.95 [F done]", "reach", ">=", 0.95),
])
def test_parse_spec_examples(text, kind, direction, threshold):
    s = parse_spec(text, {"target": {1}, "goal": {1}, "done": {1}}, 3)
    assert (s.kind, s.direction, s.threshold) == (kind, direction, threshold)
    assert s.targets == {1}


def test_parse_spec_errors():
    with pytest.raises(SpecSyntaxError):
        parse_spec("P<0.1 [F target]", {"target": {1}})
    with pytest.raises(SpecSyntaxError):
        parse_spec("P<=0.1 [F nowhere]", {"target": {1}})
    with pytest.raises(SpecSyntaxError):
        parse_spec("P<=0.1 [F 7]", None, 3)


def test_spec_state_list():
    assert parse_spec("P>=1/2 [F 1, 2]", None, 3).targets == {1, 2}


def test_fig2_roundtrip(fig2):
    assert parse_model(serialize_model(fig2)) == fig2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 12), st.integers(0, 3), st.integers(1, 3))
def test_roundtrip_random(seed, n, k, acts):
    m = random_pmc(np.random.default_rng(seed), n, k, max_actions=acts)
    assert parse_model(serialize_model(m)) == m
