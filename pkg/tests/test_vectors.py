import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cwskernel.errors import EmptyInput, MalformedModel, UnknownTerm, ZeroMean, ZeroVector
from cwskernel.nlp.services import DATA_DIR
from cwskernel.vectors import VectorModel, load_model, parse_model

ABC = VectorModel.from_dict({"a": [1, 0], "b": [1, 0.01], "c": [0, 1]})


def test_parse_example():
    model = parse_model(["2 2", "a 1 0", "b 0 1"])
    assert model.dimension == 2 and len(model) == 2 and model.terms == ("a", "b")


@pytest.mark.parametrize(
    "lines, line",
    [
        (["2 2", "a 1 0", "b 0 1 5"], 3),
        (["x y"], 1),
        ([], 1),
        (["1 2", "a 1 z"], 2),
        (["2 2", "a 1 0"], 2),
        (["1 2", "a 1 0", "b 0 1"], 3),
        (["2 2", "a 1 0", "a 0 1"], 3),
    ],
)
def test_malformed(lines, line):
    with pytest.raises(MalformedModel) as err:
        parse_model(lines)
    assert err.value.line == line


def test_zero_vector():
    with pytest.raises(ZeroVector) as err:
        parse_model(["2 2", "a 1 0", "c 0 0"])
    assert err.value.term == "c"


def test_similarity_examples():
    m = VectorModel.from_dict({"x": [1, 0], "y": [0, 1], "z": [1, 1]})
    assert m.similarity("x", "x") == pytest.approx(1.0, abs=1e-12)
    assert m.similarity("x", "y") == 0.0
    assert abs(m.similarity("z", "x") - 0.70710678) < 1e-8
    with pytest.raises(UnknownTerm):
        m.similarity("x", "nope")


def test_nearest_examples():
    assert ABC.nearest("a", 0) == []
    (term, sim), = ABC.nearest("a", 1)
    assert term == "b" and sim == pytest.approx(1 / math.sqrt(1 + 0.0001), abs=1e-12)
    assert [t for t, _ in ABC.nearest("a", 10)] == ["b", "c"]
    with pytest.raises(UnknownTerm):
        ABC.nearest("q", 1)


def test_nearest_ties_lexicographic():
    m = VectorModel.from_dict({"t": [1, 0], "z": [0, 1], "y": [0, 2], "x": [-1, 0]})
    assert [t for t, _ in m.nearest("t", 3)] == ["y", "z", "x"]


def test_cluster_center_examples():
    m = VectorModel.from_dict({"a": [1, 0], "b": [0, 1]})
    assert m.cluster_center(["b"]) == ("b", 1.0)
    term, sim = m.cluster_center(["b", "a"])
    assert term == "a" and abs(sim - 1 / math.sqrt(2)) < 1e-8
    assert m.cluster_center(["a", "a"])[0] == "a"
    with pytest.raises(EmptyInput):
        m.cluster_center([])


def test_set_similarity_examples():
    m = VectorModel.from_dict({"a": [1, 0], "b": [0, 1], "n": [-1, 0]})
    assert m.set_similarity(["a", "b"], ["b", "a"]) == pytest.approx(1.0)
    assert m.set_similarity(["a"], ["b"]) == 0.0
    assert abs(m.set_similarity(["a", "b"], ["a"]) - 1 / math.sqrt(2)) < 1e-8
    with pytest.raises(ZeroMean):
        m.set_similarity(["a", "n"], ["b"])
    with pytest.raises(EmptyInput):
        m.set_similarity([], ["b"])


def test_multiword_terms_use_underscores():
    m = load_model(DATA_DIR / "demo.vec")
    assert "machine learning" in m and "machine_learning" in m
    assert m.similarity("machine learning", "machine_learning") == pytest.approx(1.0)


vectors = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3)
models = st.dictionaries(st.sampled_from("abcdefgh"), vectors, min_size=2, max_size=8).map(VectorModel.from_dict)


@given(models)
def test_symmetric_bounded_and_scale_invariant(model):
    big = model.scaled(7.3)
    for a in model.terms:
        for b in model.terms:
            s = model.similarity(a, b)
            assert abs(s - model.similarity(b, a)) < 1e-12
            assert -1 - 1e-9 <= s <= 1 + 1e-9
            assert abs(s - big.similarity(a, b)) < 1e-9


@given(models, st.data())
def test_nearest_prefix_and_center_permutation(model, data):
    t = data.draw(st.sampled_from(model.terms))
    for k in range(len(model)):
        assert model.nearest(t, k) == model.nearest(t, k + 1)[:k]
    terms = data.draw(st.lists(st.sampled_from(model.terms), min_size=1, max_size=5))
    perm = data.draw(st.permutations(terms))
    try:
        assert model.cluster_center(terms) == model.cluster_center(perm)
    except ZeroMean:
        with pytest.raises(ZeroMean):
            model.cluster_center(perm)
