import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingfourier.core import all_configurations, complete_graph, cycle_graph, path_graph
from isingfourier.decision import LTF, Constant, Dictator, Majority, TruthTable, monotone_functions
from isingfourier.fourier import Product, exact_spectrum, moments
from isingfourier.influence import (
    conditional_association_check, discrete_derivative, empirical_influence, equal_influence_check,
    expected_agreement, influence_bound, influence_exact, influence_flip, influence_fourier,
    influence_profile, rousseau_ltf, rousseau_maximality_check,
)
from isingfourier.ising import IsingModel


def test_derivative_examples():
    maj = Majority(3)
    for last in (-1, 1):
        assert abs(discrete_derivative(maj, [1, -1, last], 2)) == 1
    assert discrete_derivative(Constant(3), [1, 1, -1], 1) == 0
    for x in all_configurations(3):
        assert discrete_derivative(Dictator(3, 0), x, 0) == 1


def test_influence_examples():
    for i in range(3):
        v = influence_exact(Majority(3), i)
        assert v.flip == pytest.approx(0.5) and v.fourier == pytest.approx(0.5)
    d = [influence_exact(Dictator(3, 0), i).flip for i in range(3)]
    assert d == pytest.approx([1, 0, 0])


def test_bound_examples():
    spec = exact_spectrum(Majority(3))
    assert influence_bound(spec, np.ones(3)) == pytest.approx([1 / math.sqrt(3)] * 3)
    prof = influence_profile(Dictator(3, 0))
    assert prof.values[0] == 1.0 > prof.bounds[0]
    assert prof.flags.tolist() == [True, False, False]
    const = influence_profile(Constant(3))
    assert np.all(const.bounds == 0) and np.all(const.values == 0)
    assert not np.any(influence_profile(Majority(3)).flags)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6))
def test_flip_equals_fourier(n, seed):
    rng = np.random.default_rng(seed)
    f = TruthTable(n, rng.choice([-1, 1], 1 << n))
    meas = Product(rng.uniform(0.05, 0.95, n))
    flip = influence_flip(f, meas)
    four = influence_fourier(exact_spectrum(f, meas), meas.sigma)
    np.testing.assert_allclose(flip, four, atol=1e-10)
    assert np.all((flip >= 0) & (flip <= 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_monotone_simplification(seed):
    rng = np.random.default_rng(seed)
    n = 5
    w = rng.uniform(0, 1, n)
    f = LTF(rng.uniform(-1, 1), tuple(w))
    meas = Product(rng.uniform(0.05, 0.95, n))
    spec = exact_spectrum(f, meas)
    order1 = spec.order1()
    assert np.all(order1 >= -1e-12)
    np.testing.assert_allclose(influence_flip(f, meas), order1 / meas.sigma, atol=1e-10)


def test_rousseau_symmetric_case():
    f = rousseau_ltf([0.5, 0.5, 0.5])
    assert f.a0 == pytest.approx(0.0)
    np.testing.assert_array_equal(f.truth_table(), Majority(3).truth_table())


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=3, max_size=3))
def test_rousseau_maximal(p):
    rep = rousseau_maximality_check(p)
    assert len(rep.objectives) == 20
    assert rep.attains_max


def test_expected_agreement():
    for f in monotone_functions(3):
        r = expected_agreement(f)
        assert r.direct == pytest.approx(r.formula, abs=1e-12)
        assert r.direct == pytest.approx(1.5 + 0.5 * influence_flip(f).sum(), abs=1e-12)
    r = expected_agreement(Majority(3), [0.2, 0.7, 0.9])
    assert r.direct == pytest.approx(r.formula, abs=1e-12)


def test_association_examples():
    n = 4
    f = LTF(-0.1, (1 / n,) * n)
    r = conditional_association_check(f, f, [0, 1], [2, 3], lambda xl: xl.sum(axis=1), 0)
    assert r.criterion > 0 and r.covariance >= -1e-12
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = LTF(rng.uniform(-1, 1), tuple(rng.uniform(0, 1, n)))
        h = LTF(rng.uniform(-1, 1), tuple(rng.uniform(0, 1, n)))
        p = rng.uniform(0.1, 0.9, n)
        r = conditional_association_check(g, h, [0, 2], [1, 3], lambda xl: xl[:, 0], 1, p)
        assert r.criterion >= 0
        assert np.isfinite(r.covariance)
        assert r.covariance >= -1e-12
    with pytest.raises(ValueError, match="probability zero"):
        conditional_association_check(f, f, [0], [1, 2, 3], lambda xl: xl.sum(axis=1), 7)


@pytest.mark.parametrize("graph", [cycle_graph(6), complete_graph(4)])
def test_equal_influence(graph):
    model = IsingModel.from_edges(graph.node_count, graph.edges, 1.0)
    f = LTF(0.0, (1.0,) * graph.node_count)
    assert equal_influence_check(model, f) < 1e-10


def test_equal_influence_rejects_irregular():
    model = IsingModel.from_edges(3, path_graph(3).edges, 1.0)
    with pytest.raises(ValueError, match=r"degrees \[1, 2, 1\]"):
        equal_influence_check(model, Majority(3))
    model = IsingModel.from_edges(3, cycle_graph(3).edges, [1.0, 2.0, 1.0])
    with pytest.raises(ValueError, match="edge weights"):
        equal_influence_check(model, Majority(3))


def test_empirical_influence_dictator():
    X = Product([0.5] * 4).sample(2000, 0)
    v = empirical_influence(Dictator(4, 0), X)
    assert v.tolist() == [1.0, 0.0, 0.0, 0.0]


def test_profile_export():
    prof = influence_profile(Majority(3), [0.3, 0.5, 0.7])
    lines = prof.to_csv().splitlines()
    assert lines[0] == "item,influence,bound,flag" and len(lines) == 4
    assert prof.total == pytest.approx(prof.values.sum())
    sd = math.sqrt(moments(exact_spectrum(Majority(3), [0.3, 0.5, 0.7]))[1])
    assert prof.bounds[1] == pytest.approx(sd / math.sqrt(3))
