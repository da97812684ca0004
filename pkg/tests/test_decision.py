import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingfourier.core import all_configurations
from isingfourier.decision import (
    LTF, Constant, Dictator, Majority, TruthTable, check_properties, energy_ltf,
    equivalence_classes, evaluate, from_json, is_monotone, max_function, monotone_functions,
)
from isingfourier.ising import IsingModel, conditional_probs

tables = st.integers(1, 5).flatmap(
    lambda n: st.lists(st.sampled_from([-1, 1]), min_size=1 << n, max_size=1 << n)
    .map(lambda t: TruthTable(n, t)))


def test_evaluate_examples():
    maj = Majority(3)
    assert evaluate(maj, [-1, 1, 1]) == 1
    assert evaluate(maj, [-1, -1, 1]) == -1
    assert evaluate(Dictator(3, 1), [-1, 1, -1]) == 1
    with pytest.raises(ValueError, match="expected 3 items"):
        maj([1, 1])


def test_ltf_tie_resolves_plus_and_is_counted():
    f = LTF(0.0, (1.0, -1.0))
    assert f([1, 1]) == 1
    assert f.ties(all_configurations(2)) == 2


def test_ltf_01_domain_pass_mark():
    n = 10
    f = LTF(-0.6, (1 / n,) * n, domain="01")
    X = all_configurations(n)
    correct = (X == 1).sum(axis=1)
    np.testing.assert_array_equal(f(X), np.where(correct >= 6, 1, -1))


@pytest.mark.parametrize("n", [1, 3, 5, 7, 9])
def test_majority_equals_ltf(n):
    np.testing.assert_array_equal(Majority(n).truth_table(), Majority(n).as_ltf().truth_table())


def test_property_examples():
    r = check_properties(Majority(3))
    assert all([r.monotone, r.odd, r.unanimous, r.symmetric, r.transitive_symmetric])
    r = check_properties(Constant(3, 1))
    assert r.monotone and not r.odd and not r.unanimous
    assert "odd" in r.witnesses and "unanimous" in r.witnesses
    r = check_properties(Dictator(3, 0))
    assert r.monotone and r.odd and r.unanimous and not r.symmetric
    x, perm = r.witnesses["symmetric"]
    f = Dictator(3, 0)
    assert f(x) != f(np.asarray(x)[perm])


def test_transitive_but_not_symmetric():
    # +1 when two cyclically adjacent items are both +1
    n = 4
    X = all_configurations(n)
    t = np.where(np.any((X == 1) & (np.roll(X, 1, axis=1) == 1), axis=1), 1, -1)
    f = TruthTable(n, t)
    r = check_properties(f)
    assert r.transitive_symmetric and not r.symmetric
    for k in range(n):
        np.testing.assert_array_equal(f(np.roll(X, k, axis=1)), f(X))


def test_mays_theorem_n3():
    keep = []
    for code in range(256):
        t = np.where((code >> np.arange(8)) & 1, 1, -1)
        r = check_properties(TruthTable(3, t))
        if r.monotone and r.odd and r.symmetric:
            keep.append(t)
    assert len(keep) == 1
    np.testing.assert_array_equal(keep[0], Majority(3).truth_table())


def brute_monotone(f):
    X = all_configurations(f.n)
    y = f(X)
    for a, b in itertools.product(range(len(X)), repeat=2):
        if np.all(X[a] <= X[b]) and y[a] > y[b]:
            return False
    return True


@settings(max_examples=60, deadline=None)
@given(tables)
def test_flags_match_brute_force(f):
    r = check_properties(f)
    X = all_configurations(f.n)
    assert r.monotone == brute_monotone(f) == is_monotone(f)
    assert r.odd == bool(np.all(f(-X) == -f(X)))
    perms = list(itertools.permutations(range(f.n)))
    autos = [p for p in perms if np.array_equal(f(X[:, list(p)]), f(X))]
    assert r.symmetric == (len(autos) == len(perms))
    reach = {p[0] for p in autos}
    assert r.transitive_symmetric == (len(reach) == f.n or f.n == 1)
    if r.symmetric:
        assert r.transitive_symmetric


def test_transitive_sampled_regime():
    r = check_properties(Majority(9))
    assert r.symmetric and r.transitive_symmetric
    r = check_properties(Dictator(9, 2))
    assert not r.transitive_symmetric and not r.transitive_exhaustive


def test_monotone_count_n3():
    assert len(monotone_functions(3)) == 20
    assert len(monotone_functions(2)) == 6


@given(tables)
def test_json_round_trip(f):
    g = from_json(f.to_json())
    np.testing.assert_array_equal(g.truth_table(), f.truth_table())


@pytest.mark.parametrize("f", [LTF(-0.6, (0.2,) * 5, "01"), Majority(5), Dictator(4, 3),
                               Constant(2, -1), max_function(3)])
def test_json_round_trip_variants(f):
    g = from_json(f.to_json())
    assert g.kind == f.kind
    np.testing.assert_array_equal(g.truth_table(), f.truth_table())


def test_truth_table_validation():
    with pytest.raises(ValueError, match="needs 8"):
        TruthTable(3, [1] * 7)
    with pytest.raises(ValueError, match="odd"):
        Majority(4)


def test_equivalence_class_examples():
    model = IsingModel.from_edges(3, [(0, 1), (0, 2)], 1.0)
    classes = equivalence_classes(model, 0)
    zero = [c for c in classes if abs(c.energy) < 1e-12]
    assert len(zero) == 1
    assert sorted(map(tuple, zero[0].members)) == [(-1, 1), (1, -1)]
    iso = IsingModel.from_edges(2, [], [], xi=[0.4, 0.0])
    classes = equivalence_classes(iso, 0)
    assert len(classes) == 1 and classes[0].energy == pytest.approx(0.4)
    generic = IsingModel.from_edges(4, [(0, 1), (0, 2), (0, 3)], [1.0, 2.1, 4.3])
    assert all(len(c.members) == 1 for c in equivalence_classes(generic, 0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_probability_constant_and_monotone_in_energy(seed):
    rng = np.random.default_rng(seed)
    k = 4
    theta = rng.choice([-1.0, 0.5, 1.0], size=k)
    model = IsingModel.from_edges(k + 1, [(0, j) for j in range(1, k + 1)], theta,
                                  xi=rng.normal(size=k + 1))
    classes = equivalence_classes(model, 0)
    probs = [c.prob for c in classes]
    assert probs == sorted(probs)
    for c in classes:
        for conf in c.members:
            x = np.concatenate([[1], conf])
            assert conditional_probs(model, x).probs[0, 0] == pytest.approx(c.prob, abs=1e-12)
            assert energy_ltf(model, 0, x) == pytest.approx(c.energy)
