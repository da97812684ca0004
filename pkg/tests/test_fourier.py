import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingfourier.core import all_configurations, items_of, mask_of
from isingfourier.decision import LTF, Constant, Dictator, Majority, TruthTable, max_function
from isingfourier.fourier import (
    ClampWarning, FourierSpectrum, Product, Pseudo, covariance, empirical_spectrum,
    exact_spectrum, generic_spectrum, moments, phi, plancherel_check, reconstruct, uniform,
)
from isingfourier.ising import IsingModel, exact_sample, joint_conditional_probs

probs = st.floats(0.05, 0.95)


def random_table(n, rng):
    return TruthTable(n, rng.choice([-1, 1], size=1 << n))


def test_phi_examples():
    assert phi(1, 0.5) == 1.0 and phi(-1, 0.5) == -1.0
    assert float(phi(1, 0.8)) == pytest.approx(0.5)
    assert float(phi(-1, 0.8)) == pytest.approx(-2.0)


@given(probs)
def test_phi_standardised(p):
    vals = np.array([phi(1, p), phi(-1, p)])
    w = np.array([p, 1 - p])
    assert w @ vals == pytest.approx(0.0, abs=1e-12)
    assert w @ vals**2 == pytest.approx(1.0, abs=1e-12)
    assert vals[0] == pytest.approx(math.sqrt((1 - p) / p))
    assert vals[1] == pytest.approx(-math.sqrt(p / (1 - p)))


def test_phi_clamps_with_warning():
    with pytest.warns(ClampWarning):
        v = phi(1, 1.0)
    assert np.isfinite(v)


def test_uniform_examples():
    s = exact_spectrum(max_function(2))
    assert [s[k] for k in range(4)] == pytest.approx([0.5, 0.5, 0.5, -0.5], abs=1e-15)
    s = exact_spectrum(Majority(3))
    expect = {0b001: 0.5, 0b010: 0.5, 0b100: 0.5, 0b111: -0.5}
    for k in range(8):
        assert s[k] == pytest.approx(expect.get(k, 0.0), abs=1e-15)


def test_moment_examples():
    assert moments(exact_spectrum(Majority(3))) == pytest.approx((0.0, 1.0))
    mean, var = moments(exact_spectrum(max_function(2)))
    assert mean == pytest.approx(0.5) and var == pytest.approx(0.75)
    s = exact_spectrum(Majority(3), [0.3, 0.6, 0.8])
    assert covariance(s, s) == pytest.approx(moments(s)[1])


def test_plancherel_examples():
    assert plancherel_check(Majority(3), Majority(3)).residual < 1e-12
    r = plancherel_check(Majority(3), Dictator(3, 0))
    assert r.direct == pytest.approx(0.5) and r.residual < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_plancherel_random_tables(seed):
    rng = np.random.default_rng(seed)
    f, g = random_table(5, rng), random_table(5, rng)
    p = rng.uniform(0.05, 0.95, 5)
    assert plancherel_check(f, g).residual < 1e-10
    assert plancherel_check(f, g, p).residual < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10**6))
def test_orthonormal_basis(n, seed):
    rng = np.random.default_rng(seed)
    meas = Product(rng.uniform(0.05, 0.95, n))
    X = all_configurations(n)
    Phi = meas.phi_matrix(X)
    w = meas.weights()
    masks = rng.choice(1 << n, size=min(1 << n, 12), replace=False)
    cols = np.stack([np.prod(Phi[:, list(items_of(int(s)))], axis=1) for s in masks], axis=1)
    gram = cols.T @ (w[:, None] * cols)
    np.testing.assert_allclose(gram, np.eye(len(masks)), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10**6))
def test_reconstruction_and_parseval(n, seed):
    rng = np.random.default_rng(seed)
    f = random_table(n, rng)
    p = rng.uniform(0.05, 0.95, n)
    s = exact_spectrum(f, p)
    X = all_configurations(n)
    np.testing.assert_allclose(reconstruct(s, p, X), f(X), atol=1e-9)
    assert sum(v * v for v in s.coefficients.values()) == pytest.approx(1.0, abs=1e-9)
    assert s[0] == pytest.approx(float(Product(p).weights() @ f(X)), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 7), st.integers(0, 10**6))
def test_butterfly_matches_generic(n, seed):
    rng = np.random.default_rng(seed)
    f = random_table(n, rng)
    p = rng.uniform(0.05, 0.95, n)
    a, b = exact_spectrum(f, p), generic_spectrum(f, Product(p))
    for k in range(1 << n):
        assert a[k] == pytest.approx(b[k], abs=1e-12)


def test_half_bias_equals_uniform():
    rng = np.random.default_rng(0)
    f = random_table(6, rng)
    a, b = exact_spectrum(f, [0.5] * 6), exact_spectrum(f)
    assert a.coefficients == b.coefficients
    assert a.measure_tag == "uniform"


def test_empirical_matches_exact_product():
    p = np.array([0.3, 0.55, 0.8])
    meas = Product(p)
    m = 100_000
    X = meas.sample(m, 0)
    f = Majority(3)
    emp = empirical_spectrum(f, X, p, max_order=3)
    ex = exact_spectrum(f, meas)
    Phi = meas.phi_matrix(all_configurations(3))
    for mask in range(8):
        bound = 3 / math.sqrt(m) * np.abs(np.prod(Phi[:, list(items_of(mask))], axis=1)).max()
        assert abs(emp[mask] - ex[mask]) <= bound


def test_empirical_trivial_cases():
    p = np.array([0.4, 0.7])
    X = Product(p).sample(5000, 1)
    s = empirical_spectrum(Constant(2), X, p, max_order=1)
    assert s[0] == 1.0
    assert np.all(np.abs(s.order1()) < 0.1)
    x = np.array([[1, -1]])
    s = empirical_spectrum(Dictator(2, 0), x, p, max_order=2)
    assert s[0b11] == pytest.approx(phi(1, 0.4) * phi(-1, 0.7))
    with pytest.raises(ValueError, match="do not match"):
        empirical_spectrum(Constant(2), X, np.full((3, 2), 0.5))


def test_empirical_rate():
    rng = np.random.default_rng(2024)
    p = np.array([0.3, 0.6, 0.75])
    meas, f = Product(p), Majority(3)
    ex = exact_spectrum(f, meas)
    def rms(m):
        errs = []
        for _ in range(40):
            s = empirical_spectrum(f, meas.sample(m, rng), p, max_order=3)
            errs.append(sum((s[k] - ex[k]) ** 2 for k in range(8)))
        return math.sqrt(np.mean(errs))
    ratio = rms(1000) / rms(4000)
    assert 1.5 <= ratio <= 2.5


def test_empirical_against_both_oracles():
    # independent items: the pseudo-measure is the product measure, so both oracles agree
    model = IsingModel.from_edges(3, [], [], xi=[0.4, -0.3, 0.1])
    data = exact_sample(model, 50_000, seed=3)
    emp = empirical_spectrum(Majority(3), data, joint_conditional_probs(model, data.rows), 3)
    pseudo = exact_spectrum(Majority(3), model)
    prod = exact_spectrum(Majority(3), 1 / (1 + np.exp(-2 * model.thresholds)))
    for k in range(8):
        assert pseudo[k] == pytest.approx(prod[k], abs=1e-12)
        assert emp[k] == pytest.approx(prod[k], abs=0.05)
    # coupled items: both gaps are computed and finite
    coupled = IsingModel.from_edges(3, [(0, 1), (1, 2)], 0.4)
    data = exact_sample(coupled, 20_000, seed=4)
    emp = empirical_spectrum(Majority(3), data, joint_conditional_probs(coupled, data.rows), 1)
    ps = exact_spectrum(Majority(3), coupled)
    assert np.all(np.isfinite(emp.order1() - ps.order1()))


def test_pseudo_spectrum_parseval():
    model = IsingModel.from_edges(4, [(0, 1), (2, 3)], [0.8, -0.5], xi=[0.2, 0, 0, -0.3])
    s = exact_spectrum(LTF(0.1, (1, 1, 1, 1)), Pseudo(model))
    assert s.measure_tag == "pseudo" and np.isfinite(s[0])
    assert s[0] == pytest.approx(float(Pseudo(model).weights() @ LTF(0.1, (1, 1, 1, 1)).truth_table()))


def test_spectrum_export_round_trip(tmp_path):
    s = exact_spectrum(Majority(3))
    text = s.to_csv(tmp_path / "s.csv")
    lines = text.splitlines()
    assert lines[0] == "subset_mask,subset,order,coefficient"
    assert len(lines) == 1 + 4
    back = FourierSpectrum.from_dict(__import__("json").loads(s.to_json()))
    for k in range(8):
        assert back[k] == pytest.approx(s[k], abs=1e-15)
    assert (tmp_path / "s.csv").read_text() == text


def test_mismatched_moments_rejected():
    a = exact_spectrum(Majority(3))
    b = exact_spectrum(Majority(3), [0.2, 0.5, 0.5])
    with pytest.raises(ValueError):
        covariance(a, b)


def test_order_limited_matches_full():
    p = np.array([0.2, 0.6, 0.7, 0.4])
    X = Product(p).sample(500, 5)
    f = TruthTable(4, np.random.default_rng(3).choice([-1, 1], 16))
    s1 = empirical_spectrum(f, X, p, 1)
    s2 = empirical_spectrum(f, X, p, 2)
    for k, v in s1.coefficients.items():
        assert s2[k] == v
    assert len(s2.coefficients) == 1 + 4 + 6
