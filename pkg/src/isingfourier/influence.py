"""Item influence, its upper bound, Rousseau's maximiser and related checks."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import all_configurations, atomic_write_text, check_cap
from .decision import LTF, DecisionFunction, monotone_functions
from .fourier import FourierSpectrum, Product, Pseudo, _as_measure, exact_spectrum, moments
from .ising import IsingModel


def _flip(X, i, value):
    Y = np.array(X, copy=True)
    Y[..., i] = value
    return Y


def discrete_derivative(f: DecisionFunction, x, i: int, p: float | None = None) -> float:
    """``(f(x^{i,+}) - f(x^{i,-})) / 2``, scaled by ``sigma_i`` when ``p`` is given."""
    x = np.asarray(x)
    d = 0.5 * (f(_flip(x, i, 1)) - f(_flip(x, i, -1)))
    if p is not None:
        d *= 2.0 * np.sqrt(p * (1.0 - p))
    return float(d)


def pivotal(f: DecisionFunction, X, i: int) -> np.ndarray:
    """Boolean vector: does setting item ``i`` to each value change ``f``?"""
    X = np.atleast_2d(X)
    return f(_flip(X, i, 1)) != f(_flip(X, i, -1))


@dataclass
class InfluenceValue:
    flip: float
    fourier: float | None


def influence_flip(f: DecisionFunction, measure=None) -> np.ndarray:
    """``P(item i is pivotal)`` for every item, by enumeration."""
    check_cap(f.n, "exact influence")
    meas = _as_measure(measure, f.n)
    X = all_configurations(f.n)
    w = meas.weights()
    return np.array([float(w @ pivotal(f, X, i)) for i in range(f.n)])


def influence_fourier(spec: FourierSpectrum, sigma) -> np.ndarray:
    """``sigma_i**-2 * sum_{S contains i} f^(S)**2`` from a product-measure spectrum."""
    sigma = np.asarray(sigma, dtype=float)
    acc = np.zeros(spec.n)
    for mask, v in spec.coefficients.items():
        for i in range(spec.n):
            if mask >> i & 1:
                acc[i] += v * v
    return acc / sigma**2


def influence_exact(f: DecisionFunction, i: int, measure=None) -> InfluenceValue:
    """Influence of item ``i`` by the flip definition and, for product measures, the Fourier sum."""
    meas = _as_measure(measure, f.n)
    flip = float(influence_flip(f, meas)[i])
    if isinstance(meas, Pseudo):
        return InfluenceValue(flip, None)
    four = float(influence_fourier(exact_spectrum(f, meas), meas.sigma)[i])
    return InfluenceValue(flip, four)


def influence_bound(spec: FourierSpectrum, sigma, sd: float | None = None) -> np.ndarray:
    """``sd(f) / (sigma_i sqrt(n))`` for every item."""
    if sd is None:
        sd = float(np.sqrt(moments(spec)[1]))
    return sd / (np.asarray(sigma, dtype=float) * np.sqrt(spec.n))


@dataclass
class InfluenceProfile:
    values: np.ndarray
    bounds: np.ndarray
    measure_tag: str
    bound_factor: float = 1.0
    median_factor: float = 2.0
    flags: np.ndarray = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.bounds = np.asarray(self.bounds, dtype=float)
        med = float(np.median(self.values)) if self.values.size else 0.0
        self.flags = ((self.values > self.bound_factor * self.bounds + 1e-12)
                      & (self.values > self.median_factor * med))

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["item", "influence", "bound", "flag"])
        for i, (v, b, fl) in enumerate(zip(self.values, self.bounds, self.flags)):
            w.writerow([i + 1, repr(float(v)), repr(float(b)), int(fl)])
        text = buf.getvalue()
        if path is not None:
            atomic_write_text(path, text)
        return text

    def to_json(self) -> str:
        return json.dumps({
            "measure": self.measure_tag, "total": self.total,
            "items": [{"item": i + 1, "influence": float(v), "bound": float(b), "flag": bool(fl)}
                      for i, (v, b, fl) in enumerate(zip(self.values, self.bounds, self.flags))],
        })


def influence_profile(f: DecisionFunction, measure=None, **flag_kw) -> InfluenceProfile:
    """Exact influences with bounds and the disproportionate-item flag (product measures)."""
    meas = _as_measure(measure, f.n)
    if not isinstance(meas, Product):
        raise ValueError("the influence bound needs a product measure")
    spec = exact_spectrum(f, meas)
    return InfluenceProfile(influence_flip(f, meas), influence_bound(spec, meas.sigma),
                            meas.tag, **flag_kw)


# --- Rousseau ------------------------------------------------------------------

def rousseau_ltf(p) -> LTF:
    """``sgn(sum_i phi(x_i))``: ``a0 = -sum mu_i / sigma_i`` and ``a_i = 1 / sigma_i``."""
    meas = Product(p)
    return LTF(float(-np.sum(meas.mu / meas.sigma)), tuple(1.0 / meas.sigma))


@dataclass
class RousseauReport:
    p: np.ndarray
    objectives: np.ndarray
    """``sum_i sigma_i I_i`` for each monotone function."""
    rousseau_value: float

    @property
    def attains_max(self) -> bool:
        return bool(self.rousseau_value >= self.objectives.max() - 1e-12)


def weighted_total_influence(f: DecisionFunction, meas: Product) -> float:
    return float(meas.sigma @ influence_flip(f, meas))


def rousseau_maximality_check(p) -> RousseauReport:
    """Compare ``sgn(l_phi)`` with every monotone function on ``len(p) <= 4`` items."""
    meas = Product(p)
    objs = np.array([weighted_total_influence(g, meas) for g in monotone_functions(meas.n)])
    return RousseauReport(meas.p, objs, weighted_total_influence(rousseau_ltf(meas.p), meas))


@dataclass
class AgreementReport:
    direct: float
    formula: float


def expected_agreement(f: DecisionFunction, measure=None) -> AgreementReport:
    """Expected number of items whose value equals the decision.

    The formula route uses ``E(x_i f) = mu_i f^(empty) + sigma_i f^(i)``,
    which reduces to ``n/2 + sum_i f^(i) / 2`` under the uniform measure.
    """
    meas = _as_measure(measure, f.n)
    X = all_configurations(f.n)
    fx = f(X)
    direct = float(meas.weights() @ np.sum(X == fx[:, None], axis=1))
    spec = exact_spectrum(f, meas)
    ex = meas.mu * spec[0] + meas.sigma * spec.order1()
    return AgreementReport(direct, float(f.n / 2 + 0.5 * ex.sum()))


# --- conditional association -----------------------------------------------------

@dataclass
class AssociationReport:
    covariance: float
    criterion: float
    event_mass: float

    @property
    def agree(self) -> bool:
        return (self.covariance >= -1e-12) == (self.criterion >= 0)


def conditional_association_check(f: LTF, g: LTF, K, L, h, c, measure=None) -> AssociationReport:
    """Covariance of ``f`` and ``g`` given ``h(x_L) = c`` and the criterion ``sum_K a_i b_i sigma_i**2``.

    ``h`` receives the ``L`` columns as an ``(N, |L|)`` array and must
    return a vector.
    """
    meas = _as_measure(measure, f.n)
    K, L = list(K), list(L)
    X = all_configurations(f.n)
    w = meas.weights()
    keep = np.asarray(h(X[:, L])) == c
    mass = float(w[keep].sum())
    if mass <= 0:
        raise ValueError("the conditioning event has probability zero")
    wc = np.where(keep, w, 0.0) / mass
    fx, gx = f(X).astype(float), g(X).astype(float)
    cov = float(wc @ (fx * gx) - (wc @ fx) * (wc @ gx))
    if isinstance(meas, Product):
        var = meas.sigma**2
    else:
        probs = meas.probs(X)
        var = w @ (4.0 * probs * (1.0 - probs))
    a, b = np.asarray(f.weights), np.asarray(g.weights)
    crit = float(np.sum(a[K] * b[K] * var[K]))
    return AssociationReport(cov, crit, mass)


# --- balanced tests --------------------------------------------------------------

def equal_influence_check(model: IsingModel, f: DecisionFunction) -> float:
    """Largest pairwise influence gap under the normalised pseudo-measure.

    Requires a regular graph with one threshold value and one edge weight.
    """
    g = model.graph
    if not g.is_regular():
        deg = g.degrees().tolist()
        raise ValueError(f"graph is not regular: degrees {deg}")
    if np.ptp(model.thresholds) > 0:
        raise ValueError("thresholds are not constant")
    w = model.edge_weights()
    if w and max(w) != min(w):
        raise ValueError("edge weights are not constant")
    infl = influence_flip(f, Pseudo(model))
    return float(infl.max() - infl.min())


def empirical_influence(f: DecisionFunction, X) -> np.ndarray:
    """Fraction of observed rows in which each item is pivotal."""
    return np.array([float(np.mean(pivotal(f, X, i))) for i in range(f.n)])

