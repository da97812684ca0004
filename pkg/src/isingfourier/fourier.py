"""Uniform and p-biased Fourier analysis of decision functions.

Coefficients are indexed by subset bitmasks. Under a product measure the
full spectrum is computed with a per-coordinate butterfly in
``O(n 2**n)``; :func:`generic_spectrum` enumerates subsets directly and
works for any weighting of configurations, including the normalised
pseudo-measure of an Ising model, whose basis functions depend on the
neighbours of each item.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Dataset, all_configurations, atomic_write_text, check_cap, enumerate_subsets,
    items_of, label, order_of,
)
from .decision import DecisionFunction
from .ising import PROB_FLOOR, ConditionalProbs, IsingModel, conditional_probs, pseudo_measure

#: Coefficients smaller than this are dropped on export.
EXPORT_FLOOR = 1e-15


class ClampWarning(RuntimeWarning):
    """Probabilities outside ``(0, 1)`` were moved to the clamp bounds."""


def _clamp(p):
    p = np.asarray(p, dtype=float)
    lo, hi = PROB_FLOOR, 1.0 - PROB_FLOOR
    bad = int(np.count_nonzero((p < lo) | (p > hi)))
    if bad:
        warnings.warn(f"{bad} probabilities clamped into [{lo}, {hi}]", ClampWarning,
                      stacklevel=3)
    return np.clip(p, lo, hi)


def phi(x, p):
    """Standardised item value ``(x - mu) / sigma`` with ``mu = 2p - 1``.

    >>> round(float(phi(1, 0.8)), 12), round(float(phi(-1, 0.8)), 12)
    (0.5, -2.0)
    """
    p = _clamp(p)
    x = np.asarray(x, dtype=float)
    return (x - (2.0 * p - 1.0)) / (2.0 * np.sqrt(p * (1.0 - p)))


# --- measures --------------------------------------------------------------

class Product:
    """Product measure with ``P(X_i = +1) = p_i``."""

    def __init__(self, p, n: int | None = None):
        p = np.asarray(p, dtype=float)
        if p.ndim == 0:
            if n is None:
                raise ValueError("a scalar p needs n")
            p = np.full(n, float(p))
        self.p = _clamp(p)
        self.n = self.p.size
        self.tag = "uniform" if np.all(self.p == 0.5) else "product"

    @property
    def mu(self):
        return 2.0 * self.p - 1.0

    @property
    def sigma(self):
        return 2.0 * np.sqrt(self.p * (1.0 - self.p))

    def weights(self) -> np.ndarray:
        X = all_configurations(self.n)
        return np.prod(np.where(X > 0, self.p, 1.0 - self.p), axis=1)

    def phi_matrix(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mu) / self.sigma

    def sample(self, m: int, rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        return np.where(rng.random((m, self.n)) < self.p, 1, -1).astype(np.int8)

    def meta(self) -> dict:
        return {"measure": self.tag, "p": self.p.tolist()}


def uniform(n: int) -> Product:
    return Product(0.5, n)


class Pseudo:
    """Normalised pseudo-likelihood measure of an Ising model.

    Basis functions use the half-coupling conditional of each item given
    its neighbours, so they vary with the configuration.
    """

    tag = "pseudo"

    def __init__(self, model: IsingModel):
        self.model = model
        self.n = model.n
        self._w, self.raw_total = pseudo_measure(model)

    def weights(self) -> np.ndarray:
        return self._w

    def probs(self, X) -> np.ndarray:
        return conditional_probs(self.model, X).probs

    def phi_matrix(self, X) -> np.ndarray:
        c = conditional_probs(self.model, X)
        return (np.asarray(X, dtype=float) - c.mu) / c.sigma

    def meta(self) -> dict:
        return {"measure": self.tag, "raw_total": self.raw_total}


# --- spectra -----------------------------------------------------------------

@dataclass
class FourierSpectrum:
    """Sparse map from subset masks to coefficients."""

    n: int
    coefficients: dict
    measure_tag: str
    max_order: int
    meta: dict = field(default_factory=dict)

    def __getitem__(self, mask: int) -> float:
        return self.coefficients.get(mask, 0.0)

    def order1(self) -> np.ndarray:
        return np.array([self[1 << i] for i in range(self.n)])

    def items(self):
        return sorted(self.coefficients.items(), key=lambda kv: (order_of(kv[0]), items_of(kv[0])))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subset_mask", "subset", "order", "coefficient"])
        for mask, v in self.items():
            if abs(v) >= EXPORT_FLOOR:
                w.writerow([mask, label(mask), order_of(mask), repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            atomic_write_text(path, text)
        return text

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "measure": self.measure_tag,
            "max_order": self.max_order,
            "meta": self.meta,
            "coefficients": {str(k): float(v) for k, v in self.items()
                             if abs(v) >= EXPORT_FLOOR},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "FourierSpectrum":
        coefs = {int(k): float(v) for k, v in d["coefficients"].items()}
        return cls(int(d["n"]), coefs, d["measure"], int(d["max_order"]), d.get("meta", {}))


def _butterfly(values: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Product-measure transform of a length ``2**n`` table, indexed by mask."""
    n = p.size
    a = values.astype(float).reshape((2,) * n) if n else values.astype(float)
    for i in range(n):
        axis = n - 1 - i  # C-order reshape puts bit n-1 first
        q = p[i]
        s = 2.0 * np.sqrt(q * (1.0 - q))
        mu = 2.0 * q - 1.0
        lo = np.take(a, 0, axis=axis)   # x_i = -1
        hi = np.take(a, 1, axis=axis)   # x_i = +1
        keep = (1.0 - q) * lo + q * hi
        mult = (1.0 - q) * (-1.0 - mu) / s * lo + q * (1.0 - mu) / s * hi
        a = np.stack([keep, mult], axis=axis)
    return a.reshape(-1)


def _as_measure(measure, n):
    if measure is None or (isinstance(measure, str) and measure == "uniform"):
        return uniform(n)
    if isinstance(measure, (Product, Pseudo)):
        if measure.n != n:
            raise ValueError(f"measure is on {measure.n} items, function on {n}")
        return measure
    if isinstance(measure, IsingModel):
        return Pseudo(measure)
    return Product(measure, n)


def exact_spectrum(f: DecisionFunction, measure=None) -> FourierSpectrum:
    """Every coefficient ``E(f phi_S)`` by full enumeration.

    ``measure`` may be ``None``/``"uniform"``, a probability vector, a
    :class:`Product`, a :class:`Pseudo` or an :class:`IsingModel`.
    """
    n = f.n
    check_cap(n, "the exact spectrum")
    meas = _as_measure(measure, n)
    if isinstance(meas, Pseudo):
        return generic_spectrum(f, meas)
    coefs = _butterfly(f.truth_table(), meas.p)
    return FourierSpectrum(n, dict(enumerate(coefs.tolist())), meas.tag, n, meas.meta())


def generic_spectrum(f, measure, max_order: int | None = None) -> FourierSpectrum:
    """Subset-by-subset enumeration of ``sum_x w(x) f(x) phi_S(x)``.

    Used for non-product measures and as an independent route for product
    measures.
    """
    n = f.n
    meas = _as_measure(measure, n)
    k = n if max_order is None else max_order
    X = all_configurations(n)
    wf = meas.weights() * f(X)
    Phi = meas.phi_matrix(X)
    cols = {0: wf}
    coefs = {}
    for mask in enumerate_subsets(n, k):
        if mask:
            top = mask.bit_length() - 1
            cols[mask] = cols[mask & ~(1 << top)] * Phi[:, top]
        coefs[mask] = float(cols[mask].sum())
    return FourierSpectrum(n, coefs, meas.tag, k, meas.meta())


def _prob_matrix(probs, m, n):
    if isinstance(probs, ConditionalProbs):
        p = probs.probs
    elif isinstance(probs, Product):
        p = probs.p
    else:
        p = probs
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = np.broadcast_to(p, (m, n))
    if p.shape != (m, n):
        raise ValueError(f"probabilities of shape {p.shape} do not match data {(m, n)}")
    return _clamp(p)


def empirical_spectrum(f: DecisionFunction, data, probs, max_order: int = 2) -> FourierSpectrum:
    """``(1/m) sum_t f(x_t) prod_{i in S} phi(x_ti, p_ti)`` for ``|S| <= max_order``.

    ``probs`` is a :class:`ConditionalProbs`, an ``m x n`` matrix, or a
    length-``n`` vector (a product measure shared by all rows).
    """
    X = data.rows if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data))
    m, n = X.shape
    if f.n != n:
        raise ValueError(f"decision function has {f.n} items, data has {n}")
    p = _prob_matrix(probs, m, n)
    Phi = (X - (2.0 * p - 1.0)) / (2.0 * np.sqrt(p * (1.0 - p)))
    fx = f(X).astype(float)
    coefs = {}
    for mask in enumerate_subsets(n, max_order):
        idx = list(items_of(mask))
        coefs[mask] = float(np.mean(fx * np.prod(Phi[:, idx], axis=1)))
    return FourierSpectrum(n, coefs, "empirical", max_order, {"m": m})


def reconstruct(spec: FourierSpectrum, measure, X) -> np.ndarray:
    """``sum_S f^(S) phi_S(x)`` for each row of ``X`` under a product measure."""
    meas = _as_measure(measure, spec.n)
    Phi = meas.phi_matrix(np.atleast_2d(X))
    out = np.zeros(Phi.shape[0])
    for mask, v in spec.coefficients.items():
        out += v * np.prod(Phi[:, list(items_of(mask))], axis=1)
    return out


def _check_compatible(a: FourierSpectrum, b: FourierSpectrum):
    if a.n != b.n or a.measure_tag != b.measure_tag or a.max_order != b.max_order:
        raise ValueError("spectra differ in item count, measure or order")


def moments(spec: FourierSpectrum) -> tuple[float, float]:
    """Mean ``f^(empty)`` and variance ``sum_{S != empty} f^(S)**2``."""
    var = sum(v * v for k, v in spec.coefficients.items() if k)
    return spec[0], float(var)


def covariance(a: FourierSpectrum, b: FourierSpectrum) -> float:
    _check_compatible(a, b)
    return float(sum(v * b[k] for k, v in a.coefficients.items() if k))


@dataclass
class PlancherelResult:
    direct: float
    spectral: float

    @property
    def residual(self) -> float:
        return abs(self.direct - self.spectral)


def plancherel_check(f, g, measure=None) -> PlancherelResult:
    """``E(fg)`` by enumeration against ``sum_S f^(S) g^(S)``."""
    meas = _as_measure(measure, f.n)
    X = all_configurations(f.n)
    direct = float(np.sum(meas.weights() * f(X) * g(X)))
    sf, sg = exact_spectrum(f, meas), exact_spectrum(g, meas)
    spectral = float(sum(v * sg[k] for k, v in sf.coefficients.items()))
    return PlancherelResult(direct, spectral)
