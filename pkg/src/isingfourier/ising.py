"""Pairwise binary Markov random fields (Ising models).

Two conditional conventions coexist here and are kept apart on purpose:

* :func:`conditional_probs` uses the *half-coupling* form, in which the
  field felt by item ``i`` is ``xi_i + 0.5 * sum_j theta_ij v_j``. Its product
  over items (the pseudo-likelihood) reproduces the joint numerator
  ``exp(energy)`` exactly, which is what the pseudo-measure, the
  factorisation identity and the KL comparison need.
* :func:`joint_conditional_probs` is the full conditional of the joint
  distribution. Gibbs sampling and nodewise logistic regression live in
  this convention.

``v`` is the spin ``x`` in the ``"pm1"`` domain and ``(x + 1) / 2`` in the
``"01"`` domain; all public functions take spin vectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import expit, logsumexp

from .core import Dataset, Graph, all_configurations, as_spins, check_cap, neighborhoods

PROB_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Thresholds ``xi`` and symmetric interactions ``theta`` on a graph.

    ``domain`` fixes how spins enter the energy: ``"pm1"`` uses ``x`` and
    ``"01"`` uses ``(x + 1) / 2``.
    """

    graph: Graph
    thresholds: np.ndarray
    interactions: np.ndarray
    domain: str = "pm1"

    def __post_init__(self):
        n = self.graph.node_count
        xi = np.asarray(self.thresholds, dtype=float).reshape(-1)
        th = np.asarray(self.interactions, dtype=float)
        if xi.shape != (n,) or th.shape != (n, n):
            raise ValueError(f"parameter shapes do not match n={n}")
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(th))):
            raise ValueError("parameters must be finite")
        if not np.allclose(th, th.T, rtol=0, atol=1e-12):
            raise ValueError("interaction matrix must be symmetric")
        if np.any(np.diag(th) != 0):
            raise ValueError("interaction matrix must have a zero diagonal")
        off = (th != 0) & ~self.graph.adjacency()
        if np.any(off):
            i, j = np.argwhere(off)[0]
            raise ValueError(f"nonzero interaction ({i},{j}) is not an edge")
        if self.domain not in ("pm1", "01"):
            raise ValueError(f"unknown domain {self.domain!r}")
        xi.setflags(write=False)
        th = 0.5 * (th + th.T)
        th.setflags(write=False)
        object.__setattr__(self, "thresholds", xi)
        object.__setattr__(self, "interactions", th)

    @property
    def n(self) -> int:
        return self.graph.node_count

    @classmethod
    def from_edges(cls, n, edges, theta, xi=0.0, domain="pm1") -> "IsingModel":
        """Build from an edge list; ``theta`` is a scalar or an edge-aligned sequence."""
        g = Graph(n, tuple(tuple(e) for e in edges))
        w = np.broadcast_to(np.asarray(theta, dtype=float), (len(edges),))
        th = np.zeros((n, n))
        for (i, j), t in zip(edges, w):
            th[i, j] = th[j, i] = t
        return cls(g, np.broadcast_to(np.asarray(xi, dtype=float), (n,)).copy(), th, domain)

    @classmethod
    def from_matrix(cls, theta, xi, domain="pm1") -> "IsingModel":
        theta = np.asarray(theta, dtype=float)
        return cls(Graph.from_adjacency(theta != 0), np.asarray(xi, dtype=float), theta, domain)

    def values(self, X) -> np.ndarray:
        """Spins mapped into the model's domain."""
        X = np.asarray(X, dtype=float)
        return X if self.domain == "pm1" else 0.5 * (X + 1.0)

    def to_spin_domain(self) -> "IsingModel":
        """Equivalent ``pm1`` model (same joint distribution over configurations)."""
        if self.domain == "pm1":
            return self
        th = self.interactions
        xi = 0.5 * self.thresholds + 0.25 * th.sum(axis=1)
        return IsingModel(self.graph, xi, 0.25 * th, "pm1")

    def edge_weights(self) -> list[float]:
        return [float(self.interactions[i, j]) for i, j in self.graph.edges]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [list(e) for e in self.graph.edges],
            "theta": self.edge_weights(),
            "xi": self.thresholds.tolist(),
            "domain": self.domain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IsingModel":
        edges = [tuple(e) for e in d["edges"]]
        theta = d["theta"] if edges else []
        return cls.from_edges(int(d["n"]), edges, theta, d["xi"], d.get("domain", "pm1"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "IsingModel":
        return cls.from_dict(json.loads(text))


def incident_thresholds(theta) -> np.ndarray:
    """``-0.5 * sum_j theta_ij`` over the edges incident to each node.

    In the ``01`` domain these thresholds make the model equivalent to a
    zero-field ``pm1`` model.
    """
    return -0.5 * np.asarray(theta, dtype=float).sum(axis=1)


@dataclass
class ConditionalProbs:
    """``m x n`` matrix of ``P(X_i = +1 | x_rest)`` per observation.

    ``clamped`` counts entries moved into ``[PROB_FLOOR, 1 - PROB_FLOOR]``.
    """

    probs: np.ndarray
    provenance: str = "model"
    clamped: int = 0

    @classmethod
    def from_raw(cls, p, provenance="model") -> "ConditionalProbs":
        p = np.asarray(p, dtype=float)
        lo, hi = PROB_FLOOR, 1.0 - PROB_FLOOR
        clamped = int(np.count_nonzero((p < lo) | (p > hi)))
        return cls(np.clip(p, lo, hi), provenance, clamped)

    @property
    def mu(self) -> np.ndarray:
        return 2.0 * self.probs - 1.0

    @property
    def sigma(self) -> np.ndarray:
        return 2.0 * np.sqrt(self.probs * (1.0 - self.probs))


def _half_field(model: IsingModel, X) -> np.ndarray:
    V = model.values(X)
    return model.thresholds + 0.5 * V @ model.interactions


def conditional_probs(model: IsingModel, X, provenance="model") -> ConditionalProbs:
    """Half-coupling conditionals for every row of ``X`` (spins)."""
    X = np.atleast_2d(np.asarray(X))
    a = _half_field(model, X)
    p = expit(2.0 * a) if model.domain == "pm1" else expit(a)
    return ConditionalProbs.from_raw(p, provenance)


def conditional_prob(model: IsingModel, x, i: int) -> float:
    """``P(X_i = +1 | x_di)`` with half couplings.

    >>> m = IsingModel.from_edges(1, [], [], xi=[1.0])
    >>> round(conditional_prob(m, [1], 0), 6)
    0.880797
    """
    x = as_spins(x, model.n)
    a = model.thresholds[i] + 0.5 * model.values(x) @ model.interactions[i]
    return float(expit(2.0 * a) if model.domain == "pm1" else expit(a))


def joint_conditional_probs(model: IsingModel, X, provenance="model") -> ConditionalProbs:
    """Exact full conditionals ``P(X_i = +1 | x_rest)`` of the joint distribution."""
    X = np.atleast_2d(np.asarray(X))
    h = model.thresholds + model.values(X) @ model.interactions
    p = expit(2.0 * h) if model.domain == "pm1" else expit(h)
    return ConditionalProbs.from_raw(p, provenance)


def energy(model: IsingModel, X) -> np.ndarray:
    """``sum_i xi_i v_i + sum_{(i,j) in E} theta_ij v_i v_j`` row-wise."""
    V = model.values(np.atleast_2d(X))
    return V @ model.thresholds + 0.5 * np.einsum("ti,ij,tj->t", V, model.interactions, V)


def log_partition_function(model: IsingModel) -> float:
    check_cap(model.n, "the exact partition function (use gibbs_sample instead)")
    return float(logsumexp(energy(model, all_configurations(model.n))))


def partition_function(model: IsingModel) -> float:
    return float(np.exp(log_partition_function(model)))


def joint_probs(model: IsingModel) -> np.ndarray:
    """Probability of every configuration in :func:`all_configurations` order."""
    check_cap(model.n, "exact joint probabilities (use gibbs_sample instead)")
    e = energy(model, all_configurations(model.n))
    return np.exp(e - logsumexp(e))


def joint_prob(model: IsingModel, x) -> float:
    x = as_spins(x, model.n)
    return float(np.exp(energy(model, x)[0] - log_partition_function(model)))


def local_normalisers(model: IsingModel, X) -> np.ndarray:
    """Half-coupling normalisers ``Z_i(x_di)`` for each row and item."""
    a = _half_field(model, np.atleast_2d(X))
    if model.domain == "pm1":
        return 2.0 * np.cosh(a)
    return 1.0 + np.exp(a)


def _observed_conditionals(model: IsingModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X))
    a = _half_field(model, X)
    return np.exp(model.values(X) * a) / local_normalisers(model, X)


def pseudo_likelihood_weight(model: IsingModel, x) -> float:
    """Product of the half-coupling conditionals of the observed values."""
    x = as_spins(x, model.n)
    return float(np.prod(_observed_conditionals(model, x)))


def pseudo_measure(model: IsingModel) -> tuple[np.ndarray, float]:
    """Normalised pseudo-likelihood over all configurations and the raw total mass."""
    check_cap(model.n, "the normalised pseudo-measure")
    w = np.prod(_observed_conditionals(model, all_configurations(model.n)), axis=1)
    total = float(w.sum())
    return w / total, total


def factorisation_residual(model: IsingModel) -> float:
    """Max over ``x`` of ``|prod_i Z_i P(x_i|x_di) / Z_V**(1/n) - P(x)|``."""
    X = all_configurations(model.n)
    logz = log_partition_function(model)
    cond = _observed_conditionals(model, X)
    zi = local_normalisers(model, X)
    rebuilt = np.exp(np.sum(np.log(zi * cond), axis=1) - logz)
    return float(np.max(np.abs(rebuilt - joint_probs(model))))


@dataclass
class KLReport:
    normalized: float
    """``D(P || P_pi / total)``; nonnegative."""
    raw: float
    """``sum_x P(x) log(P(x) / P_pi(x))`` against the unnormalised product."""
    closed_form: float
    """``log Z_V - E_P[log prod_i Z_i(x_di)]`` evaluated by enumeration."""
    pseudo_total: float


def kl_divergence_oracle(model: IsingModel) -> KLReport:
    """Divergence between the joint and the pseudo-likelihood, by enumeration.

    The unnormalised ratio ``P / P_pi`` equals ``prod_i Z_i / Z_V`` pointwise,
    so ``raw == -closed_form`` up to rounding; both are reported.
    """
    X = all_configurations(model.n)
    p = joint_probs(model)
    w = np.prod(_observed_conditionals(model, X), axis=1)
    total = float(w.sum())
    nz = p > 0
    raw = float(np.sum(p[nz] * (np.log(p[nz]) - np.log(w[nz]))))
    normalized = raw + np.log(total)
    log_zprod = np.sum(np.log(local_normalisers(model, X)), axis=1)
    closed = log_partition_function(model) - float(p @ log_zprod)
    return KLReport(float(normalized), raw, closed, total)


# --- sampling ------------------------------------------------------------

@numba.njit(cache=True)
def _gibbs_chain(x, theta, xi, pm1, uniforms, burn_in, thin, m):
    n = x.shape[0]
    out = np.empty((m, n), dtype=np.int8)
    v = np.empty(n)
    for i in range(n):
        v[i] = x[i] if pm1 else 0.5 * (x[i] + 1.0)
    k = 0
    kept = 0
    total = burn_in + m * thin
    for sweep in range(total):
        for i in range(n):
            h = xi[i]
            for j in range(n):
                if theta[i, j] != 0.0:
                    h += theta[i, j] * v[j]
            if pm1:
                h *= 2.0
            p = 1.0 / (1.0 + np.exp(-h))
            if uniforms[k] < p:
                x[i] = 1
            else:
                x[i] = -1
            v[i] = x[i] if pm1 else 0.5 * (x[i] + 1.0)
            k += 1
        if sweep >= burn_in and (sweep - burn_in + 1) % thin == 0:
            out[kept, :] = x
            kept += 1
    return out


def gibbs_sample(model: IsingModel, m: int, seed=None, burn_in: int = 1000,
                 thin: int = 10) -> Dataset:
    """Single-site Gibbs sampler with sequential site order.

    One chain, started from a uniform random configuration; ``burn_in`` full
    sweeps are discarded and one row is kept every ``thin`` sweeps. The
    output is a deterministic function of ``seed``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if thin < 1 or burn_in < 0:
        raise ValueError("thin must be >= 1 and burn_in >= 0")
    rng = np.random.default_rng(seed)
    n = model.n
    x0 = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    u = rng.random((burn_in + m * thin) * n)
    rows = _gibbs_chain(x0, np.ascontiguousarray(model.interactions),
                        np.ascontiguousarray(model.thresholds),
                        model.domain == "pm1", u, burn_in, thin, m)
    return Dataset(rows, source_domain=model.domain)


def exact_sample(model: IsingModel, m: int, seed=None) -> Dataset:
    """Independent draws from the joint by inverse-CDF over all configurations."""
    p = joint_probs(model)
    rng = np.random.default_rng(seed)
    idx = rng.choice(p.size, size=m, p=p)
    return Dataset(all_configurations(model.n)[idx], source_domain=model.domain)


def exact_marginal_means(model: IsingModel) -> np.ndarray:
    return joint_probs(model) @ all_configurations(model.n).astype(float)


def neighbour_lists(model: IsingModel) -> list[frozenset]:
    return neighborhoods(model.graph)
