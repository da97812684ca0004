"""Nodewise L1 logistic pseudo-likelihood estimation of an Ising model.

Each item is regressed on all others. The response is ``(x_i + 1) / 2``
and the predictors are the remaining spins, so for data from a ``pm1``
joint model with parameters ``(xi, theta)`` the node logit is
``2 xi_i + sum_j 2 theta_ij x_j``. :func:`symmetrize` halves the fitted
coefficients to return a joint model on that scale.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import expit

from .core import Dataset, Graph, atomic_write_text
from .decision import LTF, Constant, DecisionFunction, Dictator, Majority, is_monotone
from .fourier import FourierSpectrum, empirical_spectrum
from .influence import InfluenceProfile, empirical_influence
from .ising import ConditionalProbs, IsingModel, joint_conditional_probs

TOL = 1e-7
MAX_SWEEPS = 10_000
N_LAMBDA = 50
LAMBDA_RATIO = 0.01
RIDGE = 1e-4


# --- solvers -------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True, nogil=True)
def _cd_logistic(X, y, c, b, lam, tol, max_sweeps):
    """MM coordinate descent for the L1 logistic loss with an unpenalised intercept.

    Each coordinate minimises the quadratic majoriser with curvature
    ``mean(x_j**2) / 4``. Sweeps alternate between the active set and a
    full pass; convergence needs a full pass with every change below ``tol``.
    """
    m, q = X.shape
    h = np.zeros(q)
    for j in range(q):
        s = 0.0
        for t in range(m):
            s += X[t, j] * X[t, j]
        h[j] = 0.25 * s / m
    eta = np.full(m, c)
    for j in range(q):
        if b[j] != 0.0:
            for t in range(m):
                eta[t] += b[j] * X[t, j]
    sweeps = 0
    converged = False
    full = True
    while sweeps < max_sweeps:
        sweeps += 1
        g = 0.0
        for t in range(m):
            g += _sigmoid(eta[t]) - y[t]
        d = -4.0 * g / m
        c += d
        for t in range(m):
            eta[t] += d
        maxd = abs(d)
        for j in range(q):
            if h[j] == 0.0 or (not full and b[j] == 0.0):
                continue
            g = 0.0
            for t in range(m):
                g += (_sigmoid(eta[t]) - y[t]) * X[t, j]
            g /= m
            new = _soft(b[j] - g / h[j], lam / h[j])
            d = new - b[j]
            if d != 0.0:
                b[j] = new
                for t in range(m):
                    eta[t] += d * X[t, j]
                if abs(d) > maxd:
                    maxd = abs(d)
        if maxd < tol:
            if full:
                converged = True
                break
            full = True
        else:
            full = False
    return c, b, sweeps, converged


@njit(cache=True, nogil=True)
def _cd_gaussian(X, y, b, lam, tol, max_sweeps):
    """Coordinate descent for ``||y - X b||**2 / (2m) + lam ||b||_1``."""
    m, q = X.shape
    s = np.zeros(q)
    for j in range(q):
        for t in range(m):
            s[j] += X[t, j] * X[t, j]
        s[j] /= m
    r = y.copy()
    for j in range(q):
        if b[j] != 0.0:
            for t in range(m):
                r[t] -= b[j] * X[t, j]
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        maxd = 0.0
        for j in range(q):
            if s[j] == 0.0:
                continue
            z = 0.0
            for t in range(m):
                z += X[t, j] * r[t]
            z = z / m + s[j] * b[j]
            new = _soft(z, lam) / s[j]
            d = new - b[j]
            if d != 0.0:
                b[j] = new
                for t in range(m):
                    r[t] -= d * X[t, j]
                if abs(d) > maxd:
                    maxd = abs(d)
        if maxd < tol:
            converged = True
            break
    return b, sweeps, converged


def lasso_ls(X, y, lam: float, tol: float = TOL, max_sweeps: int = MAX_SWEEPS):
    """Least-squares lasso without intercept; returns ``(coef, converged)``."""
    X = np.ascontiguousarray(X, dtype=float)
    b, _, ok = _cd_gaussian(X, np.asarray(y, dtype=float), np.zeros(X.shape[1]), float(lam),
                            tol, max_sweeps)
    return b, bool(ok)


# --- node fits ----------------------------------------------------------------------

def _node_design(data, i):
    X = data.rows if isinstance(data, Dataset) else np.asarray(data)
    y = (X[:, i] > 0).astype(float)
    P = np.ascontiguousarray(np.delete(X, i, axis=1), dtype=float)
    return P, y


def _logit(p):
    p = min(max(p, 1e-9), 1 - 1e-9)
    return math.log(p / (1 - p))


@dataclass
class NodeFit:
    """Penalised logistic fit of one item on all others (logit scale).

    ``coef`` has length ``n`` with a structural zero at ``item``.
    """

    item: int
    intercept: float
    coef: np.ndarray
    lam: float
    converged: bool
    sweeps: int
    degenerate: bool = False
    ebic: float = float("nan")
    path: list = field(default_factory=list)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coef)

    def logits(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coef

    def to_dict(self) -> dict:
        return {
            "item": self.item, "intercept": self.intercept, "coef": self.coef.tolist(),
            "lambda": self.lam, "ebic": self.ebic, "converged": self.converged,
            "sweeps": self.sweeps, "degenerate": self.degenerate,
            "path": [{"lambda": l, "ebic": e, "k": k} for l, e, k in self.path],
        }


def _expand(i, n, b):
    full = np.zeros(n)
    full[np.arange(n) != i] = b
    return full


def _degenerate_fit(i, n, y, lam):
    return NodeFit(i, _logit(float(y.mean())), np.zeros(n), lam, True, 0, degenerate=True)


def fit_node_lasso(data, i: int, lam: float, warm: NodeFit | None = None,
                   tol: float = TOL, max_sweeps: int = MAX_SWEEPS) -> NodeFit:
    """Minimise ``mean(-y g + log(1 + e^g)) + lam ||b||_1`` for item ``i``."""
    if lam <= 0:
        raise ValueError("the penalty must be positive")
    P, y = _node_design(data, i)
    n = P.shape[1] + 1
    if y.min() == y.max():
        return _degenerate_fit(i, n, y, lam)
    if warm is not None:
        c0, b0 = warm.intercept, np.delete(warm.coef, i).copy()
    else:
        c0, b0 = _logit(float(y.mean())), np.zeros(n - 1)
    c, b, sweeps, ok = _cd_logistic(P, y, float(c0), b0, float(lam), tol, max_sweeps)
    return NodeFit(i, float(c), _expand(i, n, b), float(lam), bool(ok), int(sweeps))


def node_objective(data, fit: NodeFit) -> float:
    P, y = _node_design(data, fit.item)
    g = fit.intercept + P @ np.delete(fit.coef, fit.item)
    return float(np.mean(np.logaddexp(0, g) - y * g) + fit.lam * np.abs(fit.coef).sum())


def optimality_residual(data, fit: NodeFit) -> float:
    """Largest violation of the subgradient conditions at ``fit``."""
    P, y = _node_design(data, fit.item)
    b = np.delete(fit.coef, fit.item)
    r = expit(fit.intercept + P @ b) - y
    g = P.T @ r / len(y)
    viol = np.where(b != 0, np.abs(g + fit.lam * np.sign(b)), np.maximum(np.abs(g) - fit.lam, 0))
    return float(max(abs(r.mean()), viol.max(initial=0.0)))


def node_loglik(data, fit: NodeFit) -> float:
    """Unpenalised pseudo-log-likelihood of item ``fit.item`` summed over rows."""
    P, y = _node_design(data, fit.item)
    g = fit.intercept + P @ np.delete(fit.coef, fit.item)
    return float(np.sum(y * g - np.logaddexp(0, g)))


def lambda_max(data, i: int) -> float:
    P, y = _node_design(data, i)
    return float(np.max(np.abs(P.T @ (y - y.mean())) / len(y), initial=0.0))


def lambda_grid(data, i: int, count: int = N_LAMBDA, ratio: float = LAMBDA_RATIO) -> np.ndarray:
    top = lambda_max(data, i)
    if top <= 0:
        top = 1e-3
    return np.geomspace(top, ratio * top, count)


def ebic(loglik: float, k: int, m: int, n: int, gamma: float) -> float:
    return -2.0 * loglik + k * math.log(m) + 2.0 * gamma * k * math.log(max(n - 1, 1))


def select_penalty_ebic(data, i: int, gamma: float = 0.25, lam_grid=None) -> tuple[NodeFit, list]:
    """Fit the whole path with warm starts and keep the EBIC minimiser.

    The returned path lists ``(lambda, ebic, k)``; ties go to the larger
    penalty.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    grid = lambda_grid(data, i) if lam_grid is None else np.sort(np.asarray(lam_grid, float))[::-1]
    if len(grid) == 0:
        raise ValueError("the lambda grid is empty")
    m, n = (data.rows if isinstance(data, Dataset) else np.asarray(data)).shape
    best = None
    path = []
    warm = None
    for lam in grid:
        fit = fit_node_lasso(data, i, float(lam), warm)
        if fit.degenerate:
            fit.ebic = 0.0
            fit.path = [(float(lam), 0.0, 0)]
            return fit, fit.path
        warm = fit
        k = int(np.count_nonzero(fit.coef))
        fit.ebic = ebic(node_loglik(data, fit), k, m, n, gamma)
        path.append((float(lam), fit.ebic, k))
        if best is None or fit.ebic < best.ebic:
            best = fit
    best.path = path
    return best, path


# --- network -----------------------------------------------------------------------------

def combine_rule(B, rule: str = "and") -> np.ndarray:
    """Symmetrise a matrix of directed estimates.

    ``and`` keeps an edge only when both directions are nonzero, ``or``
    when either is; kept edges get the average of the two values.
    """
    B = np.asarray(B, dtype=float)
    avg = 0.5 * (B + B.T)
    nz, nzt = B != 0, B.T != 0
    if rule == "and":
        keep = nz & nzt
    elif rule == "or":
        keep = nz | nzt
    else:
        raise ValueError(f"unknown rule {rule!r}")
    out = np.where(keep, avg, 0.0)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass
class NodewiseFit:
    nodes: list
    gamma: float
    rule: str
    model: IsingModel

    @property
    def n(self) -> int:
        return len(self.nodes)

    def directed(self) -> np.ndarray:
        return np.vstack([f.coef for f in self.nodes])

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "rule": self.rule, "model": self.model.to_dict(),
                "nodes": [f.to_dict() for f in self.nodes]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def edges_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "weight"])
        th = self.model.interactions
        for i, j in self.model.graph.edges:
            w.writerow([i + 1, j + 1, repr(float(th[i, j]))])
        text = buf.getvalue()
        if path is not None:
            atomic_write_text(path, text)
        return text


def symmetrize(fits, rule: str = "and", gamma: float = float("nan")) -> NodewiseFit:
    """Joint ``pm1`` model from node fits: ``theta = rule(B) / 2`` and ``xi_i = c_i / 2``."""
    nodes = list(fits)
    B = np.vstack([f.coef for f in nodes])
    theta = combine_rule(B, rule) / 2.0
    xi = np.array([f.intercept for f in nodes]) / 2.0
    model = IsingModel(Graph.from_adjacency(theta != 0), xi, theta, "pm1")
    return NodewiseFit(nodes, gamma, rule, model)


def fit_network(data, gamma: float = 0.25, rule: str = "and", threads: int = 1) -> NodewiseFit:
    """EBIC-selected node fits for every item, symmetrised."""
    n = data.n if isinstance(data, Dataset) else np.asarray(data).shape[1]
    run = lambda i: select_penalty_ebic(data, i, gamma)[0]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            nodes = list(ex.map(run, range(n)))
    else:
        nodes = [run(i) for i in range(n)]
    return symmetrize(nodes, rule, gamma)


def predict_probs(source, data, nodewise: bool = False) -> ConditionalProbs:
    """``P(X_i = +1 | x_rest)`` for every row.

    ``source`` is an :class:`IsingModel` (joint scale) or a
    :class:`NodewiseFit`; with ``nodewise=True`` the raw node logits are
    used instead of the symmetrised model.
    """
    X = data.rows if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data))
    if isinstance(source, IsingModel):
        return joint_conditional_probs(source, X, provenance="model")
    if nodewise:
        g = np.column_stack([f.logits(X) for f in source.nodes])
        return ConditionalProbs.from_raw(expit(g), provenance="nodewise")
    return joint_conditional_probs(source.model, X, provenance="estimated")


# --- desparsified lasso --------------------------------------------------------------------

@dataclass
class DesparsifiedFit:
    item: int
    beta_lasso: np.ndarray
    """``(intercept, coef without the item)``."""
    beta: np.ndarray
    theta_hat: np.ndarray
    variance: np.ndarray
    """Diagonal of ``Theta Sigma Theta^T``."""
    inverse_error: float
    """``max |Sigma Theta - I|``."""
    ridge_fallback: bool = False

    def as_full(self) -> tuple[float, np.ndarray]:
        """Intercept and length-``n`` coefficient vector of the corrected fit."""
        n = self.beta.size
        return float(self.beta[0]), _expand(self.item, n, self.beta[1:])


def _nodewise_inverse(Xw, scale: float):
    """Approximate inverse of ``Xw^T Xw / m`` by nodewise lasso regressions."""
    m, q = Xw.shape
    Sigma = Xw.T @ Xw / m
    Theta = np.zeros((q, q))
    fallback = False
    eig = np.linalg.eigvalsh(Sigma)
    if m > q and eig[0] <= 1e-10 * max(eig[-1], 1e-300):
        # exactly collinear columns: nodewise regressions cannot repair this
        return np.linalg.solve(Sigma + RIDGE * np.eye(q), np.eye(q)), Sigma, True
    for j in range(q):
        others = np.arange(q) != j
        lam = scale * math.sqrt(Sigma[j, j])
        gam, ok = lasso_ls(Xw[:, others], Xw[:, j], lam)
        resid = Xw[:, j] - Xw[:, others] @ gam
        tau2 = float(resid @ resid / m + lam * np.abs(gam).sum())
        if not ok or not np.isfinite(tau2) or tau2 < 1e-8:
            fallback = True
            Theta[j] = np.linalg.solve(Sigma + RIDGE * np.eye(q), np.eye(q)[j])
            continue
        row = np.zeros(q)
        row[j] = 1.0
        row[others] = -gam
        Theta[j] = row / tau2
    return Theta, Sigma, fallback


def desparsify(fit: NodeFit, data, lam_scale: float | None = None) -> DesparsifiedFit:
    """One-step correction ``beta - Theta grad`` of a node fit.

    ``grad`` is the gradient of the mean logistic loss and ``Theta`` the
    nodewise-lasso inverse of the weighted Gram matrix, with penalty
    ``lam_scale * sd_j`` (default ``sqrt(log(n) / m)``).
    """
    i = fit.item
    P, y = _node_design(data, i)
    m = len(y)
    Xt = np.column_stack([np.ones(m), P])
    beta = np.concatenate([[fit.intercept], np.delete(fit.coef, i)])
    p = expit(Xt @ beta)
    Xw = Xt * np.sqrt(p * (1 - p))[:, None]
    if lam_scale is None:
        lam_scale = math.sqrt(math.log(Xt.shape[1]) / m)
    Theta, Sigma, fallback = _nodewise_inverse(Xw, lam_scale)
    grad = Xt.T @ (p - y) / m
    corrected = beta - Theta @ grad
    var = np.einsum("ij,jk,ik->i", Theta, Sigma, Theta)
    err = float(np.max(np.abs(Sigma @ Theta.T - np.eye(len(beta)))))
    return DesparsifiedFit(i, beta, corrected, Theta, var, err, fallback)


# --- pipeline ----------------------------------------------------------------------------------

@dataclass
class PipelineResult:
    fit: NodewiseFit
    probs: ConditionalProbs
    spectrum: FourierSpectrum
    influence: InfluenceProfile
    degenerate_items: list


def influence_from_spectrum(spec: FourierSpectrum, probs: ConditionalProbs, fx) -> InfluenceProfile:
    """``f^(i) / sigma_i`` with ``sigma_i`` averaged over rows, and the bound ``sd(f) / (sigma_i sqrt(n))``."""
    sigma = probs.sigma.mean(axis=0)
    values = np.clip(spec.order1() / sigma, 0.0, None)
    sd = float(np.std(fx))
    bounds = sd / (sigma * math.sqrt(spec.n))
    return InfluenceProfile(values, bounds, spec.measure_tag)


def pipeline_fourier(data: Dataset, f: DecisionFunction, gamma: float = 0.25,
                     max_order: int = 2, rule: str = "and", threads: int = 1) -> PipelineResult:
    """Fit the network, predict conditionals and compute the empirical spectrum and influences.

    Influence uses the monotone form ``f^(i) / sigma_i``; for non-monotone
    rules the observed pivotal fraction is used instead.
    """
    stage = "fit"
    try:
        fit = fit_network(data, gamma, rule, threads)
        stage = "predict"
        probs = predict_probs(fit, data)
        stage = "spectrum"
        spec = empirical_spectrum(f, data, probs, max_order)
        stage = "influence"
        fx = f(data.rows).astype(float)
        if is_monotone_rule(f):
            prof = influence_from_spectrum(spec, probs, fx)
        else:
            sigma = probs.sigma.mean(axis=0)
            prof = InfluenceProfile(empirical_influence(f, data.rows),
                                    float(np.std(fx)) / (sigma * math.sqrt(f.n)), "empirical")
    except Exception as exc:
        raise RuntimeError(f"pipeline stage '{stage}' failed: {exc}") from exc
    return PipelineResult(fit, probs, spec, prof, data.constant_items())


def is_monotone_rule(f: DecisionFunction) -> bool:
    if isinstance(f, LTF):
        return all(w >= 0 for w in f.weights)
    if isinstance(f, (Majority, Dictator, Constant)):
        return True
    return f.n <= 20 and is_monotone(f)
