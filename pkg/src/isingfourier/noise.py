"""The rho-noise process, stability and decision reliability.

Each item of ``x`` is kept with probability ``(1 + rho) / 2`` and flipped
otherwise. Stability ``E f(X) f(Y)`` is available by literal enumeration
of ``(x, y)`` pairs, by applying the noise operator to the truth table, by
the spectral covariance formula under product measures, by Monte Carlo,
and, for rules that depend only on the number of ``+1`` items, exactly on
an observed dataset.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import binom

from .core import Dataset, all_configurations, atomic_write_text, check_cap
from .decision import LTF, Constant, DecisionFunction, Majority
from .fourier import Product, _as_measure, exact_spectrum

DEFAULT_RHO_GRID = tuple(round(0.1 * k, 1) for k in range(11))
DEFAULT_A0_GRID = (-0.9, -0.8, -0.7, -0.6, -0.5)


@dataclass(frozen=True)
class NoiseProcess:
    rho: float
    seed: int | None = None

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")

    @property
    def flip_prob(self) -> float:
        return 0.5 * (1.0 - self.rho)

    def apply(self, X, rng=None) -> np.ndarray:
        rng = np.random.default_rng(self.seed if rng is None else rng)
        X = np.asarray(X)
        flip = rng.random(X.shape) < self.flip_prob
        return np.where(flip, -X, X).astype(np.int8)


def apply_noise(x, proc: NoiseProcess) -> np.ndarray:
    return proc.apply(x)


# --- item level --------------------------------------------------------------------

@dataclass
class NoisyMoments:
    true_score: np.ndarray
    sigma_rho: np.ndarray
    reliability: np.ndarray


def noisy_moments(p, rho: float) -> NoisyMoments:
    meas = Product(p)
    mu = meas.mu
    s_rho = np.sqrt(1.0 - rho**2 * mu**2)
    return NoisyMoments(rho * mu, s_rho, rho * meas.sigma / s_rho)


def item_reliability(p, rho: float) -> np.ndarray:
    """``cor(X_i, Y_i) = rho sigma_i / sigma_i^rho``."""
    return noisy_moments(p, rho).reliability


@dataclass
class TrueScoreReport:
    error_mean: np.ndarray
    error_corr: np.ndarray
    tolerance: float

    @property
    def ok(self) -> bool:
        return bool(np.all(np.abs(self.error_mean) <= self.tolerance)
                    and np.all(np.abs(np.nan_to_num(self.error_corr)) <= self.tolerance))


def true_score_criteria_check(p, rho: float, m: int, seed=None) -> TrueScoreReport:
    """Empirical ``E(Y_i - rho x_i)`` and ``cor(Y_i - rho x_i, rho X_i)``.

    The correlation is reported as ``sign(rho) cor(e, X)`` so that it stays
    defined at ``rho = 0``; it is ``nan`` for items with no error variance.
    """
    rng = np.random.default_rng(seed)
    meas = Product(p)
    X = meas.sample(m, rng).astype(float)
    Y = NoiseProcess(rho).apply(X, rng).astype(float)
    e = Y - rho * X
    sign = 1.0 if rho >= 0 else -1.0
    corr = np.full(meas.n, np.nan)
    for i in range(meas.n):
        if e[:, i].std() > 0 and X[:, i].std() > 0:
            corr[i] = sign * np.corrcoef(e[:, i], X[:, i])[0, 1]
    return TrueScoreReport(e.mean(axis=0), corr, 4.0 / math.sqrt(m))


# --- stability ---------------------------------------------------------------------

def noise_operator(f: DecisionFunction, rho: float) -> np.ndarray:
    """``E(f(Y) | X = x)`` for every configuration, indexed like the truth table."""
    n = f.n
    check_cap(n, "the noise operator")
    a = f.truth_table().astype(float).reshape((2,) * n)
    keep, flip = 0.5 * (1 + rho), 0.5 * (1 - rho)
    for axis in range(n):
        lo, hi = np.take(a, 0, axis=axis), np.take(a, 1, axis=axis)
        a = np.stack([keep * lo + flip * hi, flip * lo + keep * hi], axis=axis)
    return a.reshape(-1)


def noise_kernel(n: int, rho: float) -> np.ndarray:
    """``P(Y = y | X = x)`` as a ``2**n x 2**n`` matrix."""
    if n > 12:
        raise ValueError("the pair kernel is limited to n <= 12")
    k1 = np.array([[0.5 * (1 + rho), 0.5 * (1 - rho)],
                   [0.5 * (1 - rho), 0.5 * (1 + rho)]])
    K = np.ones((1, 1))
    for _ in range(n):
        K = np.kron(k1, K)  # item 0 ends up as the fastest-varying bit
    return K


def stability_enumeration(f: DecisionFunction, rho: float, measure=None) -> float:
    """Sum of ``pi(x) P(y | x) f(x) f(y)`` over all pairs."""
    meas = _as_measure(measure, f.n)
    t = f.truth_table().astype(float)
    return float((meas.weights() * t) @ noise_kernel(f.n, rho) @ t)


def stability_operator(f: DecisionFunction, rho: float, measure=None) -> float:
    meas = _as_measure(measure, f.n)
    return float(meas.weights() @ (f.truth_table() * noise_operator(f, rho)))


def noisy_p(p, rho: float) -> np.ndarray:
    """Marginal ``P(Y_i = +1) = (1 + rho mu_i) / 2``."""
    return 0.5 * (1.0 + rho * (2.0 * np.asarray(p, dtype=float) - 1.0))


@dataclass
class SpectralStability:
    stability: float
    covariance: float
    mean_x: float
    mean_y: float
    var_x: float
    var_y: float
    first_order: float
    """``rho sum_i omega(i) f^(i) f^rho(i)``."""


def spectral_stability(f: DecisionFunction, rho: float, measure=None) -> SpectralStability:
    """Covariance ``sum_{S != empty} omega(S) rho^|S| f^(S) f^rho(S)`` and derived moments."""
    meas = _as_measure(measure, f.n)
    if not isinstance(meas, Product):
        raise ValueError("the spectral route needs a product measure")
    sx = exact_spectrum(f, meas)
    sy = exact_spectrum(f, Product(noisy_p(meas.p, rho)))
    ratio = meas.sigma / np.sqrt(1.0 - rho**2 * meas.mu**2)
    cov = 0.0
    var_x = var_y = 0.0
    first = 0.0
    for mask, vx in sx.coefficients.items():
        if not mask:
            continue
        vy = sy[mask]
        idx = [i for i in range(f.n) if mask >> i & 1]
        term = float(np.prod(ratio[idx])) * rho ** len(idx) * vx * vy
        cov += term
        if len(idx) == 1:
            first += term
        var_x += vx * vx
        var_y += vy * vy
    mx, my = sx[0], sy[0]
    return SpectralStability(cov + mx * my, cov, mx, my, var_x, var_y, first)


def stability_spectral(f: DecisionFunction, rho: float, measure=None) -> float:
    return spectral_stability(f, rho, measure).stability


def stability_montecarlo(f: DecisionFunction, rho: float, measure=None, pairs: int = 100_000,
                         seed=None, chunk: int = 20_000) -> float:
    """Mean of ``f(X) f(Y)`` over sampled pairs (product measures)."""
    rng = np.random.default_rng(seed)
    if measure is None or isinstance(measure, str):
        p = np.full(f.n, 0.5)
    elif isinstance(measure, Product):
        p = measure.p
    else:
        p = np.asarray(measure, dtype=float)
    proc = NoiseProcess(rho)
    total = 0.0
    done = 0
    while done < pairs:
        b = min(chunk, pairs - done)
        X = np.where(rng.random((b, f.n)) < p, 1, -1).astype(np.int8)
        Y = proc.apply(X, rng)
        total += float(np.sum(f(X).astype(np.int64) * f(Y)))
        done += b
    return total / pairs


@dataclass
class CovarianceRelation:
    stability: float
    covariance: float
    mean_x: float
    mean_y: float

    @property
    def residual(self) -> float:
        return abs(self.stability - (self.covariance + self.mean_x * self.mean_y))


def covariance_relation(f: DecisionFunction, rho: float, measure=None) -> CovarianceRelation:
    """Stability, covariance and both means by pair enumeration."""
    meas = _as_measure(measure, f.n)
    w = meas.weights()
    t = f.truth_table().astype(float)
    ty = noise_operator(f, rho)
    mx = float(w @ t)
    my = float(w @ ty)
    s = float(w @ (t * ty))
    return CovarianceRelation(s, s - mx * my, mx, my)


def phi_rho_moments(p: float, rho: float) -> tuple[float, float]:
    """``E phi^rho(Y)`` and ``E phi^rho(Y)**2`` by enumerating ``(x, flip)``."""
    mu = 2 * p - 1
    s = math.sqrt(1 - rho**2 * mu**2)
    m1 = m2 = 0.0
    for x, px in ((1, p), (-1, 1 - p)):
        for keep, pk in ((True, 0.5 * (1 + rho)), (False, 0.5 * (1 - rho))):
            y = x if keep else -x
            v = (y - rho * mu) / s
            m1 += px * pk * v
            m2 += px * pk * v * v
    return m1, m2


# --- decision reliability -------------------------------------------------------------

@dataclass
class ReliabilityReport:
    exact: float
    """Correlation with the variance-form denominator."""
    paper_form: float
    """Same numerator over ``sqrt(1 - f^(empty)) sqrt(1 - f^rho(empty))``."""
    approx: float
    """First-order numerator over the variance-form denominator."""
    degenerate: bool = False

    @property
    def gap(self) -> float:
        return abs(self.exact - self.approx)


def _ratio(num, den):
    return num / den if den > 0 else float("nan")


def decision_reliability(f: DecisionFunction, rho: float, measure=None) -> ReliabilityReport:
    """``cor(f(X), f(Y))`` exactly and by the singleton-set approximation.

    A decision that is constant under either measure has no variance; the
    report is then marked degenerate and all values are ``nan``.
    """
    st = spectral_stability(f, rho, measure)
    den = math.sqrt(max(1 - st.mean_x**2, 0.0) * max(1 - st.mean_y**2, 0.0))
    if den < 1e-12:
        nan = float("nan")
        return ReliabilityReport(nan, nan, nan, True)
    paper_den = math.sqrt(max(1 - st.mean_x, 0.0) * max(1 - st.mean_y, 0.0))
    return ReliabilityReport(st.covariance / den, _ratio(st.covariance, paper_den),
                             st.first_order / den)


def decision_reliability_approx(f: DecisionFunction, rho: float, measure=None) -> float:
    return decision_reliability(f, rho, measure).approx


# --- data-driven stability -----------------------------------------------------------

def count_rule(f: DecisionFunction) -> np.ndarray | None:
    """Values ``g(k)`` with ``f(x) = g(#{i: x_i = +1})``, or ``None`` if ``f`` is not of that form."""
    n = f.n
    if isinstance(f, LTF):
        if len(set(f.weights)) > 1:
            return None
    elif not isinstance(f, (Majority, Constant)):
        return None
    rows = np.where(np.arange(n)[None, :] < np.arange(n + 1)[:, None], 1, -1).astype(np.int8)
    return f(rows).astype(float)


def _count_pmf(ones: int, minus: int, rho: float) -> np.ndarray:
    """Distribution of the number of ``+1`` items after noise."""
    q = 0.5 * (1 + rho)
    a = binom.pmf(np.arange(ones + 1), ones, q)
    b = binom.pmf(np.arange(minus + 1), minus, 1 - q)
    return np.convolve(a, b)


@dataclass
class DataStability:
    stability: float
    mean_x: float
    mean_y: float
    approx_numerator: float
    method: str

    @property
    def covariance(self) -> float:
        return self.stability - self.mean_x * self.mean_y

    def reliability(self) -> float:
        den = math.sqrt(max(1 - self.mean_x**2, 0.0) * max(1 - self.mean_y**2, 0.0))
        return self.covariance / den if den > 1e-12 else float("nan")

    def reliability_approx(self) -> float:
        den = math.sqrt(max(1 - self.mean_x**2, 0.0) * max(1 - self.mean_y**2, 0.0))
        return self.approx_numerator / den if den > 1e-12 else float("nan")


def stability_from_data(f: DecisionFunction, data, rho: float, seed=None,
                        replicates: int = 200) -> DataStability:
    """Stability with ``X`` drawn from the observed rows.

    Rules that depend only on the number of ``+1`` items are handled
    exactly; anything else averages ``replicates`` noisy copies per row.
    The first-order numerator uses the product of the item marginals of
    the data as ``pi``.
    """
    X = data.rows if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data))
    m, n = X.shape
    fx = f(X).astype(float)
    pbar = np.clip((X > 0).mean(axis=0), 1e-9, 1 - 1e-9)
    mu = 2 * pbar - 1
    sigma = 2 * np.sqrt(pbar * (1 - pbar))
    s_rho = np.sqrt(1 - rho**2 * mu**2)
    phi_x = (X - mu) / sigma
    fhat1 = (fx[:, None] * phi_x).mean(axis=0)
    g = count_rule(f)
    keep = 0.5 * (1 + rho)
    if g is not None:
        ones = (X > 0).sum(axis=1)
        ey = np.empty(m)
        # E[f(Y) | Y_i = y, x] for item value s, keyed by row count
        cond = {}
        for k in np.unique(ones):
            pmf = _count_pmf(int(k), n - int(k), rho)
            val = float(pmf @ g)
            cond_k = {}
            for s in (1, -1):
                o = int(k) - (s > 0)
                if o < 0 or n - 1 - o < 0:
                    continue
                pm = _count_pmf(o, n - 1 - o, rho)
                cond_k[s] = (float(pm @ g[1:]), float(pm @ g[:-1]))  # Y_i = +1, Y_i = -1
            cond[int(k)] = (val, cond_k)
        fy_phi = np.zeros(n)
        for t in range(m):
            val, cond_k = cond[int(ones[t])]
            ey[t] = val
            for i in range(n):
                s = int(X[t, i])
                e_plus, e_minus = cond_k[s]
                p_plus = keep if s > 0 else 1 - keep
                fy_phi[i] += (p_plus * e_plus * (1 - rho * mu[i])
                              + (1 - p_plus) * e_minus * (-1 - rho * mu[i])) / s_rho[i]
        fy_phi /= m
        method = "exact-count"
    else:
        rng = np.random.default_rng(seed)
        proc = NoiseProcess(rho)
        ey = np.zeros(m)
        fy_phi = np.zeros(n)
        for _ in range(replicates):
            Y = proc.apply(X, rng)
            fy = f(Y).astype(float)
            ey += fy
            fy_phi += (fy[:, None] * (Y - rho * mu) / s_rho).mean(axis=0)
        ey /= replicates
        fy_phi /= replicates
        method = f"montecarlo({replicates})"
    approx_num = float(rho * np.sum(sigma / s_rho * fhat1 * fy_phi))
    return DataStability(float(np.mean(fx * ey)), float(fx.mean()), float(ey.mean()),
                         approx_num, method)


# --- curves --------------------------------------------------------------------------

@dataclass
class CurveRow:
    rho: float
    a0: float
    stability: float
    reliability_exact: float
    reliability_approx: float


@dataclass
class StabilityCurves:
    rows: list = field(default_factory=list)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rho", "a0", "stability", "reliability_exact", "reliability_approx"])
        for r in self.rows:
            w.writerow([r.rho, r.a0, repr(r.stability), repr(r.reliability_exact),
                        repr(r.reliability_approx)])
        text = buf.getvalue()
        if path is not None:
            atomic_write_text(path, text)
        return text

    def column(self, name: str, **fixed) -> list:
        sel = [r for r in self.rows if all(math.isclose(getattr(r, k), v) for k, v in fixed.items())]
        return [getattr(r, name) for r in sel]

    def violations(self, tol: float = 1e-9) -> list[str]:
        """Cells where stability drops as rho rises (fixed a0) or rises with a0 (fixed rho)."""
        out = []
        a0s = sorted({r.a0 for r in self.rows})
        rhos = sorted({r.rho for r in self.rows})
        for a0 in a0s:
            cells = sorted((r for r in self.rows if r.a0 == a0 and r.rho >= 0), key=lambda r: r.rho)
            for u, v in zip(cells, cells[1:]):
                if v.stability < u.stability - tol:
                    out.append(f"a0={a0}: stability falls from rho={u.rho} to rho={v.rho}")
        for rho in rhos:
            cells = sorted((r for r in self.rows if r.rho == rho), key=lambda r: r.a0)
            for u, v in zip(cells, cells[1:]):
                if v.stability > u.stability + tol:
                    out.append(f"rho={rho}: stability rises from a0={u.a0} to a0={v.a0}")
        return out


def stability_curves(f: DecisionFunction, rho_grid=DEFAULT_RHO_GRID, a0_grid=None,
                     data=None, measure=None, seed=None) -> StabilityCurves:
    """Stability and decision reliability over a ``rho`` grid and, for an LTF, an ``a0`` grid.

    With ``data`` the rows of the dataset play the role of ``X``;
    otherwise ``measure`` (product, default uniform) is enumerated.
    """
    if not rho_grid:
        raise ValueError("the rho grid is empty")
    if a0_grid is not None and not isinstance(f, LTF):
        raise ValueError("an a0 grid needs a linear threshold function")
    if a0_grid is not None and len(a0_grid) == 0:
        raise ValueError("the a0 grid is empty")
    a0s = list(a0_grid) if a0_grid is not None else [f.a0 if isinstance(f, LTF) else float("nan")]
    curves = StabilityCurves()
    for ci, a0 in enumerate(a0s):
        g = replace(f, a0=float(a0)) if isinstance(f, LTF) else f
        for cj, rho in enumerate(rho_grid):
            rho = float(rho)
            if data is not None:
                cell_seed = None if seed is None else [seed, ci, cj]
                ds = stability_from_data(g, data, rho, seed=cell_seed)
                row = CurveRow(rho, float(a0), ds.stability, ds.reliability(), ds.reliability_approx())
            else:
                rel = decision_reliability(g, rho, measure)
                row = CurveRow(rho, float(a0), stability_spectral(g, rho, measure),
                               rel.exact, rel.approx)
            curves.rows.append(row)
    return curves
