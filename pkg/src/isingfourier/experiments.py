"""Experiment configuration and the simulation study harness."""
from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import asdict, dataclass, field, fields

import numba
import numpy as np
import scipy

from . import __version__
from .core import Dataset, Graph, erdos_renyi
from .decision import LTF, DecisionFunction, from_dict
from .estimation import fit_network, predict_probs
from .fourier import empirical_spectrum
from .ising import IsingModel, gibbs_sample, incident_thresholds, joint_conditional_probs
from .noise import DEFAULT_A0_GRID, DEFAULT_RHO_GRID


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentConfig:
    seed: int = 0
    n: int = 35
    m: int = 100
    p_edge: float = 0.05
    edges: list | None = None
    theta: float = 3.0
    threshold_rule: str | float = "incident"
    domain: str = "01"
    decision: dict = field(default_factory=lambda: {"type": "ltf", "a0": -0.6,
                                                    "weights": None, "domain": "01"})
    rho_grid: list = field(default_factory=lambda: list(DEFAULT_RHO_GRID))
    a0_grid: list = field(default_factory=lambda: list(DEFAULT_A0_GRID))
    replications: int = 20
    gamma: float = 0.25
    theta_grid: list = field(default_factory=lambda: [1.0, 2.0, 3.0])
    max_order: int = 2
    rule: str = "and"
    burn_in: int = 1000
    thin: int = 10
    out: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        def bad(name, why):
            raise ConfigError(f"{name}: {why}")
        if self.n < 1:
            bad("n", "must be positive")
        if self.m < 1:
            bad("m", "must be positive")
        if not 0.0 <= self.p_edge <= 1.0:
            bad("p_edge", "edge probability must lie in [0, 1]")
        if self.replications < 1:
            bad("replications", "must be at least 1")
        if self.gamma < 0:
            bad("gamma", "must be nonnegative")
        if self.domain not in ("01", "pm1"):
            bad("domain", "must be '01' or 'pm1'")
        if self.rule not in ("and", "or"):
            bad("rule", "must be 'and' or 'or'")
        if not isinstance(self.threshold_rule, (int, float)) and \
                self.threshold_rule not in ("incident", "zero"):
            bad("threshold_rule", "must be 'incident', 'zero' or a number")
        if not self.rho_grid or any(not -1 <= r <= 1 for r in self.rho_grid):
            bad("rho_grid", "needs values in [-1, 1]")
        if not self.a0_grid:
            bad("a0_grid", "must not be empty")
        if not self.theta_grid:
            bad("theta_grid", "must not be empty")
        if self.max_order < 0 or self.max_order > self.n:
            bad("max_order", f"must lie in [0, {self.n}]")
        if self.edges is not None:
            try:
                Graph(self.n, tuple(tuple(e) for e in self.edges))
            except (ValueError, TypeError) as exc:
                bad("edges", str(exc))
        if not isinstance(self.decision, dict) or "type" not in self.decision:
            bad("decision", "needs a 'type'")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"{sorted(extra)[0]}: unknown field")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: invalid JSON ({exc})") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def make_decision(cfg: ExperimentConfig, n: int | None = None) -> DecisionFunction:
    n = cfg.n if n is None else n
    spec = dict(cfg.decision)
    if spec["type"] == "ltf":
        w = spec.get("weights") or [1.0 / n] * n
        return LTF(float(spec.get("a0", 0.0)), tuple(w), spec.get("domain", "pm1"))
    spec.setdefault("n", n)
    spec.setdefault("params", {k: v for k, v in spec.items() if k not in ("type", "n")})
    return from_dict(spec)


def make_model(cfg: ExperimentConfig, theta: float | None = None, rng=None) -> IsingModel:
    """Random (or explicit) graph, constant edge weight and the configured thresholds."""
    theta = cfg.theta if theta is None else theta
    if cfg.edges is not None:
        g = Graph(cfg.n, tuple(tuple(e) for e in cfg.edges))
    else:
        g = erdos_renyi(cfg.n, cfg.p_edge, rng)
    th = theta * g.adjacency().astype(float)
    if cfg.threshold_rule == "incident":
        xi = incident_thresholds(th)
    elif cfg.threshold_rule == "zero":
        xi = np.zeros(cfg.n)
    else:
        xi = np.full(cfg.n, float(cfg.threshold_rule))
    return IsingModel(g, xi, th, cfg.domain)


def simulate(cfg: ExperimentConfig, theta: float | None = None, seed=None):
    """Draw a model and an ``m``-row Gibbs sample; returns ``(model, dataset)``."""
    seed = cfg.seed if seed is None else seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    g_seed, s_seed = ss.spawn(2)
    model = make_model(cfg, theta, np.random.default_rng(g_seed))
    data = gibbs_sample(model, cfg.m, seed=np.random.default_rng(s_seed),
                        burn_in=cfg.burn_in, thin=cfg.thin)
    return model, data


def recovery(true: Graph, est: Graph) -> tuple[float, float]:
    """Precision and recall of the estimated edge set (``nan`` when undefined)."""
    t, e = set(true.edges), set(est.edges)
    hit = len(t & e)
    precision = hit / len(e) if e else float("nan")
    recall = hit / len(t) if t else float("nan")
    return precision, recall


def _corr(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.std() == 0 or b.std() == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class Replication:
    theta: float
    precision: float
    recall: float
    prob_mad: float
    fourier_mad: float
    degree_corr: float
    coef: np.ndarray
    degrees: np.ndarray


def run_replication(cfg: ExperimentConfig, theta: float, seed, threads: int = 1) -> Replication:
    """Simulate, fit and score one replication.

    Probability and Fourier accuracy are measured against the generating
    model's exact conditionals on the same rows.
    """
    model, data = simulate(cfg, theta, seed)
    f = make_decision(cfg)
    fit = fit_network(data, cfg.gamma, cfg.rule, threads)
    est = predict_probs(fit, data)
    truth = joint_conditional_probs(model, data.rows)
    c_est = empirical_spectrum(f, data, est, 1).order1()
    c_true = empirical_spectrum(f, data, truth, 1).order1()
    prec, rec = recovery(model.graph, fit.model.graph)
    deg = model.graph.degrees()
    return Replication(theta, prec, rec, float(np.mean(np.abs(est.probs - truth.probs))),
                       float(np.mean(np.abs(c_est - c_true))), _corr(deg, c_est), c_est, deg)


def replication_seeds(cfg: ExperimentConfig, count: int, stream: int = 0):
    return np.random.SeedSequence([cfg.seed, stream]).spawn(count)


@dataclass
class MonteCarloRow:
    theta: float
    metric: str
    mean: float
    sd: float
    count: int


def summarize(reps: list[Replication]) -> list[MonteCarloRow]:
    rows = []
    for theta in sorted({r.theta for r in reps}):
        sel = [r for r in reps if r.theta == theta]
        for metric in ("precision", "recall", "prob_mad", "fourier_mad", "degree_corr"):
            v = np.array([getattr(r, metric) for r in sel], float)
            v = v[np.isfinite(v)]
            mean = float(v.mean()) if v.size else float("nan")
            sd = float(v.std(ddof=1)) if v.size > 1 else float("nan")
            rows.append(MonteCarloRow(theta, metric, mean, sd, int(v.size)))
    return rows


def montecarlo(cfg: ExperimentConfig, threads: int = 1, progress=None) -> list[Replication]:
    if cfg.replications < 2:
        raise ConfigError("replications: the Monte Carlo study needs at least 2")
    reps = []
    for k, theta in enumerate(cfg.theta_grid):
        for s in replication_seeds(cfg, cfg.replications, stream=k + 1):
            reps.append(run_replication(cfg, float(theta), s, threads))
            if progress:
                progress(reps[-1])
    return reps


def isolated_summary(reps: list[Replication]) -> tuple[float, float]:
    """Mean ``|coef|`` of isolated nodes and the 25th percentile of ``|coef|`` over connected nodes."""
    iso = np.concatenate([np.abs(r.coef[r.degrees == 0]) for r in reps])
    con = np.concatenate([np.abs(r.coef[r.degrees > 0]) for r in reps])
    return (float(iso.mean()) if iso.size else float("nan"),
            float(np.percentile(con, 25)) if con.size else float("nan"))


def manifest(cfg: ExperimentConfig | None, seed, artifacts: dict, command: str) -> dict:
    return {
        "command": command,
        "seed": seed,
        "config_sha256": cfg.digest() if cfg is not None else None,
        "config": cfg.to_dict() if cfg is not None else None,
        "versions": {"isingfourier": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "numba": numba.__version__},
        "artifacts": artifacts,
    }


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def nanmean(v) -> float:
    v = np.asarray(v, float)
    v = v[np.isfinite(v)]
    return float(v.mean()) if v.size else math.nan
