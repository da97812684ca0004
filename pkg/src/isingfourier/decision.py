"""Boolean decision functions on ``{-1, +1}^n`` and exhaustive property checks."""
from __future__ import annotations

import base64
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import all_configurations, check_cap, config_index, neighborhoods
from .ising import IsingModel, conditional_probs

#: Scores within this distance of zero count as ties and resolve to +1.
TIE_TOL = 1e-9


class DecisionFunction:
    """Base class: a map from spin configurations to ``{-1, +1}``.

    Calling the object on an ``(m, n)`` array returns an int8 vector; on a
    single spin vector it returns an int.
    """

    n: int

    def _evaluate(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        X = np.asarray(x)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n:
            raise ValueError(f"expected {self.n} items, got {X.shape[1]}")
        out = self._evaluate(X).astype(np.int8)
        return int(out[0]) if single else out

    def truth_table(self) -> np.ndarray:
        """Values on :func:`~isingfourier.core.all_configurations` (item 0 is the low bit)."""
        return self(all_configurations(self.n))

    def params(self) -> dict:
        raise NotImplementedError

    kind = "abstract"

    def to_dict(self) -> dict:
        return {"type": self.kind, "n": self.n, "params": self.params()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class LTF(DecisionFunction):
    """Linear threshold function ``sgn(a0 + sum_i a_i v_i)`` with ``sgn(0) = +1``.

    ``domain="01"`` applies the weights to ``v = (x + 1) / 2``, so that
    ``LTF(-0.6, [1/n]*n, domain="01")`` passes at 60% correct.
    """

    a0: float
    weights: tuple
    domain: str = "pm1"
    kind = "ltf"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.domain not in ("pm1", "01"):
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def n(self) -> int:
        return len(self.weights)

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = X if self.domain == "pm1" else 0.5 * (X + 1.0)
        return self.a0 + V @ np.asarray(self.weights)

    def _evaluate(self, X):
        s = self.score(X)
        return np.where(s >= -TIE_TOL, 1, -1)

    def ties(self, X) -> int:
        """Number of rows whose score is within ``TIE_TOL`` of zero."""
        return int(np.count_nonzero(np.abs(self.score(X)) <= TIE_TOL))

    def params(self):
        return {"a0": self.a0, "weights": list(self.weights), "domain": self.domain}


@dataclass(frozen=True, eq=False)
class Majority(DecisionFunction):
    n: int
    kind = "majority"

    def __post_init__(self):
        if self.n < 1 or self.n % 2 == 0:
            raise ValueError("majority needs an odd number of items")

    def _evaluate(self, X):
        return np.where(X.sum(axis=1) > 0, 1, -1)

    def as_ltf(self) -> LTF:
        return LTF(0.0, (1.0,) * self.n)

    def params(self):
        return {}


@dataclass(frozen=True, eq=False)
class Dictator(DecisionFunction):
    """Copies item ``index`` (0-based)."""

    n: int
    index: int
    kind = "dictator"

    def __post_init__(self):
        if not 0 <= self.index < self.n:
            raise ValueError("dictator index out of range")

    def _evaluate(self, X):
        return X[:, self.index]

    def params(self):
        return {"index": self.index}


@dataclass(frozen=True, eq=False)
class Constant(DecisionFunction):
    n: int
    value: int = 1
    kind = "constant"

    def __post_init__(self):
        if self.value not in (-1, 1):
            raise ValueError("constant value must be -1 or +1")

    def _evaluate(self, X):
        return np.full(X.shape[0], self.value)

    def params(self):
        return {"value": self.value}


@dataclass(frozen=True, eq=False)
class TruthTable(DecisionFunction):
    n: int
    table: np.ndarray = field(repr=False)
    kind = "truth_table"

    def __post_init__(self):
        t = np.asarray(self.table).astype(np.int8).reshape(-1)
        if t.size != 1 << self.n:
            raise ValueError(f"truth table needs {1 << self.n} entries, got {t.size}")
        if np.any((t != 1) & (t != -1)):
            raise ValueError("truth table entries must be -1 or +1")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def _evaluate(self, X):
        return self.table[config_index(X)]

    def params(self):
        bits = np.packbits(self.table > 0, bitorder="little")
        return {"bits": base64.b64encode(bits.tobytes()).decode("ascii")}


def max_function(n: int) -> TruthTable:
    """``+1`` unless every item is ``-1``."""
    t = np.ones(1 << n, dtype=np.int8)
    t[0] = -1
    return TruthTable(n, t)


def evaluate(f: DecisionFunction, x):
    return f(x)


def from_dict(d: dict) -> DecisionFunction:
    kind, n, p = d["type"], int(d["n"]), d.get("params", {})
    if kind == "ltf":
        return LTF(float(p["a0"]), tuple(p["weights"]), p.get("domain", "pm1"))
    if kind == "majority":
        return Majority(n)
    if kind == "dictator":
        return Dictator(n, int(p["index"]))
    if kind == "constant":
        return Constant(n, int(p.get("value", 1)))
    if kind == "truth_table":
        raw = np.frombuffer(base64.b64decode(p["bits"]), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[: 1 << n]
        return TruthTable(n, np.where(bits == 1, 1, -1))
    raise ValueError(f"unknown decision function type {kind!r}")


def from_json(text: str) -> DecisionFunction:
    return from_dict(json.loads(text))


def as_truth_table(f: DecisionFunction) -> TruthTable:
    return f if isinstance(f, TruthTable) else TruthTable(f.n, f.truth_table())


# --- properties ----------------------------------------------------------

@dataclass
class PropertyReport:
    monotone: bool
    odd: bool
    unanimous: bool
    symmetric: bool
    transitive_symmetric: bool
    witnesses: dict = field(default_factory=dict)
    transitive_exhaustive: bool = True

    def as_dict(self) -> dict:
        return {
            "monotone": self.monotone,
            "odd": self.odd,
            "unanimous": self.unanimous,
            "symmetric": self.symmetric,
            "transitive_symmetric": self.transitive_symmetric,
            "transitive_exhaustive": self.transitive_exhaustive,
            "witnesses": {k: [np.asarray(v).tolist() for v in w]
                          for k, w in self.witnesses.items()},
        }


def _bits(n):
    idx = np.arange(1 << n, dtype=np.int64)
    return (idx[:, None] >> np.arange(n)) & 1


def _permuted_index(bits, perm):
    """Index of ``x^pi`` with ``(x^pi)_k = x_{perm[k]}`` for every configuration."""
    return bits[:, list(perm)] @ (1 << np.arange(bits.shape[1], dtype=np.int64))


def _orbit_of_zero(n, generators):
    # orbit under the generated group = component of 0 in the graph k -- g[k]
    adj = [set() for _ in range(n)]
    for g in generators:
        for k, gk in enumerate(g):
            adj[k].add(int(gk))
            adj[int(gk)].add(k)
    seen = {0}
    frontier = [0]
    while frontier:
        for b in adj[frontier.pop()]:
            if b not in seen:
                seen.add(b)
                frontier.append(b)
    return seen


def check_properties(f: DecisionFunction, n_sampled: int = 10_000, seed=0) -> PropertyReport:
    """Exhaustive checks of monotonicity, oddness, unanimity and (transitive) symmetry.

    Anonymity is tested against every adjacent transposition, which
    generates the full permutation group, so the flag is exact for any
    ``n`` within the enumeration cap. Transitive symmetry enumerates all
    ``n!`` permutations for ``n <= 8`` and otherwise searches
    ``n_sampled`` random permutations (plus transpositions and rotations);
    a negative answer in that regime is marked non-exhaustive.
    """
    n = f.n
    check_cap(n, "property checking")
    t = f.truth_table().astype(np.int64)
    bits = _bits(n)
    full = (1 << n) - 1
    X = all_configurations(n)
    wit: dict = {}

    monotone = True
    for i in range(n):
        lo = np.flatnonzero(bits[:, i] == 0)
        hi = lo | (1 << i)
        bad = np.flatnonzero(t[lo] > t[hi])
        if bad.size:
            monotone = False
            wit["monotone"] = (X[lo[bad[0]]], X[hi[bad[0]]])
            break

    neg = full ^ np.arange(1 << n)
    bad = np.flatnonzero(t[neg] != -t)
    odd = bad.size == 0
    if not odd:
        wit["odd"] = (X[bad[0]],)

    unanimous = bool(t[0] == -1 and t[full] == 1)
    if not unanimous:
        wit["unanimous"] = (X[0] if t[0] != -1 else X[full],)

    symmetric = True
    for k in range(n - 1):
        perm = list(range(n))
        perm[k], perm[k + 1] = perm[k + 1], perm[k]
        bad = np.flatnonzero(t[_permuted_index(bits, perm)] != t)
        if bad.size:
            symmetric = False
            wit["symmetric"] = (X[bad[0]], np.array(perm))
            break

    exhaustive = True
    if symmetric or n <= 1:
        transitive = True
    else:
        if n <= 8:
            candidates = itertools.permutations(range(n))
        else:
            exhaustive = False
            rng = np.random.default_rng(seed)
            rot = [tuple(np.roll(np.arange(n), s)) for s in range(1, n)]
            swaps = []
            for a, b in itertools.combinations(range(n), 2):
                p = list(range(n))
                p[a], p[b] = b, a
                swaps.append(tuple(p))
            sampled = [tuple(rng.permutation(n)) for _ in range(n_sampled)]
            candidates = itertools.chain(swaps, rot, sampled)
        autos = [p for p in candidates
                 if np.array_equal(t[_permuted_index(bits, p)], t)]
        orbit = _orbit_of_zero(n, autos)
        transitive = len(orbit) == n
        if transitive:
            exhaustive = True
        else:
            outside = min(set(range(n)) - orbit)
            wit["transitive_symmetric"] = (np.array([0, outside]),)
    return PropertyReport(monotone, odd, unanimous, symmetric, transitive, wit, exhaustive)


def is_monotone(f: DecisionFunction) -> bool:
    t = f.truth_table()
    bits = _bits(f.n)
    for i in range(f.n):
        lo = np.flatnonzero(bits[:, i] == 0)
        if np.any(t[lo] > t[lo | (1 << i)]):
            return False
    return True


def monotone_functions(n: int) -> list[TruthTable]:
    """Every monotone Boolean function on ``n <= 4`` items, constants included."""
    if n > 4:
        raise ValueError("monotone enumeration is limited to n <= 4")
    size = 1 << n
    bits = _bits(n)
    out = []
    for code in range(1 << size):
        t = np.where((code >> np.arange(size)) & 1, 1, -1).astype(np.int8)
        ok = True
        for i in range(n):
            lo = np.flatnonzero(bits[:, i] == 0)
            if np.any(t[lo] > t[lo | (1 << i)]):
                ok = False
                break
        if ok:
            out.append(TruthTable(n, t))
    return out


# --- energy function of the Ising conditional --------------------------------

def energy_ltf(model: IsingModel, i: int, x) -> float:
    """``xi_i + sum_{j in di} theta_ij v_j`` for the full configuration ``x``."""
    v = model.values(np.asarray(x, dtype=float))
    return float(model.thresholds[i] + model.interactions[i] @ v)


@dataclass
class EquivalenceClass:
    energy: float
    members: list
    """Neighbour configurations (spins, ordered as the sorted neighbour list)."""
    prob: float
    """Half-coupling conditional ``P(X_i = +1 | x_di)`` shared by the class."""


def equivalence_classes(model: IsingModel, i: int, decimals: int = 10) -> list[EquivalenceClass]:
    """Group neighbour configurations of item ``i`` by their energy value.

    Classes are returned in increasing energy order; the conditional
    probability is constant within a class.
    """
    nb = sorted(neighborhoods(model.graph)[i])
    k = len(nb)
    check_cap(k, "equivalence-class enumeration")
    groups: dict = {}
    x = np.ones(model.n)
    for conf in (all_configurations(k) if k else np.zeros((1, 0), dtype=np.int8)):
        x[nb] = conf
        e = energy_ltf(model, i, x)
        p = conditional_probs(model, x).probs[0, i]
        key = round(e, decimals)
        if key not in groups:
            groups[key] = EquivalenceClass(e, [], p)
        g = groups[key]
        if not math.isclose(p, g.prob, rel_tol=0, abs_tol=1e-12):
            raise AssertionError("conditional probability not constant on a class")
        g.members.append(conf.copy())
    return [groups[k] for k in sorted(groups)]
