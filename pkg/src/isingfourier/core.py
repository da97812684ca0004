"""Binary-domain conventions, datasets, graphs and subset bitmasks.

Items are indexed ``0..n-1``. The canonical value domain is ``{-1, +1}``;
``{0, 1}`` data is converted on the way in (``b -> 2b - 1``) and back on
the way out. Configurations of ``n`` items are indexed by an integer whose
bit ``i`` is set when item ``i`` is ``+1``.
"""
from __future__ import annotations

import csv
import io
import itertools
import os
import tempfile
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Sequence

import numpy as np

#: Largest item count for which full ``2**n`` enumeration is allowed.
EXACT_CAP = 20


class DataError(ValueError):
    """Raised for malformed binary data."""


class CapExceeded(ValueError):
    """Raised when an exact computation would enumerate more than ``2**EXACT_CAP`` states."""


def check_cap(n: int, what: str = "exact enumeration") -> None:
    if n > EXACT_CAP:
        raise CapExceeded(
            f"{what} needs 2**{n} configurations; the cap is n <= {EXACT_CAP}")


def as_spins(x, n: int | None = None) -> np.ndarray:
    """Validate a single ``{-1, +1}`` vector (a spin vector) and return it as int8."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise DataError("a spin vector must be one-dimensional")
    if n is not None and arr.shape[0] != n:
        raise DataError(f"expected {n} items, got {arr.shape[0]}")
    bad = np.flatnonzero((arr != 1) & (arr != -1))
    if bad.size:
        raise DataError(f"non-spin entry {arr[bad[0]]!r} at position {bad[0]}")
    return arr.astype(np.int8)


@dataclass(frozen=True)
class Dataset:
    """``m`` observations of ``n`` binary items stored in the ``{-1, +1}`` domain.

    ``source_domain`` records how the data arrived (``"01"`` or ``"pm1"``) so
    it can be written back unchanged.
    """

    rows: np.ndarray
    source_domain: str = "pm1"

    def __post_init__(self):
        rows = np.asarray(self.rows)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise DataError("a dataset needs at least one row and one item")
        bad = np.argwhere((rows != 1) & (rows != -1))
        if bad.size:
            r, c = bad[0]
            raise DataError(f"non-spin entry at ({r},{c})")
        if self.source_domain not in ("01", "pm1"):
            raise DataError(f"unknown source domain {self.source_domain!r}")
        rows = rows.astype(np.int8)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    item_count = n

    def to_binary(self) -> np.ndarray:
        """Rows mapped back to ``{0, 1}``."""
        return ((self.rows + 1) // 2).astype(np.int8)

    def egress(self) -> np.ndarray:
        """Rows in the domain they were ingested from."""
        return self.to_binary() if self.source_domain == "01" else self.rows.copy()

    def constant_items(self) -> list[int]:
        col_min = self.rows.min(axis=0)
        col_max = self.rows.max(axis=0)
        return [int(i) for i in np.flatnonzero(col_min == col_max)]


def spins_from_binary(rows) -> Dataset:
    """Relabel a ``{0, 1}`` matrix to ``{-1, +1}``.

    >>> spins_from_binary([[0, 1], [1, 1]]).rows.tolist()
    [[-1, 1], [1, 1]]
    """
    arr = np.asarray(rows)
    if arr.ndim == 1:
        arr = arr[None, :]
    bad = np.argwhere((arr != 0) & (arr != 1))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"non-binary entry at ({r},{c})")
    return Dataset(2 * arr.astype(np.int8) - 1, source_domain="01")


def spins_from_any(rows, domain: str = "auto") -> Dataset:
    """Build a dataset from ``{0,1}`` or ``{-1,1}`` values.

    ``domain="auto"`` picks ``{0,1}`` unless a ``-1`` is present.
    """
    arr = np.asarray(rows)
    if arr.ndim == 1:
        arr = arr[None, :]
    if domain == "auto":
        domain = "pm1" if np.any(arr == -1) else "01"
    if domain == "01":
        return spins_from_binary(arr)
    if domain == "pm1":
        bad = np.argwhere((arr != 1) & (arr != -1))
        if bad.size:
            r, c = bad[0]
            raise DataError(f"non-spin entry at ({r},{c})")
        return Dataset(arr, source_domain="pm1")
    raise DataError(f"unknown domain {domain!r}")


def read_csv(source, header: bool | None = False, delimiter: str = ",",
             domain: str = "auto") -> Dataset:
    """Parse a CSV of binary observations (one per line).

    ``source`` is a path or a text stream. With ``header=None`` the first
    line is treated as a header when it does not parse as numbers. Errors
    carry 1-based line numbers.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    rows: list[list[int]] = []
    linenos: list[int] = []
    width = None
    pending_header = header is not False
    for lineno, rec in enumerate(reader, start=1):
        if not rec or all(not c.strip() for c in rec):
            continue
        if pending_header:
            pending_header = False
            if header:
                continue
            try:
                [int(float(c)) for c in rec]
            except ValueError:
                continue
        try:
            vals = [int(float(c)) for c in rec]
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DataError(f"line {lineno}: expected {width} fields, got {len(vals)}")
        rows.append(vals)
        linenos.append(lineno)
    if not rows:
        raise DataError("no observations found")
    arr = np.array(rows)
    if domain == "auto":
        domain = "pm1" if np.any(arr == -1) else "01"
    allowed = (0, 1) if domain == "01" else (-1, 1)
    bad = np.argwhere((arr != allowed[0]) & (arr != allowed[1]))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"line {linenos[r]}: value {arr[r, c]} in column {c + 1} "
                        f"is not in {{{allowed[0]},{allowed[1]}}}")
    return spins_from_any(arr, domain=domain)


def write_csv(path, data: Dataset, header: bool = False, delimiter: str = ",",
              domain: str | None = None) -> None:
    """Write a dataset; ``domain`` defaults to the one it was ingested from."""
    domain = domain or data.source_domain
    values = data.to_binary() if domain == "01" else data.rows
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    if header:
        w.writerow([f"item{i + 1}" for i in range(data.n)])
    w.writerows(values.tolist())
    atomic_write_text(path, buf.getvalue())


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on ``node_count`` nodes."""

    node_count: int
    edges: tuple = field(default=())

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge {(i, j)} outside 0..{self.node_count - 1}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        adj = np.asarray(adj)
        iu, ju = np.nonzero(np.triu(adj != 0, 1))
        return cls(adj.shape[0], tuple(zip(iu.tolist(), ju.tolist())))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def is_regular(self) -> bool:
        d = self.degrees()
        return bool(np.all(d == d[0])) if d.size else True


def neighborhoods(g: Graph) -> list[frozenset]:
    """Neighbour set of every node."""
    nb = [set() for _ in range(g.node_count)]
    for i, j in g.edges:
        nb[i].add(j)
        nb[j].add(i)
    return [frozenset(s) for s in nb]


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def erdos_renyi(n: int, p_edge: float, rng) -> Graph:
    """G(n, p): each of the ``n(n-1)/2`` pairs present independently with probability ``p_edge``."""
    if not 0.0 <= p_edge <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    upper = np.triu(rng.random((n, n)) < p_edge, 1)
    return Graph.from_adjacency(upper | upper.T)


# --- subsets -------------------------------------------------------------

def mask_of(items: Sequence[int]) -> int:
    m = 0
    for i in items:
        m |= 1 << int(i)
    return m


def items_of(mask: int) -> tuple:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def order_of(mask: int) -> int:
    return bin(mask).count("1")


def label(mask: int) -> str:
    """1-based rendering used in reports, e.g. ``{1,3}``."""
    return "{" + ",".join(str(i + 1) for i in items_of(mask)) + "}"


def enumerate_subsets(n: int, max_order: int | None = None) -> Iterator[int]:
    """Yield the bitmask of every ``S`` with ``|S| <= max_order``.

    The empty set comes first, then sets by increasing order and
    lexicographically within an order.
    """
    k = n if max_order is None else max_order
    if not 0 <= k <= n:
        raise ValueError(f"max_order must be in [0, {n}]")
    if k == n or k > 2:
        check_cap(n, "subset enumeration")
    for r in range(k + 1):
        for combo in itertools.combinations(range(n), r):
            yield mask_of(combo)


def subset_count(n: int, max_order: int) -> int:
    return sum(comb(n, r) for r in range(max_order + 1))


def all_configurations(n: int) -> np.ndarray:
    """All ``2**n`` spin configurations; row ``c`` has ``+1`` where bit ``i`` of ``c`` is set."""
    check_cap(n)
    idx = np.arange(1 << n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


def config_index(x) -> np.ndarray:
    """Inverse of :func:`all_configurations` for one or many spin vectors."""
    x = np.asarray(x)
    bits = (x > 0).astype(np.int64)
    return bits @ (1 << np.arange(x.shape[-1], dtype=np.int64))
