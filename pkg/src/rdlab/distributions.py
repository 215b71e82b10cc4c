"""Finite-alphabet probability algebra.

Laws are immutable wrappers around numpy arrays.  All information measures
are in nats; :func:`to_bits` is the single conversion point used for
reporting.  Relative entropy returns ``math.inf`` (the support-violation
sentinel) instead of a large float whenever ``p(a) > 0 = q(a)``.

Blocks over an n-fold product alphabet are ordered lexicographically with the
first letter most significant, so block ``(x_1, ..., x_n)`` has index
``sum_i x_i * k**(n - i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._validation import (
    DEFAULT_BUDGET,
    SUM_TOL,
    check_budget,
    check_joint_matrix,
    check_probability_vector,
    check_stochastic_matrix,
    check_symbols,
)

__all__ = [
    "Simplex",
    "Channel",
    "JointLaw",
    "EmpiricalType",
    "ConditionalRows",
    "kl_divergence",
    "variational_distance",
    "entropy",
    "mutual_information",
    "empirical_type",
    "product_extension",
    "marginals",
    "condition",
    "enumerate_blocks",
    "block_index",
    "to_bits",
    "law_to_dict",
    "law_from_dict",
]

LN2 = math.log(2.0)


def to_bits(nats: float) -> float:
    """Convert an information quantity from nats to bits."""
    return nats / LN2


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def _labels(labels, size: int, name: str):
    if labels is None:
        return None
    labels = tuple(str(lab) for lab in labels)
    if len(labels) != size:
        raise ValueError(f"{name} has {len(labels)} labels for {size} symbols")
    if len(set(labels)) != size:
        raise ValueError(f"{name} labels are not distinct")
    return labels


@dataclass(frozen=True, eq=False)
class Simplex:
    """Probability vector over a finite alphabet."""

    mass: np.ndarray
    labels: tuple | None = None
    tol: float = SUM_TOL

    def __post_init__(self):
        mass = check_probability_vector(self.mass, tol=self.tol)
        object.__setattr__(self, "mass", _frozen(mass))
        object.__setattr__(self, "labels", _labels(self.labels, mass.size, "Simplex"))

    @property
    def alphabet_size(self) -> int:
        return self.mass.size

    @classmethod
    def uniform(cls, k: int) -> "Simplex":
        return cls(np.full(k, 1.0 / k))

    def __len__(self):
        return self.alphabet_size

    def __repr__(self):
        return f"Simplex({np.array2string(self.mass, precision=6)})"


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic conditional law ``rows[a, b] = W(b | a)``."""

    rows: np.ndarray
    input_labels: tuple | None = None
    output_labels: tuple | None = None
    tol: float = SUM_TOL

    def __post_init__(self):
        rows = check_stochastic_matrix(self.rows, tol=self.tol)
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "input_labels", _labels(self.input_labels, rows.shape[0], "Channel input"))
        object.__setattr__(self, "output_labels", _labels(self.output_labels, rows.shape[1], "Channel output"))

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]

    def row(self, a: int) -> Simplex:
        return Simplex(self.rows[a])

    def joint(self, source: Simplex) -> "JointLaw":
        """Joint law ``source(a) * W(b | a)``."""
        if source.alphabet_size != self.input_size:
            raise ValueError("source alphabet does not match channel input")
        return JointLaw(source.mass[:, None] * self.rows, self.input_labels, self.output_labels)

    def output(self, source: Simplex) -> Simplex:
        return Simplex(source.mass @ self.rows, self.output_labels, tol=1e-9)

    @classmethod
    def identity(cls, k: int) -> "Channel":
        return cls(np.eye(k))

    @classmethod
    def symmetric(cls, k: int, crossover: float) -> "Channel":
        """k-ary symmetric channel that errs with total probability ``crossover``."""
        if k == 1:
            return cls(np.ones((1, 1)))
        rows = np.full((k, k), crossover / (k - 1))
        np.fill_diagonal(rows, 1.0 - crossover)
        return cls(rows)

    def __repr__(self):
        return f"Channel({np.array2string(self.rows, precision=6)})"


@dataclass(frozen=True, eq=False)
class JointLaw:
    """Joint distribution over a product alphabet ``X x Y``."""

    mass: np.ndarray
    x_labels: tuple | None = None
    y_labels: tuple | None = None
    tol: float = SUM_TOL

    def __post_init__(self):
        mass = check_joint_matrix(self.mass, tol=self.tol)
        object.__setattr__(self, "mass", _frozen(mass))
        object.__setattr__(self, "x_labels", _labels(self.x_labels, mass.shape[0], "JointLaw x"))
        object.__setattr__(self, "y_labels", _labels(self.y_labels, mass.shape[1], "JointLaw y"))

    @property
    def shape(self) -> tuple[int, int]:
        return self.mass.shape

    @property
    def x_marginal(self) -> Simplex:
        return Simplex(self.mass.sum(axis=1), self.x_labels, tol=1e-9)

    @property
    def y_marginal(self) -> Simplex:
        return Simplex(self.mass.sum(axis=0), self.y_labels, tol=1e-9)

    def __repr__(self):
        return f"JointLaw({np.array2string(self.mass, precision=6)})"


@dataclass(frozen=True, eq=False)
class EmpiricalType:
    """Joint type of a sequence pair, held as integer counts over ``n``."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2:
            raise ValueError("counts must be a 2-d array")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if int(counts.sum()) != self.n or self.n < 1:
            raise ValueError(f"counts sum to {int(counts.sum())}, expected n={self.n}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def mass(self) -> np.ndarray:
        return self.counts / self.n

    def fractions(self) -> list[list[Fraction]]:
        return [[Fraction(int(k), self.n) for k in row] for row in self.counts]

    def as_joint(self) -> JointLaw:
        return JointLaw(self.mass)


@dataclass(frozen=True, eq=False)
class ConditionalRows:
    """Result of conditioning a joint law.

    Rows whose conditioning symbol has zero mass are left as NaN and flagged
    in ``defined`` rather than invented.
    """

    rows: np.ndarray
    defined: np.ndarray

    def channel(self) -> Channel:
        if not np.all(self.defined):
            bad = np.flatnonzero(~self.defined)
            raise ValueError(f"conditional rows {bad.tolist()} are undefined (zero-mass symbols)")
        return Channel(self.rows, tol=1e-9)


def _mass_of(law) -> np.ndarray:
    if isinstance(law, (Simplex, JointLaw)):
        return law.mass
    if isinstance(law, EmpiricalType):
        return law.mass
    if isinstance(law, Channel):
        return law.rows
    return np.asarray(law, dtype=float)


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p, q = _mass_of(p), _mass_of(q)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("negative probability mass")
    return p, q


def kl_divergence(p, q) -> float:
    """Relative entropy ``D(p || q)`` in nats.

    Parameters
    ----------
    p, q : Simplex, JointLaw or array-like
        Laws of identical shape.

    Returns
    -------
    float
        ``sum p log(p/q)`` with ``0 log(0/q) = 0``; ``math.inf`` when some cell
        has ``p > 0`` and ``q == 0``.
    """
    p, q = _pair(p, q)
    support = p > 0
    if np.any(support & (q == 0)):
        return math.inf
    ps, qs = p[support], q[support]
    terms = ps * (np.log(ps) - np.log(qs))
    return max(0.0, math.fsum(terms.tolist()))


def variational_distance(p, q) -> float:
    """``sup_A |p(A) - q(A)|``, computed as half the L1 distance."""
    p, q = _pair(p, q)
    return 0.5 * math.fsum(np.abs(p - q).ravel().tolist())


def entropy(p) -> float:
    """Shannon entropy in nats of any mass array (summed over all cells)."""
    p = _mass_of(p)
    if np.any(p < 0):
        raise ValueError("negative probability mass")
    ps = p[p > 0]
    return max(0.0, -math.fsum((ps * np.log(ps)).tolist()))


def mutual_information(j) -> float:
    """``I(X;Y) = D(j || j_X x j_Y)`` in nats."""
    m = _mass_of(j)
    if m.ndim != 2:
        raise ValueError("mutual information needs a 2-d joint law")
    product = np.outer(m.sum(axis=1), m.sum(axis=0))
    return kl_divergence(m, product)


def empirical_type(xseq: Sequence[int], yseq: Sequence[int], x_size: int | None = None,
                   y_size: int | None = None) -> EmpiricalType:
    """Joint type of a pair of equal-length symbol sequences.

    Alphabet sizes default to one more than the largest symbol seen.
    """
    x = check_symbols(xseq, x_size, name="xseq")
    y = check_symbols(yseq, y_size, name="yseq")
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    kx = x_size if x_size is not None else int(x.max()) + 1
    ky = y_size if y_size is not None else int(y.max()) + 1
    counts = np.zeros((kx, ky), dtype=np.int64)
    np.add.at(counts, (x, y), 1)
    return EmpiricalType(counts, int(x.size))


def _log_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # log of the Kronecker product, for 1-d or 2-d arrays
    if a.ndim == 1:
        return (a[:, None] + b[None, :]).reshape(-1)
    return (a[:, None, :, None] + b[None, :, None, :]).reshape(a.shape[0] * b.shape[0], -1)


def product_extension(p, n: int, budget: int = DEFAULT_BUDGET):
    """n-fold memoryless extension of a Simplex or Channel.

    Block masses are products of per-letter masses, accumulated in log-space.
    Raises :class:`~rdlab.exceptions.ResourceError` when the result would hold
    more than ``budget`` entries.
    """
    if n < 1:
        raise ValueError("blocklength must be >= 1")
    if isinstance(p, Simplex):
        base = p.mass
    elif isinstance(p, Channel):
        base = p.rows
    else:
        raise TypeError("product_extension expects a Simplex or Channel")
    size = base.size ** n
    check_budget(size, budget, f"{n}-fold product law")
    with np.errstate(divide="ignore"):
        logbase = np.log(base)
    logmass = logbase
    for _ in range(n - 1):
        logmass = _log_kron(logmass, logbase)
    mass = np.exp(logmass)
    if isinstance(p, Simplex):
        return Simplex(mass, tol=1e-9)
    return Channel(mass, tol=1e-9)


def marginals(j: JointLaw) -> tuple[Simplex, Simplex]:
    return j.x_marginal, j.y_marginal


def condition(j: JointLaw, given: str = "x") -> ConditionalRows:
    """Conditional law of one coordinate given the other.

    ``given="x"`` returns rows ``P(y | x)``; ``given="y"`` returns rows
    ``P(x | y)`` (the backward channel).
    """
    if given not in ("x", "y"):
        raise ValueError("given must be 'x' or 'y'")
    m = j.mass if given == "x" else j.mass.T
    totals = m.sum(axis=1)
    defined = totals > 0
    rows = np.full(m.shape, np.nan)
    rows[defined] = m[defined] / totals[defined, None]
    return ConditionalRows(rows, defined)


def enumerate_blocks(k: int, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """All ``k**n`` blocks as rows of an int array, in lexicographic order."""
    check_budget(k**n, budget, f"enumeration of {k}^{n} blocks")
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((k,) * n, dtype=np.int64)
    return grids.reshape(n, -1).T.copy()


def block_index(blocks, k: int) -> np.ndarray:
    """Lexicographic index of each block (rows of ``blocks``)."""
    blocks = np.atleast_2d(np.asarray(blocks, dtype=np.int64))
    weights = k ** np.arange(blocks.shape[1] - 1, -1, -1, dtype=np.int64)
    return blocks @ weights


# --- serialization ---------------------------------------------------------

def law_to_dict(law) -> dict:
    """Serialize a law to a JSON-compatible dict (row-major mass arrays)."""
    if isinstance(law, Simplex):
        return {"kind": "simplex", "labels": _out_labels(law.labels, law.alphabet_size),
                "mass": law.mass.tolist(), "tolerance": law.tol}
    if isinstance(law, Channel):
        return {"kind": "channel",
                "input_labels": _out_labels(law.input_labels, law.input_size),
                "output_labels": _out_labels(law.output_labels, law.output_size),
                "mass": law.rows.tolist(), "tolerance": law.tol}
    if isinstance(law, JointLaw):
        return {"kind": "joint",
                "x_labels": _out_labels(law.x_labels, law.shape[0]),
                "y_labels": _out_labels(law.y_labels, law.shape[1]),
                "mass": law.mass.tolist(), "tolerance": law.tol}
    if isinstance(law, EmpiricalType):
        return {"kind": "empirical_type", "n": law.n,
                "mass": [[f"{int(k)}/{law.n}" for k in row] for row in law.counts]}
    raise TypeError(f"cannot serialize {type(law).__name__}")


def _out_labels(labels, size):
    return list(labels) if labels is not None else [str(i) for i in range(size)]


def law_from_dict(d: dict):
    kind = d.get("kind")
    tol = float(d.get("tolerance", SUM_TOL))
    if kind == "simplex":
        return Simplex(np.asarray(d["mass"], dtype=float), d.get("labels"), tol=tol)
    if kind == "channel":
        return Channel(np.asarray(d["mass"], dtype=float), d.get("input_labels"),
                       d.get("output_labels"), tol=tol)
    if kind == "joint":
        return JointLaw(np.asarray(d["mass"], dtype=float), d.get("x_labels"),
                        d.get("y_labels"), tol=tol)
    if kind == "empirical_type":
        n = int(d["n"])
        counts = []
        for row in d["mass"]:
            out = []
            for entry in row:
                frac = Fraction(entry)
                k = frac * n
                if k.denominator != 1:
                    raise ValueError(f"entry {entry!r} is not a multiple of 1/{n}")
                out.append(int(k))
            counts.append(out)
        return EmpiricalType(np.asarray(counts, dtype=np.int64), n)
    raise ValueError(f"unknown law kind {kind!r}")
