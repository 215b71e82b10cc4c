"""Block codes ``(f_n, g_n)`` and their constructors.

A :class:`BlockCode` stores the encoder as a dense table over all ``|X|^n``
source blocks (lexicographic order) and the decoder as a list of ``M``
codewords, possibly with repeats.  Messages are 0-based.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from math import comb
from typing import Callable, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DEFAULT_BUDGET, check_blocks, check_budget, check_random_state
from .distributions import JointLaw, Simplex, block_index, enumerate_blocks, product_extension
from .exceptions import ConfigError, ResourceError
from .rd_solver import DistortionMeasure, RdSolution

__all__ = [
    "BlockCode",
    "GoodnessReport",
    "optimal_code_exhaustive",
    "lloyd_code",
    "random_coordination_code",
    "append_pathological_codeword",
    "goodness_report",
    "block_distortion",
    "vanishing_slack_schedule",
    "rate_schedule",
    "messages_for_rate",
    "full_target_joint",
    "ExhaustiveBlockCoder",
    "LloydBlockCoder",
    "RandomCoordinationCoder",
]

_CHUNK = 1 << 22


@dataclass(frozen=True, eq=False)
class BlockCode:
    n: int
    x_size: int
    y_size: int
    codewords: np.ndarray
    encoder: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        cw = np.array(self.codewords, dtype=np.int64, copy=True)
        if cw.ndim != 2 or cw.shape[1] != self.n or cw.shape[0] < 1:
            raise ValueError(f"codewords must have shape (M, {self.n}), got {cw.shape}")
        if np.any(cw < 0) or np.any(cw >= self.y_size):
            raise ValueError("codeword symbols outside the reproduction alphabet")
        enc = np.array(self.encoder, dtype=np.int64, copy=True)
        if enc.shape != (self.x_size**self.n,):
            raise ValueError(f"encoder must be defined on all {self.x_size**self.n} source blocks")
        if np.any(enc < 0) or np.any(enc >= cw.shape[0]):
            raise ValueError("encoder maps to a nonexistent message")
        cw.setflags(write=False)
        enc.setflags(write=False)
        object.__setattr__(self, "codewords", cw)
        object.__setattr__(self, "encoder", enc)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    @property
    def rate(self) -> float:
        """``(1/n) log M`` in nats per symbol."""
        return math.log(self.M) / self.n

    @property
    def is_bijective(self) -> bool:
        return np.unique(self.codewords, axis=0).shape[0] == self.M

    def encode(self, xblocks) -> np.ndarray:
        x = check_blocks(xblocks, self.x_size, self.n)
        return self.encoder[block_index(x, self.x_size)]

    def decode(self, messages) -> np.ndarray:
        return self.codewords[np.asarray(messages, dtype=np.int64)]

    def reconstruct(self, xblocks) -> np.ndarray:
        return self.decode(self.encode(xblocks))

    def codeword_indices(self) -> np.ndarray:
        """Lexicographic index of each codeword in ``Y^n``."""
        return block_index(self.codewords, self.y_size)

    # -- text format --

    def to_text(self) -> str:
        lines = ["# rdlab block code v1"]
        for key in sorted(self.metadata):
            lines.append(f"# {key}: {json.dumps(self.metadata[key], sort_keys=True)}")
        lines += [f"n {self.n}", f"M {self.M}", f"x_alphabet {self.x_size}",
                  f"y_alphabet {self.y_size}", "codewords"]
        lines += [" ".join(str(int(s)) for s in cw) for cw in self.codewords]
        lines.append("encoder")
        lines.append(" ".join(f"{m}*{r}" for m, r in _run_lengths(self.encoder)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BlockCode":
        meta, fields, codewords, encoder = {}, {}, [], None
        section = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    meta[key.strip()] = json.loads(value)
                continue
            if line in ("codewords", "encoder"):
                section = line
                continue
            if section == "codewords":
                codewords.append([int(t) for t in line.split()])
            elif section == "encoder":
                runs = [tok.split("*") for tok in line.split()]
                encoder = np.concatenate([np.full(int(r), int(m), dtype=np.int64) for m, r in runs])
            else:
                key, value = line.split()
                fields[key] = int(value)
        if encoder is None or len(codewords) != fields.get("M"):
            raise ValueError("malformed block code text")
        return cls(fields["n"], fields["x_alphabet"], fields["y_alphabet"],
                   np.asarray(codewords, dtype=np.int64), encoder, meta)


def _run_lengths(arr):
    if arr.size == 0:
        return []
    change = np.flatnonzero(np.diff(arr)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [arr.size]])
    return [(int(arr[s]), int(e - s)) for s, e in zip(starts, ends)]


class GoodnessReport(NamedTuple):
    rate_gap: float
    expected_distortion: float
    expected_tv_to_target: float
    mode: str = "exact"
    distortion_stderr: float = 0.0
    tv_stderr: float = 0.0


# --- helpers ----------------------------------------------------------------

def block_distortion(xblocks: np.ndarray, codewords: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Matrix of total distortions ``sum_i d(x_i, c_i)``, shape (len(xblocks), len(codewords))."""
    out = np.zeros((xblocks.shape[0], codewords.shape[0]))
    for i in range(xblocks.shape[1]):
        out += d[xblocks[:, i]][:, codewords[:, i]]
    return out


def _nearest(xblocks, codewords, d):
    """Minimum-distortion codeword for every block, lowest index on ties."""
    idx = np.empty(xblocks.shape[0], dtype=np.int64)
    dist = np.empty(xblocks.shape[0])
    step = max(1, _CHUNK // max(1, codewords.shape[0]))
    for s in range(0, xblocks.shape[0], step):
        bd = block_distortion(xblocks[s:s + step], codewords, d)
        idx[s:s + step] = np.argmin(bd, axis=1)
        dist[s:s + step] = bd[np.arange(bd.shape[0]), idx[s:s + step]]
    return idx, dist


def _nearest_type(xblocks, codewords, pxy):
    """Codeword whose joint type with the block is closest in L1 to ``pxy``."""
    kx, ky = pxy.shape
    n, M, K = xblocks.shape[1], codewords.shape[0], kx * ky
    target = pxy.ravel()
    idx = np.empty(xblocks.shape[0], dtype=np.int64)
    step = max(1, _CHUNK // (M * max(n, K)))
    for s in range(0, xblocks.shape[0], step):
        x = xblocks[s:s + step]
        rows = x.shape[0] * M
        cells = (x[:, None, :] * ky + codewords[None, :, :]).reshape(rows, n)
        flat = (np.arange(rows)[:, None] * K + cells).ravel()
        counts = np.bincount(flat, minlength=rows * K).reshape(x.shape[0], M, K)
        idx[s:s + step] = np.argmin(np.abs(counts / n - target).sum(axis=-1), axis=1)
    return idx


def _source_blocks(source: Simplex, n: int, budget: int):
    check_budget(source.alphabet_size**n, budget, f"{source.alphabet_size}^{n} source blocks",
                 "reduce n or raise the budget")
    blocks = enumerate_blocks(source.alphabet_size, n, budget)
    probs = product_extension(source, n, budget).mass
    return blocks, probs


def _measure_matrix(d) -> np.ndarray:
    return d.matrix if isinstance(d, DistortionMeasure) else np.asarray(d, dtype=float)


# --- constructors -----------------------------------------------------------

def optimal_code_exhaustive(source: Simplex, d: DistortionMeasure, n: int, M: int,
                            budget: int = DEFAULT_BUDGET) -> BlockCode:
    """Minimum expected-distortion code by exhaustive codebook search.

    Every multiset of ``M`` codewords from ``Y^n`` is scored; the first
    minimizer in lexicographic multiset order wins, and the encoder maps each
    source block to its nearest codeword (lowest message index on ties).
    """
    dm = _measure_matrix(d)
    ky = dm.shape[1]
    space = ky ** (n * M)
    if space > budget:
        raise ResourceError(f"exhaustive search space |Y|^(nM) = {space} exceeds budget {budget}; "
                            "use lloyd_code instead")
    xb, px = _source_blocks(source, n, budget)
    yb = enumerate_blocks(ky, n, budget)
    full = block_distortion(xb, yb, dm)
    n_books = comb(yb.shape[0] + M - 1, M)
    best_cost, best_book = math.inf, None
    books = itertools.combinations_with_replacement(range(yb.shape[0]), M)
    batch = max(1, (1 << 21) // max(1, xb.shape[0] * M))
    done = 0
    while done < n_books:
        chunk = np.array(list(itertools.islice(books, batch)), dtype=np.int64)
        done += chunk.shape[0]
        costs = px @ full[:, chunk].min(axis=2)
        k = int(np.argmin(costs))
        if costs[k] < best_cost - 1e-15:
            best_cost, best_book = costs[k], chunk[k]
    codewords = yb[best_book]
    enc, _ = _nearest(xb, codewords, dm)
    return BlockCode(n, source.alphabet_size, ky, codewords, enc,
                     {"constructor": "exhaustive"})


def _centroids(xb, px, assign, codewords, dm):
    """Per-cell minimum expected-distortion codeword (additive per letter)."""
    M = codewords.shape[0]
    kx = dm.shape[0]
    new = codewords.copy()
    occupied = np.bincount(assign, weights=px, minlength=M) > 0
    for i in range(xb.shape[1]):
        w = np.bincount(assign * kx + xb[:, i], weights=px, minlength=M * kx).reshape(M, kx)
        new[:, i] = np.argmin(w @ dm, axis=1)
    new[~occupied] = codewords[~occupied]
    return new


def lloyd_code(source: Simplex, d: DistortionMeasure, n: int, M: int, seed=None,
               max_iters: int = 100, budget: int = DEFAULT_BUDGET,
               init: np.ndarray | None = None) -> BlockCode:
    """Generalized Lloyd iteration over block codes.

    Alternates nearest-codeword partition and per-cell centroid steps until
    the expected distortion stops improving.  The distortion after each
    iteration is kept in ``metadata["history"]``.
    """
    dm = _measure_matrix(d)
    ky = dm.shape[1]
    xb, px = _source_blocks(source, n, budget)
    rng = check_random_state(seed)
    if init is not None:
        codewords = np.asarray(init, dtype=np.int64).copy()
    else:
        n_y = ky**n
        if M <= n_y:
            picks = rng.choice(n_y, size=M, replace=False)
            codewords = np.stack(np.unravel_index(np.sort(picks), (ky,) * n), axis=1)
        else:
            codewords = rng.integers(0, ky, size=(M, n))
    assign, dist = _nearest(xb, codewords, dm)
    cost = float(px @ dist)
    history = [cost / n]
    for _ in range(max_iters):
        cand = _centroids(xb, px, assign, codewords, dm)
        cand_assign, cand_dist = _nearest(xb, cand, dm)
        cand_cost = float(px @ cand_dist)
        if not cand_cost < cost - 1e-15:
            break
        codewords, assign, cost = cand, cand_assign, cand_cost
        history.append(cost / n)
    meta = {"constructor": "lloyd", "seed": seed if isinstance(seed, (int, type(None))) else None,
            "history": history}
    return BlockCode(n, source.alphabet_size, ky, codewords, assign, meta)


def rate_schedule(mutual_info: float, scale: float = 1.0,
                  delta: float = 0.0) -> Callable[[int], float]:
    """Rate schedule ``R_n = I + scale * n^(-1/2 + delta)``."""
    if scale < 0:
        raise ConfigError("rate slack scale must be nonnegative")

    def schedule(n: int) -> float:
        return mutual_info + scale * n ** (-0.5 + delta)

    schedule.description = f"I + {scale:g} n^(-1/2+{delta:g})"  # type: ignore[attr-defined]
    return schedule


def vanishing_slack_schedule(mutual_info: float, delta: float = 0.25) -> Callable[[int], float]:
    """Slowly converging schedule ``R_n = I + n^(-1/2 + delta)``, ``delta > 0``."""
    if not delta > 0:
        raise ConfigError("delta must be positive")
    return rate_schedule(mutual_info, 1.0, delta)


def messages_for_rate(n: int, rate: float) -> int:
    """``M = ceil(exp(n R))``, guarded against float noise at exact integers."""
    val = math.exp(n * rate)
    r = round(val)
    if abs(val - r) <= 1e-9 * max(1.0, val):
        return max(1, int(r))
    return max(1, math.ceil(val))


def random_coordination_code(rd: RdSolution, n: int, rate_schedule: Callable[[int], float],
                             seed=None, *, distinct: bool = False, max_retries: int = 1000,
                             M: int | None = None, budget: int = DEFAULT_BUDGET,
                             encoder: str = "distortion") -> BlockCode:
    """Random codebook drawn i.i.d. from the n-fold output marginal.

    ``M = ceil(exp(n * rate_schedule(n)))`` unless ``M`` is given.  The
    encoder picks the minimum-distortion codeword under ``rd.measure``, or
    with ``encoder="type"`` the codeword whose joint type is closest to the
    target joint (lowest index on ties either way).  With
    ``distinct=True`` repeated codewords are redrawn (with fresh randomness,
    at most ``max_retries`` rounds) so that the decoder is bijective.
    """
    rate = rate_schedule(n)
    if rate < rd.rate - 1e-12:
        raise ConfigError(f"scheduled rate {rate} is below I(X;Y) = {rd.rate}")
    if M is None:
        M = messages_for_rate(n, rate)
    alphabet = np.asarray(rd.reduced_alphabet, dtype=np.int64)
    q = rd.output_marginal.mass
    support = alphabet[q > 0]
    qs = q[q > 0] / q[q > 0].sum()
    if distinct and M > support.size**n:
        raise ConfigError(f"cannot draw {M} distinct codewords from {support.size}^{n} blocks")
    rng = check_random_state(seed)
    draws = rng.choice(support.size, size=(M, n), p=qs)
    if distinct:
        for _ in range(max_retries):
            _, first = np.unique(draws, axis=0, return_index=True)
            dup = np.setdiff1d(np.arange(M), first)
            if dup.size == 0:
                break
            draws[dup] = rng.choice(support.size, size=(dup.size, n), p=qs)
        else:
            raise ConfigError(f"could not obtain {M} distinct codewords in {max_retries} rounds")
    codewords = support[draws]
    dm = rd.measure.matrix
    xb, _ = _source_blocks(rd.source, n, budget)
    if encoder == "distortion":
        enc, _ = _nearest(xb, codewords, dm)
    elif encoder == "type":
        enc = _nearest_type(xb, codewords, full_target_joint(rd, dm.shape[1]))
    else:
        raise ConfigError(f"unknown encoder {encoder!r}")
    meta = {"constructor": "random", "seed": seed if isinstance(seed, (int, type(None))) else None,
            "schedule": getattr(rate_schedule, "description", "custom"),
            "scheduled_rate": rate, "distinct": distinct, "encoder": encoder}
    return BlockCode(n, rd.source.alphabet_size, dm.shape[1], codewords, enc, meta)


def append_pathological_codeword(code: BlockCode, bad_pair: tuple[int, int], backward,
                                 source: Simplex | None = None) -> BlockCode:
    """Add one codeword that realizes a pair of zero backward mass.

    Parameters
    ----------
    code : BlockCode
    bad_pair : (x, y)
        Pair with ``P(x | y) = 0`` under ``backward``.
    backward : ndarray or Channel
        Full backward matrix, rows indexed by reproduction symbol.
    source : Simplex, optional
        When given, the remapped block is ``(x, m, ..., m)`` with ``m`` the
        least likely source symbol, so that the modification carries as
        little probability as possible; otherwise ``(x, ..., x)``.

    Returns
    -------
    BlockCode
        ``M + 1`` messages; the chosen block is sent to the new message and
        its codeword has ``y`` in the first position, the other positions
        copied from the block's previous reconstruction.
    """
    x, y = bad_pair
    rows = getattr(backward, "rows", backward)
    rows = np.asarray(rows, dtype=float)
    if rows[y, x] != 0:
        raise ValueError(f"P(x={x} | y={y}) = {rows[y, x]} > 0; pair is not pathological")
    filler = x if source is None else int(np.argmin(source.mass))
    xblock = np.full(code.n, filler, dtype=np.int64)
    xblock[0] = x
    idx = int(block_index(xblock, code.x_size)[0])
    yblock = code.codewords[code.encoder[idx]].copy()
    yblock[0] = y
    codewords = np.vstack([code.codewords, yblock[None, :]])
    enc = code.encoder.copy()
    enc[idx] = code.M
    meta = dict(code.metadata)
    meta["pathological"] = {"x_block": xblock.tolist(), "y_block": yblock.tolist()}
    return BlockCode(code.n, code.x_size, code.y_size, codewords, enc, meta)


def _pair_counts(xb, yb, kx, ky):
    """Per-block joint type counts, shape (n_blocks, kx*ky)."""
    nb = xb.shape[0]
    cells = xb * ky + yb
    flat = (np.arange(nb)[:, None] * (kx * ky) + cells).ravel()
    return np.bincount(flat, minlength=nb * kx * ky).reshape(nb, kx * ky)


def full_target_joint(target, y_size: int) -> np.ndarray:
    """Target joint as a dense ``|X| x |Y|`` array over the full reproduction alphabet."""
    if isinstance(target, RdSolution):
        mass = np.zeros((target.source.alphabet_size, y_size))
        mass[:, list(target.reduced_alphabet)] = target.joint.mass
        return mass
    if isinstance(target, JointLaw):
        return target.mass
    return np.asarray(target, dtype=float)


def goodness_report(code: BlockCode, source: Simplex, d, target, *, mode: str = "auto",
                    budget: int = DEFAULT_BUDGET, samples: int = 1_000_000, seed=None,
                    mutual_info: float | None = None) -> GoodnessReport:
    """Rate gap, per-letter expected distortion and ``E||T - P_XY||`` of a code.

    ``target`` is an :class:`RdSolution` or a target joint law.  Exact mode
    enumerates all source blocks; ``"monte_carlo"`` draws ``samples`` source
    blocks and reports standard errors.
    """
    dm = _measure_matrix(d)
    pxy = full_target_joint(target, code.y_size)
    if mutual_info is None:
        from .distributions import mutual_information
        mutual_info = target.rate if isinstance(target, RdSolution) else mutual_information(pxy)
    kx, ky, n = code.x_size, code.y_size, code.n
    if mode == "auto":
        mode = "exact" if kx**n <= budget else "monte_carlo"
    rate_gap = code.rate - mutual_info
    if mode == "exact":
        check_budget(kx**n, budget, "exact goodness report", "use mode='monte_carlo'")
        xb = enumerate_blocks(kx, n, budget)
        px = product_extension(source, n, budget).mass
        tv = np.empty(xb.shape[0])
        dist = np.empty(xb.shape[0])
        step = max(1, _CHUNK // (kx * ky))
        for s in range(0, xb.shape[0], step):
            x = xb[s:s + step]
            y = code.codewords[code.encoder[s:s + step]]
            counts = _pair_counts(x, y, kx, ky)
            tv[s:s + step] = 0.5 * np.abs(counts / n - pxy.ravel()).sum(axis=1)
            dist[s:s + step] = dm[x, y].sum(axis=1) / n
        return GoodnessReport(rate_gap, math.fsum((px * dist).tolist()),
                              math.fsum((px * tv).tolist()), "exact")
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if samples < 2:
        raise ResourceError("monte_carlo mode needs at least two samples")
    rng = check_random_state(seed)
    tv_all, dist_all = [], []
    step = max(1, _CHUNK // (kx * ky))
    for s in range(0, samples, step):
        m = min(step, samples - s)
        x = rng.choice(kx, size=(m, n), p=source.mass)
        y = code.reconstruct(x)
        counts = _pair_counts(x, y, kx, ky)
        tv_all.append(0.5 * np.abs(counts / n - pxy.ravel()).sum(axis=1))
        dist_all.append(dm[x, y].sum(axis=1) / n)
    tv_all = np.concatenate(tv_all)
    dist_all = np.concatenate(dist_all)
    se = lambda v: float(v.std(ddof=1) / math.sqrt(v.size))
    return GoodnessReport(rate_gap, float(dist_all.mean()), float(tv_all.mean()), "monte_carlo",
                          se(dist_all), se(tv_all))


# --- estimators ---------------------------------------------------------------

class _BlockCoderMixin:
    """transform = encoder, inverse_transform = decoder, predict = g(f(x))."""

    def transform(self, X):
        check_is_fitted(self, "code_")
        return self.code_.encode(X)

    def inverse_transform(self, messages):
        check_is_fitted(self, "code_")
        return self.code_.decode(messages)

    def predict(self, X):
        check_is_fitted(self, "code_")
        return self.code_.reconstruct(X)

    def score(self, X):
        """Negative mean per-letter distortion on the given blocks."""
        check_is_fitted(self, "code_")
        X = check_blocks(X, self.code_.x_size, self.code_.n)
        Y = self.code_.reconstruct(X)
        return -float(self._dm[X, Y].mean())


class ExhaustiveBlockCoder(_BlockCoderMixin, BaseEstimator):
    """Optimal (minimum expected distortion) code found by exhaustive search."""

    def __init__(self, n=2, n_codewords=2, budget=DEFAULT_BUDGET):
        self.n = n
        self.n_codewords = n_codewords
        self.budget = budget

    def fit(self, source, distortion):
        self._dm = _measure_matrix(distortion)
        self.code_ = optimal_code_exhaustive(source, distortion, self.n, self.n_codewords,
                                             self.budget)
        return self


class LloydBlockCoder(_BlockCoderMixin, BaseEstimator):
    """Best of ``n_init`` Lloyd runs (seeds ``random_state + i``)."""

    def __init__(self, n=2, n_codewords=2, n_init=5, max_iter=100, random_state=0,
                 budget=DEFAULT_BUDGET):
        self.n = n
        self.n_codewords = n_codewords
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state
        self.budget = budget

    def fit(self, source, distortion):
        self._dm = _measure_matrix(distortion)
        base = 0 if self.random_state is None else int(self.random_state)
        best, best_cost = None, math.inf
        for i in range(self.n_init):
            code = lloyd_code(source, distortion, self.n, self.n_codewords, base + i,
                              self.max_iter, self.budget)
            cost = code.metadata["history"][-1]
            if cost < best_cost - 1e-15:
                best, best_cost = code, cost
        self.code_ = best
        return self


class RandomCoordinationCoder(_BlockCoderMixin, BaseEstimator):
    """Random coordination code at rate ``I + n^(-1/2 + delta)``."""

    def __init__(self, n=4, delta=0.25, distinct=False, encoder="distortion", random_state=0,
                 budget=DEFAULT_BUDGET):
        self.n = n
        self.delta = delta
        self.distinct = distinct
        self.encoder = encoder
        self.random_state = random_state
        self.budget = budget

    def fit(self, rd: RdSolution, y=None):
        self._dm = rd.measure.matrix
        self.code_ = random_coordination_code(rd, self.n, vanishing_slack_schedule(rd.rate, self.delta),
                                              self.random_state, distinct=self.distinct,
                                              budget=self.budget, encoder=self.encoder)
        return self
