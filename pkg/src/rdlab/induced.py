"""Code-induced joint law ``P`` versus the backward-channel law ``Q``.

For a block code ``(f, g)`` on a memoryless source:

* ``P(x^n, y^n) = prod P_X(x_i) * 1{y^n = g(f(x^n))}`` -- one support point
  per source block, stored sparsely;
* ``Q(x^n, y^n) = |g^{-1}(y^n)| / M * prod P_{X|Y}(x_i | y_i)`` -- a uniform
  codeword pushed through the memoryless backward channel, never
  materialized, only evaluated pointwise.

All reductions go through ``math.fsum`` so results are independent of
summation order.  Divergences return ``math.inf`` when some ``P`` support
point carries zero ``Q`` mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import DEFAULT_BUDGET, check_budget
from .codes import BlockCode, full_target_joint
from .distributions import (
    Channel,
    JointLaw,
    Simplex,
    enumerate_blocks,
    variational_distance,
)
from .exceptions import ResourceError
from .rd_solver import RdSolution

__all__ = [
    "InducedPair",
    "TVResult",
    "build_induced_P",
    "full_backward_matrix",
    "q_mass",
    "normalized_divergence",
    "chain_rule_terms",
    "normalized_block_mi",
    "block_output_entropy",
    "averaged_single_letter_marginal",
    "tv_joint",
    "experiment_row",
    "ROW_FIELDS",
]

#: Default bound on (distinct codewords) x (source blocks) for exact TV.
TV_BUDGET = 2**28


def _fsum(arr) -> float:
    return math.fsum(np.asarray(arr, dtype=float).ravel().tolist())


def full_backward_matrix(backward, y_size: int | None = None) -> np.ndarray:
    """Backward rows ``P(x | y)`` over the whole reproduction alphabet.

    Accepts an :class:`RdSolution` (rows of deleted symbols become NaN), a
    :class:`Channel` or a plain ``|Y| x |X|`` array.
    """
    if isinstance(backward, RdSolution):
        ky = backward.measure.shape[1] if y_size is None else y_size
        rows = np.full((ky, backward.source.alphabet_size), np.nan)
        rows[list(backward.reduced_alphabet)] = backward.backward.rows
        return rows
    if isinstance(backward, Channel):
        return np.array(backward.rows)
    return np.array(backward, dtype=float)


@dataclass(frozen=True, eq=False)
class InducedPair:
    """Sparse ``P`` side plus the ingredients of ``Q`` for one code.

    Attributes
    ----------
    x_blocks : (|X|^n, n) int array
    log_px : log source probability of each block
    px : source probability of each block
    y_id : index into ``codebook`` of ``g(f(x^n))`` for each block
    codebook : distinct codewords, (D, n)
    counts : multiplicity of each distinct codeword in the decoder
    log_backward : log ``P(x | y)``, rows indexed by reproduction symbol
    """

    code: BlockCode
    source: Simplex
    x_blocks: np.ndarray
    log_px: np.ndarray
    px: np.ndarray
    y_id: np.ndarray
    codebook: np.ndarray
    counts: np.ndarray
    backward: np.ndarray
    log_backward: np.ndarray

    @property
    def n(self) -> int:
        return self.code.n

    @property
    def M(self) -> int:
        return self.code.M

    @property
    def log_q_y(self) -> np.ndarray:
        """log of the codebook marginal ``Q_{Y^n}`` on each distinct codeword."""
        return np.log(self.counts / self.M)

    @property
    def p_y(self) -> np.ndarray:
        """``P_{Y^n}`` on each distinct codeword."""
        return np.bincount(self.y_id, weights=self.px, minlength=self.codebook.shape[0])

    @property
    def y_blocks(self) -> np.ndarray:
        """``g(f(x^n))`` for every source block."""
        return self.codebook[self.y_id]

    def log_q_channel(self) -> np.ndarray:
        """``log prod P(x_i | y_i)`` along the P-support, one value per source block."""
        yb = self.y_blocks
        out = np.zeros(self.x_blocks.shape[0])
        for i in range(self.n):
            out += self.log_backward[yb[:, i], self.x_blocks[:, i]]
        return out


def build_induced_P(code: BlockCode, source: Simplex, backward,
                    budget: int = DEFAULT_BUDGET) -> InducedPair:
    """Enumerate the code-induced joint ``P`` and attach ``Q``'s ingredients.

    ``backward`` is an :class:`RdSolution`, a :class:`Channel` or an array of
    rows ``P(x | y)``.  Every symbol used by the codebook must have a defined
    backward row.
    """
    if source.alphabet_size != code.x_size:
        raise ValueError("source alphabet does not match the code")
    check_budget(code.x_size**code.n, budget, "induced joint P", "reduce n or raise the budget")
    rows = full_backward_matrix(backward, code.y_size)
    if rows.shape != (code.y_size, code.x_size):
        raise ValueError(f"backward matrix has shape {rows.shape}, "
                         f"expected {(code.y_size, code.x_size)}")
    used = np.unique(code.codewords)
    if np.any(np.isnan(rows[used])):
        raise ValueError("codebook uses reproduction symbols without a backward row "
                         "(deleted by alphabet reduction)")
    xb = enumerate_blocks(code.x_size, code.n, budget)
    with np.errstate(divide="ignore"):
        logp = np.log(source.mass)
        log_back = np.log(np.nan_to_num(rows, nan=0.0))
    log_px = np.zeros(xb.shape[0])
    for i in range(code.n):
        log_px += logp[xb[:, i]]
    codebook, inverse, counts = np.unique(code.codewords, axis=0, return_inverse=True,
                                          return_counts=True)
    inverse = np.ravel(inverse)
    y_id = inverse[code.encoder]
    return InducedPair(code=code, source=source, x_blocks=xb, log_px=log_px, px=np.exp(log_px),
                       y_id=y_id, codebook=codebook, counts=counts, backward=rows,
                       log_backward=log_back)


def q_mass(pair: InducedPair, x_block, y_block) -> float:
    """``Q(x^n, y^n)``, evaluated in log-space."""
    x = np.asarray(x_block, dtype=np.int64)
    y = np.asarray(y_block, dtype=np.int64)
    if x.shape != (pair.n,) or y.shape != (pair.n,):
        raise ValueError(f"blocks must have length {pair.n}")
    if np.any(x < 0) or np.any(x >= pair.code.x_size) or np.any(y < 0) or np.any(y >= pair.code.y_size):
        raise ValueError("block symbols outside the alphabets")
    hit = np.flatnonzero(np.all(pair.codebook == y, axis=1))
    if hit.size == 0:
        return 0.0
    logq = math.log(pair.counts[hit[0]] / pair.M) + math.fsum(pair.log_backward[y, x].tolist())
    return math.exp(logq)


def _divergence_terms(pair: InducedPair) -> tuple[np.ndarray, bool]:
    log_qc = pair.log_q_channel()
    log_q = pair.log_q_y[pair.y_id] + log_qc
    support = pair.px > 0
    escaped = bool(np.any(support & np.isneginf(log_q)))
    return log_q, escaped


def normalized_divergence(pair: InducedPair) -> float:
    """``(1/n) D(P || Q)`` in nats; ``math.inf`` if P escapes Q's support."""
    log_q, escaped = _divergence_terms(pair)
    if escaped:
        return math.inf
    s = pair.px > 0
    return max(0.0, _fsum(pair.px[s] * (pair.log_px[s] - log_q[s]))) / pair.n


def chain_rule_terms(pair: InducedPair) -> tuple[float, float]:
    """``(D(P || P_{Y^n} Q_{X^n|Y^n}), D(P_{Y^n} || Q_{Y^n}))``, unnormalized.

    The first term is ``math.inf`` when P escapes the backward channel's
    support; the second is always finite because every used codeword has
    positive codebook mass.
    """
    s = pair.px > 0
    log_qc = pair.log_q_channel()
    py = pair.p_y
    with np.errstate(divide="ignore"):
        log_py = np.log(py)
    if np.any(np.isneginf(log_qc[s])):
        term1 = math.inf
    else:
        term1 = max(0.0, _fsum(pair.px[s] * (pair.log_px[s] - log_py[pair.y_id[s]] - log_qc[s])))
    used = py > 0
    term2 = max(0.0, _fsum(py[used] * (log_py[used] - pair.log_q_y[used])))
    return term1, term2


def block_output_entropy(pair: InducedPair) -> float:
    """``H(Y^n)`` under ``P`` in nats."""
    py = pair.p_y
    py = py[py > 0]
    return max(0.0, -_fsum(py * np.log(py)))


def normalized_block_mi(pair: InducedPair) -> float:
    """``(1/n) I(X^n; Y^n)`` under ``P``, from the sparse joint.

    Computed as ``D(P || P_{X^n} P_{Y^n})``; for a deterministic code this
    equals ``(1/n) H(Y^n)``.
    """
    s = pair.px > 0
    log_py = np.log(pair.p_y[pair.y_id[s]])
    # log P(x,y) - log P(x) - log P(y) with P(x,y) = P(x) on the support
    return max(0.0, _fsum(pair.px[s] * (pair.log_px[s] - pair.log_px[s] - log_py))) / pair.n


def averaged_single_letter_marginal(pair: InducedPair) -> JointLaw:
    """``(1/n) sum_i P_{X_i Y_i}``, the law of ``(X_J, Y_J)`` for uniform ``J``."""
    kx, ky = pair.code.x_size, pair.code.y_size
    yb = pair.y_blocks
    acc = np.zeros(kx * ky)
    for i in range(pair.n):
        acc += np.bincount(pair.x_blocks[:, i] * ky + yb[:, i], weights=pair.px,
                           minlength=kx * ky)
    return JointLaw((acc / pair.n).reshape(kx, ky), tol=1e-9)


class TVResult(NamedTuple):
    value: float
    mode: str  # "exact" or "lower_bound"


def tv_joint(pair: InducedPair, budget: int = TV_BUDGET, *, fallback: bool = True) -> TVResult:
    """Variational distance ``||P - Q||`` between the blocklength-n joints.

    Exact when (distinct codewords) x (source blocks) fits in ``budget``;
    otherwise, with ``fallback``, returns the channel-coding lower bound
    ``Q(error)`` flagged as ``"lower_bound"``.
    """
    n_cw = pair.codebook.shape[0]
    nx = pair.x_blocks.shape[0]
    if n_cw * nx > budget:
        if not fallback:
            raise ResourceError(f"exact TV needs {n_cw * nx} evaluations, budget {budget}")
        from .channel_conv import ChannelExperiment, tv_lower_bound
        exp = ChannelExperiment(pair.code, pair.backward)
        return TVResult(tv_lower_bound(exp), "lower_bound")
    log_qy = pair.log_q_y
    partial = []
    step = max(1, (1 << 22) // nx)
    xb = pair.x_blocks
    for s in range(0, n_cw, step):
        cw = pair.codebook[s:s + step]
        logq = np.zeros((cw.shape[0], nx))
        for i in range(pair.n):
            logq += pair.log_backward[cw[:, i]][:, xb[:, i]]
        q = np.exp(logq + log_qy[s:s + step, None])
        p = np.zeros_like(q)
        rows = pair.y_id - s
        inside = (rows >= 0) & (rows < cw.shape[0])
        p[rows[inside], np.flatnonzero(inside)] = pair.px[inside]
        partial.append(_fsum(np.abs(p - q)))
    return TVResult(0.5 * math.fsum(partial), "exact")


ROW_FIELDS = ("n", "M", "rate", "expected_distortion", "normalized_divergence", "term1_over_n",
              "term2_over_n", "normalized_block_mi", "block_entropy_over_n",
              "tv_avg_marginal_to_target", "tv_joint", "tv_joint_mode")


def experiment_row(pair: InducedPair, target, d=None, *, tv_budget: int = TV_BUDGET) -> dict:
    """One per-n sweep row of all induced-law functionals."""
    t1, t2 = chain_rule_terms(pair)
    avg = averaged_single_letter_marginal(pair)
    pxy = full_target_joint(target, pair.code.y_size)
    dist = math.nan
    if d is not None:
        dm = getattr(d, "matrix", d)
        dist = _fsum(avg.mass * dm)
    tv = tv_joint(pair, tv_budget)
    return {
        "n": pair.n,
        "M": pair.M,
        "rate": pair.code.rate,
        "expected_distortion": dist,
        "normalized_divergence": normalized_divergence(pair),
        "term1_over_n": t1 / pair.n,
        "term2_over_n": t2 / pair.n,
        "normalized_block_mi": normalized_block_mi(pair),
        "block_entropy_over_n": block_output_entropy(pair) / pair.n,
        "tv_avg_marginal_to_target": variational_distance(avg.mass, pxy),
        "tv_joint": tv.value,
        "tv_joint_mode": tv.mode,
    }
