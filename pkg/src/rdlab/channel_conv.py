"""A source code read backwards as a channel code.

The source decoder ``g`` becomes the channel encoder, the backward channel
``P_{X|Y}`` carries the codeword, and the source encoder ``f`` decodes.  With
a bijective ``g`` the decoding error event is ``{g(f(X^n)) != Y^n}``; it has
probability zero under the code-induced law ``P`` and probability ``Q(E)``
under the backward-channel law ``Q``, so ``Q(E)`` lower-bounds ``||P - Q||``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import DEFAULT_BUDGET, check_budget, check_random_state
from .codes import BlockCode
from .distributions import block_index, enumerate_blocks
from .exceptions import ConfigError, InvariantViolation
from .induced import InducedPair, build_induced_P, full_backward_matrix

__all__ = [
    "ChannelExperiment",
    "ErrorEstimate",
    "error_probability_Q",
    "error_probability_P",
    "tv_lower_bound",
    "extend_with_message",
    "TVAudit",
    "wilson_interval",
    "CHANNEL_ROW_FIELDS",
]

_CHUNK = 1 << 20


def wilson_interval(errors: int, trials: int, z: float = 1.0) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


class ErrorEstimate(NamedTuple):
    value: float
    stderr: float
    mode: str
    trials: int = 0
    errors: int = 0

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        if self.mode == "exact":
            return self.value, self.value
        return wilson_interval(self.errors, self.trials, z)

    def agrees_with(self, exact: float, z: float = 3.0) -> bool:
        """Whether ``exact`` lies inside the ``z``-standard-error Wilson interval."""
        lo, hi = self.interval(z)
        return lo - 1e-15 <= exact <= hi + 1e-15


@dataclass(frozen=True, eq=False)
class ChannelExperiment:
    """Channel-coding view of a block code.

    Parameters
    ----------
    code : BlockCode
        Its decoder must be bijective.
    backward : RdSolution, Channel or array
        Backward channel rows ``P(x | y)``.
    mode : {"exact", "monte_carlo"}
    samples : int
        Monte-Carlo trials.
    seed : int, optional
    budget : int
        Bound on source blocks enumerated in exact mode.
    """

    code: BlockCode
    backward: object
    mode: str = "exact"
    samples: int = 1_000_000
    seed: int | None = 0
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if not self.code.is_bijective:
            raise ConfigError("channel experiment needs a bijective decoder (distinct codewords)")
        if self.mode not in ("exact", "monte_carlo"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        rows = full_backward_matrix(self.backward, self.code.y_size)
        used = np.unique(self.code.codewords)
        if np.any(np.isnan(rows[used])):
            raise ConfigError("codebook uses symbols without a backward row")
        rows = np.nan_to_num(rows, nan=0.0)
        rows.setflags(write=False)
        object.__setattr__(self, "backward", rows)


def _exact_correct(exp: ChannelExperiment) -> float:
    """``(1/M) sum_x Q(x | g(f(x)))``: probability the message is recovered."""
    code = exp.code
    check_budget(code.x_size**code.n, exp.budget, "exact error probability",
                  "use mode='monte_carlo'")
    xb = enumerate_blocks(code.x_size, code.n, exp.budget)
    yb = code.codewords[code.encoder]
    with np.errstate(divide="ignore"):
        logb = np.log(exp.backward)
    logq = np.zeros(xb.shape[0])
    for i in range(code.n):
        logq += logb[yb[:, i], xb[:, i]]
    return math.fsum(np.exp(logq).tolist()) / code.M


def _simulate(exp: ChannelExperiment, samples: int, seed) -> int:
    code = exp.code
    rng = check_random_state(seed)
    cdf = np.cumsum(exp.backward, axis=1)
    cdf[:, -1] = 1.0
    errors = 0
    step = max(1, _CHUNK // code.n)
    for s in range(0, samples, step):
        m = min(step, samples - s)
        msg = rng.integers(code.M, size=m)
        y = code.codewords[msg]
        u = rng.random((m, code.n))
        x = (u[..., None] >= cdf[y]).sum(axis=-1)
        decoded = code.encoder[block_index(x, code.x_size)]
        errors += int(np.count_nonzero(decoded != msg))
    return errors


def error_probability_Q(exp: ChannelExperiment) -> ErrorEstimate:
    """Decoding error probability ``Q(E_n)`` over the backward channel.

    Exact mode is deterministic.  Monte-Carlo mode reports the Wilson
    one-sigma half-width as the standard error.
    """
    if exp.code.M == 1:
        return ErrorEstimate(0.0, 0.0, "exact")
    if exp.mode == "exact":
        return ErrorEstimate(max(0.0, 1.0 - _exact_correct(exp)), 0.0, "exact")
    errors = _simulate(exp, exp.samples, exp.seed)
    lo, hi = wilson_interval(errors, exp.samples, 1.0)
    return ErrorEstimate(errors / exp.samples, 0.5 * (hi - lo), "monte_carlo", exp.samples, errors)


def error_probability_P(exp: ChannelExperiment, pair: InducedPair | None = None, *,
                        source=None, samples: int | None = None, seed=None) -> float:
    """Audit that ``P(E_n) = 0``.

    Checks ``g(f(x^n)) == y^n`` on the P-support of ``pair`` (built from the
    experiment's own code when omitted), exhaustively or on ``samples``
    sampled source blocks.  Raises :class:`InvariantViolation` on any
    mismatch; returns the audited error probability (0.0).
    """
    code = exp.code
    if pair is None:
        if source is None:
            raise ValueError("need an induced pair or a source")
        pair = build_induced_P(code, source, exp.backward, exp.budget)
    if samples is None:
        decoded = code.codewords[code.encoder]
        bad = np.any(decoded != pair.y_blocks, axis=1) & (pair.px > 0)
        mass = math.fsum(pair.px[bad].tolist())
        if np.any(bad):
            raise InvariantViolation(f"g(f(x)) differs from the induced Y on mass {mass:.3e}")
        return mass
    rng = check_random_state(seed)
    idx = rng.choice(pair.px.size, size=samples, p=pair.px / pair.px.sum())
    decoded = code.codewords[code.encoder[idx]]
    bad = np.any(decoded != pair.codebook[pair.y_id[idx]], axis=1)
    if np.any(bad):
        raise InvariantViolation(f"{int(bad.sum())} of {samples} sampled blocks decode wrongly")
    return 0.0


def tv_lower_bound(exp: ChannelExperiment, pair: InducedPair | None = None) -> float:
    """``Q(E_n) - P(E_n)``, a lower bound on ``||P_{X^nY^n} - Q_{X^nY^n}||``."""
    q = error_probability_Q(exp).value
    p = 0.0
    if pair is not None:
        p = error_probability_P(exp, pair)
    return max(0.0, q - p)


class TVAudit(NamedTuple):
    tv_extended: float
    tv_plain: float

    @property
    def difference(self) -> float:
        return abs(self.tv_extended - self.tv_plain)


def extend_with_message(pair: InducedPair, code: BlockCode | None = None,
                        budget: int = DEFAULT_BUDGET) -> TVAudit:
    """Compare TV of the joints before and after appending ``M^ = f(X^n)``.

    Both extended laws are built densely over ``X^n x codebook x messages``,
    so this is only for small fixtures.
    """
    code = pair.code if code is None else code
    nx = pair.x_blocks.shape[0]
    n_cw = pair.codebook.shape[0]
    check_budget(nx * n_cw * code.M, budget, "message-extended joints")
    logq = np.zeros((nx, n_cw))
    for i in range(pair.n):
        logq += pair.log_backward[pair.codebook[:, i]][:, pair.x_blocks[:, i]].T
    q = np.exp(logq + pair.log_q_y[None, :])
    p = np.zeros((nx, n_cw))
    p[np.arange(nx), pair.y_id] = pair.px
    ind = np.zeros((nx, code.M))
    ind[np.arange(nx), code.encoder] = 1.0
    p_ext = p[:, :, None] * ind[:, None, :]
    q_ext = q[:, :, None] * ind[:, None, :]
    tv_ext = 0.5 * math.fsum(np.abs(p_ext - q_ext).ravel().tolist())
    tv_plain = 0.5 * math.fsum(np.abs(p - q).ravel().tolist())
    return TVAudit(tv_ext, tv_plain)


CHANNEL_ROW_FIELDS = ("n", "M", "rate", "q_error", "q_error_stderr", "tv_lower_bound",
                      "tv_joint", "tv_joint_mode", "normalized_divergence")
