"""Single-letter rate-distortion optimization.

``R(D)`` is computed with the Blahut-Arimoto alternating minimization at a
fixed slope ``beta`` (the Lagrange multiplier of the distortion constraint),
and an outer bisection over ``beta`` lands on the requested distortion.  Each
inner solve stops once Blahut's upper/lower bound gap on the Lagrangian
drops below ``tol``, so the reported rate carries a certificate rather than a
mere "objective stopped changing" heuristic.

Everything is computed in nats and in log-space; the forward channel rows are
``q(y) exp(-beta d(x, y)) / Z(x)``, which are strictly positive for every
retained reproduction symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_random_state
from .distributions import Channel, JointLaw, Simplex, condition, mutual_information
from .exceptions import NotConverged

__all__ = [
    "DistortionMeasure",
    "RdSolution",
    "RateDistortionSolver",
    "solve_rd",
    "backward_channel",
    "reduce_alphabet",
    "check_membership_a",
    "backward_uniqueness_probe",
    "UniquenessReport",
    "TracePoint",
]


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    """Per-letter distortion ``d(x, y) >= 0`` with ``min_y d(x, y) = 0`` for every ``x``.

    Use :meth:`normalize` to shift an arbitrary nonnegative matrix into this
    form; the per-row offsets add a constant ``E[min_y d(X, y)]`` to every
    achievable distortion.
    """

    matrix: np.ndarray
    # column subsets of a normalized measure may lose a row's zero
    restricted: bool = field(default=False, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, copy=True)
        if m.ndim != 2 or 0 in m.shape:
            raise ValueError(f"distortion matrix must be non-empty 2-d, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("distortion matrix must be finite")
        if np.any(m < 0):
            raise ValueError("distortion matrix has negative entries")
        if not self.restricted and np.any(m.min(axis=1) != 0):
            raise ValueError("each row must have minimum 0; use DistortionMeasure.normalize")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def normalize(cls, matrix) -> tuple["DistortionMeasure", np.ndarray]:
        m = np.asarray(matrix, dtype=float)
        offsets = m.min(axis=1)
        return cls(m - offsets[:, None]), offsets

    @classmethod
    def hamming(cls, kx: int, ky: int | None = None) -> "DistortionMeasure":
        ky = kx if ky is None else ky
        return cls(1.0 - np.eye(kx, ky))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def expected(self, joint) -> float:
        mass = joint.mass if isinstance(joint, JointLaw) else np.asarray(joint)
        return math.fsum((mass * self.matrix).ravel().tolist())

    def d_max(self, source: Simplex) -> float:
        """Smallest distortion reachable at zero rate (best constant output)."""
        return float(np.min(source.mass @ self.matrix))

    def columns(self, keep) -> "DistortionMeasure":
        keep = list(keep)
        full = keep == list(range(self.shape[1]))
        return DistortionMeasure(self.matrix[:, keep], restricted=self.restricted or not full)


class TracePoint(NamedTuple):
    iteration: int
    beta: float
    rate: float
    distortion: float


@dataclass(frozen=True, eq=False)
class RdSolution:
    """Optimizer of ``min I(X;Y)`` subject to ``E d(X,Y) <= D``.

    ``forward``, ``backward`` and ``output_marginal`` are indexed by the
    retained reproduction symbols ``reduced_alphabet`` (original indices into
    the distortion measure's columns).
    """

    source: Simplex
    measure: DistortionMeasure
    target_distortion: float
    rate: float
    distortion: float
    forward: Channel
    backward: Channel
    output_marginal: Simplex
    reduced_alphabet: tuple
    beta: float
    converged: bool = True
    trace: tuple = field(default=(), repr=False)

    @property
    def joint(self) -> JointLaw:
        return self.forward.joint(self.source)

    @property
    def reduced_measure(self) -> DistortionMeasure:
        return self.measure.columns(self.reduced_alphabet)

    @property
    def output_size(self) -> int:
        return len(self.reduced_alphabet)

    @classmethod
    def from_joint(cls, joint: JointLaw, measure: DistortionMeasure | None = None) -> "RdSolution":
        """Wrap a target joint law (e.g. a coordination target) in solution form.

        Output symbols with zero marginal are dropped.  When no distortion
        measure is given, ``d(x, y) = -log P(y | x)`` (clipped, row-normalized)
        is used so that minimum-distortion encoding favours likely pairs.
        """
        mass = joint.mass
        keep = tuple(int(y) for y in np.flatnonzero(mass.sum(axis=0) > 0))
        sub = mass[:, list(keep)]
        source = Simplex(sub.sum(axis=1), tol=1e-9)
        if np.any(source.mass <= 0):
            raise ValueError("target joint must have a strictly positive x-marginal")
        forward = Channel(sub / source.mass[:, None], tol=1e-9)
        if measure is None:
            measure = likelihood_distortion(joint)
        out = Simplex(sub.sum(axis=0), tol=1e-9)
        back = backward_channel(source, forward)
        j = JointLaw(sub, tol=1e-9)
        return cls(source=source, measure=measure, target_distortion=measure.columns(keep).expected(j),
                   rate=mutual_information(j), distortion=measure.columns(keep).expected(j),
                   forward=forward, backward=back, output_marginal=out,
                   reduced_alphabet=keep, beta=math.nan)


def likelihood_distortion(joint: JointLaw, cap: float = 1e3) -> DistortionMeasure:
    """``d(x, y) = -log P(y | x)``, row-normalized; impossible pairs get ``cap``."""
    rows = condition(joint, "x").rows
    with np.errstate(divide="ignore"):
        d = -np.log(rows)
    d = np.minimum(np.nan_to_num(d, nan=cap, posinf=cap), cap)
    return DistortionMeasure.normalize(d)[0]


# --- Blahut-Arimoto at fixed slope -----------------------------------------

class _FixedSlope(NamedTuple):
    logq: np.ndarray
    forward: np.ndarray
    rate: float
    distortion: float
    gap: float
    iterations: int
    converged: bool


def _ba_fixed_slope(px, d, beta, logq, tol, max_iter, settle_threshold=None):
    """Iterate at slope ``beta`` until Blahut's bound gap is below ``tol``.

    With ``settle_threshold`` the loop also keeps going while some symbol has
    mass above the threshold yet is still visibly decaying (``log c < -1e-7``),
    so that symbols with zero optimal mass fall below the threshold.
    """
    logpx = np.log(px)
    neg = -beta * d
    gap = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        a = logq[None, :] + neg
        logz = logsumexp(a, axis=1)
        # log c(y) = log sum_x p(x) exp(-beta d(x,y)) / Z(x)
        logc = logsumexp(logpx[:, None] + neg - logz[:, None], axis=0)
        q = np.exp(logq)
        gap = float(np.max(logc) - np.dot(q, logc))
        logq = logq + logc
        logq -= logsumexp(logq)
        if gap < tol:
            if settle_threshold is None:
                converged = True
                break
            qn = np.exp(logq)
            if not np.any((qn >= settle_threshold) & (logc < -1e-7)):
                converged = True
                break
    a = logq[None, :] + neg
    forward = np.exp(a - logsumexp(a, axis=1)[:, None])
    joint = px[:, None] * forward
    return _FixedSlope(logq, forward, mutual_information(joint),
                       math.fsum((joint * d).ravel().tolist()), gap, it, converged)


def _initial_logq(px, d, beta, rng, noise):
    w = -beta * d
    if noise > 0:
        w = w + noise * rng.standard_normal(d.shape)
    w = np.exp(w - logsumexp(w, axis=1)[:, None])
    q = px @ w
    return np.log(q)


def _degenerate(source, measure, target):
    y_star = int(np.argmin(source.mass @ measure.matrix))
    forward = Channel(np.ones((source.alphabet_size, 1)))
    dist = float(source.mass @ measure.matrix[:, y_star])
    return RdSolution(source=source, measure=measure, target_distortion=target, rate=0.0,
                      distortion=dist, forward=forward,
                      backward=Channel(source.mass[None, :]),
                      output_marginal=Simplex(np.ones(1)), reduced_alphabet=(y_star,),
                      beta=0.0, converged=True, trace=(TracePoint(0, 0.0, 0.0, dist),))


def _check_source(source: Simplex, measure: DistortionMeasure):
    if source.alphabet_size != measure.shape[0]:
        raise ValueError("source alphabet does not match distortion rows")
    if np.any(source.mass <= 0):
        raise ValueError("source must have strictly positive mass on every symbol")


def solve_rd(source: Simplex, d: DistortionMeasure, target_D: float, tol: float = 1e-10,
             *, max_iter: int = 100_000, alphabet=None, init_noise: float = 0.0,
             random_state=None, settle_threshold=None) -> RdSolution:
    """Compute ``R(D)`` and its optimizing channels.

    Parameters
    ----------
    source : Simplex
        Strictly positive source law ``P_X``.
    d : DistortionMeasure
    target_D : float
        Distortion allowance, must be positive.
    tol : float
        Bound-gap tolerance for each fixed-slope solve; the outer bisection
        also stops once the distortion is within ``tol`` of the target.
    alphabet : sequence of int, optional
        Restrict reproduction to these columns of ``d`` (used by
        :func:`reduce_alphabet`).
    init_noise : float
        Scale of log-normal perturbation of the initial forward channel.
    random_state : int or Generator, optional
        Seeds ``init_noise``.

    Returns
    -------
    RdSolution
        For ``target_D >= d.d_max(source)`` the zero-rate solution on the
        best constant output.
    """
    _check_source(source, d)
    if not target_D > 0:
        raise ValueError("target distortion must be positive")
    alphabet = tuple(range(d.shape[1])) if alphabet is None else tuple(int(a) for a in alphabet)
    sub = d.columns(alphabet)
    if target_D >= sub.d_max(source):
        sol = _degenerate(source, sub, target_D)
        return _relabel(sol, d, alphabet)

    px = source.mass
    dm = sub.matrix
    rng = check_random_state(random_state)
    trace = []
    total_iter = 0

    def run(beta, logq):
        nonlocal total_iter
        res = _ba_fixed_slope(px, dm, beta, logq, tol, max_iter, settle_threshold)
        total_iter += res.iterations
        trace.append(TracePoint(total_iter, beta, res.rate, res.distortion))
        return res

    lo, hi = 0.0, 1.0
    res_hi = run(hi, _initial_logq(px, dm, hi, rng, init_noise))
    all_converged = res_hi.converged
    while res_hi.distortion > target_D:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise NotConverged(f"could not bracket slope for D={target_D}")
        res_hi = run(hi, res_hi.logq)
        all_converged &= res_hi.converged
    best = res_hi
    logq = res_hi.logq
    for _ in range(200):
        if abs(best.distortion - target_D) <= tol or hi - lo <= 1e-14 * hi:
            break
        mid = 0.5 * (lo + hi)
        res = run(mid, logq)
        all_converged &= res.converged
        logq = res.logq
        if res.distortion > target_D:
            lo = mid
        else:
            hi, best = mid, res
    forward = Channel(best.forward, tol=1e-9)
    out = Simplex(px @ best.forward, tol=1e-9)
    sol = RdSolution(source=source, measure=sub, target_distortion=target_D, rate=best.rate,
                     distortion=best.distortion, forward=forward,
                     backward=backward_channel(source, forward), output_marginal=out,
                     reduced_alphabet=tuple(range(len(alphabet))), beta=hi,
                     converged=bool(best.converged and all_converged), trace=tuple(trace))
    return _relabel(sol, d, alphabet)


def _relabel(sol: RdSolution, d: DistortionMeasure, alphabet: tuple) -> RdSolution:
    kept = tuple(alphabet[i] for i in sol.reduced_alphabet)
    return RdSolution(source=sol.source, measure=d, target_distortion=sol.target_distortion,
                      rate=sol.rate, distortion=sol.distortion, forward=sol.forward,
                      backward=sol.backward, output_marginal=sol.output_marginal,
                      reduced_alphabet=kept, beta=sol.beta, converged=sol.converged,
                      trace=sol.trace)


def backward_channel(source: Simplex, forward: Channel) -> Channel:
    """Bayes inversion ``P(x | y)`` of ``source`` through ``forward``.

    Rows are indexed by output symbol.  Every output symbol must have positive
    marginal mass; remove the others first with :func:`reduce_alphabet`.
    """
    joint = source.mass[:, None] * forward.rows
    out = joint.sum(axis=0)
    zero = np.flatnonzero(out <= 0)
    if zero.size:
        raise ValueError(f"output symbols {zero.tolist()} have zero mass; "
                         "call reduce_alphabet before inverting")
    return Channel((joint / out[None, :]).T, tol=1e-9)


def reduce_alphabet(sol: RdSolution, threshold: float = 1e-9, *, tol: float = 1e-10,
                    max_iter: int = 200_000) -> RdSolution:
    """Drop reproduction symbols the optimum does not use, then re-solve.

    Symbols whose output mass stays below ``threshold`` after the iteration
    has settled are deleted; the problem is re-solved on the remaining
    symbols at the same target distortion, repeating until nothing else
    drops out.
    """
    if not sol.target_distortion > 0:
        raise ValueError("alphabet reduction requires D > 0")
    current = sol
    while True:
        if current.output_size == 1:
            return current
        # settle at the current slope so unused symbols actually decay
        dm = current.reduced_measure.matrix
        px = current.source.mass
        if math.isnan(current.beta):
            mass = current.output_marginal.mass
        else:
            settled = _ba_fixed_slope(px, dm, current.beta, np.log(current.output_marginal.mass),
                                      tol, max_iter, settle_threshold=threshold)
            mass = np.exp(settled.logq)
        keep = [current.reduced_alphabet[i] for i in np.flatnonzero(mass >= threshold)]
        if not keep:
            raise ValueError(f"threshold {threshold} removes every reproduction symbol")
        if len(keep) == current.output_size:
            return current
        if math.isnan(current.beta):
            raise ValueError("cannot re-solve a solution built from a target joint")
        current = solve_rd(current.source, current.measure, current.target_distortion, tol,
                           alphabet=keep, max_iter=max_iter, settle_threshold=threshold)


def check_membership_a(joint: JointLaw) -> bool:
    """True iff ``P(x | y) > 0`` for all ``x`` and every ``y`` of positive mass."""
    cond = condition(joint, given="y")
    rows = cond.rows[cond.defined]
    return bool(np.all(rows > 0))


# --- estimator -------------------------------------------------------------

class RateDistortionSolver(BaseEstimator):
    """Estimator wrapper around :func:`solve_rd` and :func:`reduce_alphabet`.

    Parameters
    ----------
    target_distortion : float
    tol : float
    max_iter : int
    reduce : bool
        Apply :func:`reduce_alphabet` after solving.
    threshold : float
        Output-mass threshold for the reduction.
    init_noise : float
    random_state : int, optional

    Attributes
    ----------
    solution_ : RdSolution
    rate_, distortion_ : float
    forward_, backward_ : Channel
    output_marginal_ : Simplex
    reduced_alphabet_ : tuple
    """

    def __init__(self, target_distortion=0.1, tol=1e-10, max_iter=100_000, reduce=True,
                 threshold=1e-9, init_noise=0.0, random_state=None):
        self.target_distortion = target_distortion
        self.tol = tol
        self.max_iter = max_iter
        self.reduce = reduce
        self.threshold = threshold
        self.init_noise = init_noise
        self.random_state = random_state

    def fit(self, source, distortion):
        if not isinstance(source, Simplex):
            source = Simplex(source)
        if not isinstance(distortion, DistortionMeasure):
            distortion = DistortionMeasure(distortion)
        sol = solve_rd(source, distortion, self.target_distortion, self.tol,
                       max_iter=self.max_iter, init_noise=self.init_noise,
                       random_state=self.random_state)
        if self.reduce:
            sol = reduce_alphabet(sol, self.threshold, tol=self.tol)
        self.solution_ = sol
        self.rate_ = sol.rate
        self.distortion_ = sol.distortion
        self.forward_ = sol.forward
        self.backward_ = sol.backward
        self.output_marginal_ = sol.output_marginal
        self.reduced_alphabet_ = sol.reduced_alphabet
        return self

    def predict_proba(self, X):
        """Forward-channel rows ``P(y | x)`` for source symbols ``X``."""
        check_is_fitted(self, "solution_")
        return self.forward_.rows[np.asarray(X, dtype=np.int64)]

    def backward_proba(self, Y):
        """Backward-channel rows ``P(x | y)`` for retained output positions ``Y``."""
        check_is_fitted(self, "solution_")
        return self.backward_.rows[np.asarray(Y, dtype=np.int64)]


# --- backward-channel uniqueness probe ----------------------------------------------------

@dataclass
class UniquenessReport:
    max_deviation: float
    backward_channels: list
    alphabets: list
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def merge_duplicate_columns(d: DistortionMeasure) -> tuple[DistortionMeasure, np.ndarray]:
    """Collapse identical distortion columns; returns the merged measure and the
    map from original column to merged column."""
    _, first, inverse = np.unique(d.matrix.T, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    mapping = rank[np.ravel(inverse)]
    return DistortionMeasure(d.matrix[:, np.sort(first)]), mapping


def _merged_backward(sol: RdSolution, mapping: np.ndarray) -> dict:
    """Backward rows keyed by merged symbol, mass-averaged over duplicates."""
    groups: dict[int, list] = {}
    for pos, y in enumerate(sol.reduced_alphabet):
        groups.setdefault(int(mapping[y]), []).append(pos)
    out = {}
    qm = sol.output_marginal.mass
    for key, positions in groups.items():
        w = qm[positions]
        out[key] = (w[:, None] * sol.backward.rows[positions]).sum(axis=0) / w.sum()
    return out


def backward_uniqueness_probe(source: Simplex, d: DistortionMeasure, target_D: float,
                              num_restarts: int = 10, seed=0, *, init_noise: float = 2.0,
                              tol: float = 1e-12, threshold: float = 1e-9) -> UniquenessReport:
    """Re-solve from randomized initial forward channels and compare backward channels.

    Duplicate reproduction columns are merged canonically before comparison,
    since the forward split among duplicates is arbitrary.
    """
    if num_restarts < 2:
        raise ValueError("need at least two restarts")
    _, mapping = merge_duplicate_columns(d)
    rng = check_random_state(seed)
    channels, alphabets, failures = [], [], []
    for r in range(num_restarts):
        try:
            sol = solve_rd(source, d, target_D, tol, init_noise=init_noise,
                           random_state=rng.integers(2**63))
            sol = reduce_alphabet(sol, threshold, tol=tol)
        except NotConverged as exc:
            failures.append(f"restart {r}: {exc}")
            continue
        if not sol.converged:
            failures.append(f"restart {r}: solver did not reach tolerance")
        rows = _merged_backward(sol, mapping)
        channels.append(rows)
        alphabets.append(tuple(sorted(rows)))
    dev = 0.0
    if len(set(alphabets)) > 1:
        failures.append(f"restarts retained different alphabets: {sorted(set(alphabets))}")
        dev = math.inf
    else:
        for a in range(len(channels)):
            for b in range(a + 1, len(channels)):
                for key in channels[a]:
                    dev = max(dev, float(np.max(np.abs(channels[a][key] - channels[b][key]))))
    return UniquenessReport(dev, channels, alphabets, failures)
