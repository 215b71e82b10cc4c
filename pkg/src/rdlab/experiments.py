"""Batch experiments behind the command-line interface.

An experiment is described by a JSON config (see :class:`ExperimentConfig`)
and produces rows, one per grid point, ordered by the grid regardless of the
order in which a worker pool finishes them.  Every random choice is seeded
from ``(seed, n)`` so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ._validation import DEFAULT_BUDGET
from .channel_conv import ChannelExperiment, error_probability_P, error_probability_Q, tv_lower_bound
from .codes import (
    BlockCode,
    append_pathological_codeword,
    vanishing_slack_schedule,
    goodness_report,
    lloyd_code,
    messages_for_rate,
    optimal_code_exhaustive,
    random_coordination_code,
    rate_schedule,
)
from .distributions import JointLaw, Simplex, law_from_dict, to_bits
from .exceptions import ConfigError, ResourceError
from .induced import TV_BUDGET, build_induced_P, experiment_row, full_backward_matrix, normalized_divergence, tv_joint
from .rd_solver import DistortionMeasure, RdSolution, reduce_alphabet, solve_rd
from . import svg

SCHEMA_VERSION = 1
CONSTRUCTORS = ("best", "exhaustive", "lloyd", "random")


@dataclass
class ExperimentConfig:
    """Declarative experiment description.

    ``source`` is a probability list (or a serialized simplex); ``distortion``
    a matrix or ``"hamming"``.  ``target_joint`` switches to a coordination
    target, in which case ``target_distortion`` is ignored.
    """

    source: list
    distortion: object = "hamming"
    target_distortion: float = 0.2
    target_joint: list | None = None
    delta: float = 0.25
    slack_scale: float = 0.5
    n_grid: list = field(default_factory=lambda: [2, 4, 6, 8, 10])
    d_grid: list = field(default_factory=list)
    constructor: str = "best"
    encoder: str = "distortion"
    distinct: bool = False
    messages: int | None = None
    seed: int = 0
    lloyd_inits: int = 10
    monte_carlo_samples: int = 0
    budget: int = DEFAULT_BUDGET
    tv_budget: int = TV_BUDGET
    pathological: list | None = None
    solver_tol: float = 1e-10
    output_dir: str = "out"

    def __post_init__(self):
        grid = list(self.n_grid)
        if not grid or any(int(b) <= int(a) for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid must be non-empty and strictly increasing")
        if any(int(n) < 1 for n in grid):
            raise ConfigError("blocklengths must be positive")
        self.n_grid = [int(n) for n in grid]
        if not self.target_distortion > 0:
            raise ConfigError("target_distortion must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.constructor not in CONSTRUCTORS:
            raise ConfigError(f"constructor must be one of {CONSTRUCTORS}")
        if self.encoder not in ("distortion", "type"):
            raise ConfigError("encoder must be 'distortion' or 'type'")
        if self.messages is not None and int(self.messages) < 1:
            raise ConfigError("messages must be >= 1")
        if any(not d > 0 for d in self.d_grid):
            raise ConfigError("d_grid entries must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"schema"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "source" not in d:
            raise ConfigError("config needs a 'source'")
        try:
            return cls(**{k: v for k, v in d.items() if k in known})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schema"] = SCHEMA_VERSION
        return out

    # -- derived objects --

    def source_law(self) -> Simplex:
        try:
            if isinstance(self.source, dict):
                return law_from_dict(self.source)
            return Simplex(np.asarray(self.source, dtype=float))
        except ValueError as exc:
            raise ConfigError(f"bad source: {exc}") from exc

    def measure(self) -> DistortionMeasure:
        k = len(self.source_law())
        if self.distortion == "hamming":
            return DistortionMeasure.hamming(k)
        mat = self.distortion["matrix"] if isinstance(self.distortion, dict) else self.distortion
        try:
            return DistortionMeasure(np.asarray(mat, dtype=float))
        except ValueError as exc:
            raise ConfigError(f"bad distortion matrix: {exc}") from exc

    def target(self) -> RdSolution:
        """The single-letter target: the reduced R(D) solution or a coordination joint."""
        source = self.source_law()
        if self.target_joint is not None:
            try:
                joint = JointLaw(np.asarray(self.target_joint, dtype=float))
            except ValueError as exc:
                raise ConfigError(f"bad target_joint: {exc}") from exc
            if not np.allclose(joint.x_marginal.mass, source.mass, atol=1e-12):
                raise ConfigError("target_joint x-marginal differs from source")
            measure = None if self.distortion == "hamming" else self.measure()
            return RdSolution.from_joint(joint, measure)
        sol = solve_rd(source, self.measure(), self.target_distortion, self.solver_tol)
        return reduce_alphabet(sol, tol=self.solver_tol)


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(data)


def point_seed(seed: int, n: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(n)]).generate_state(1, np.uint32)[0])


# --- code construction --------------------------------------------------------

def _on_reduced(code: BlockCode, alphabet: tuple, y_size: int) -> BlockCode:
    symbols = np.asarray(alphabet, dtype=np.int64)
    return BlockCode(code.n, code.x_size, y_size, symbols[code.codewords], code.encoder,
                     code.metadata)


def build_code(cfg: ExperimentConfig, rd: RdSolution, n: int, *, bijective: bool = False) -> BlockCode:
    """Construct the configured code at blocklength ``n`` for target ``rd``."""
    if bijective:
        schedule = vanishing_slack_schedule(rd.rate, cfg.delta)
    else:
        schedule = rate_schedule(rd.rate, cfg.slack_scale)
    M = int(cfg.messages) if cfg.messages is not None else messages_for_rate(n, schedule(n))
    seed = point_seed(cfg.seed, n)
    if cfg.constructor == "random" or bijective:
        return random_coordination_code(rd, n, schedule, seed, distinct=cfg.distinct or bijective,
                                        M=M, budget=cfg.budget, encoder=cfg.encoder)
    sub = rd.reduced_measure
    y_size = rd.measure.shape[1]
    kind = cfg.constructor
    if kind == "best":
        kind = "exhaustive" if sub.shape[1] ** (n * M) <= cfg.budget else "lloyd"
    if kind == "exhaustive":
        code = optimal_code_exhaustive(rd.source, sub, n, M, cfg.budget)
    else:
        best = None
        for i in range(cfg.lloyd_inits):
            c = lloyd_code(rd.source, sub, n, M, seed + i, budget=cfg.budget)
            if best is None or c.metadata["history"][-1] < best.metadata["history"][-1] - 1e-15:
                best = c
        code = best
    code.metadata.update({"schedule": schedule.description, "seed": seed})
    return _on_reduced(code, rd.reduced_alphabet, y_size)


# --- sweep points -------------------------------------------------------------

DIVERGENCE_FIELDS = ("n", "M", "rate", "expected_distortion", "normalized_divergence",
                   "term1_over_n", "term2_over_n", "normalized_block_mi", "block_entropy_over_n",
                   "target_mi", "tv_avg_marginal_to_target", "expected_tv_type_to_target",
                   "tv_joint", "tv_joint_mode", "status")

CHANNEL_FIELDS = ("n", "M", "rate", "q_error", "q_error_stderr", "q_error_mc",
                   "q_error_mc_stderr", "tv_lower_bound", "tv_joint", "tv_joint_mode",
                   "normalized_divergence", "status")

RD_FIELDS = ("target_distortion", "rate_nats", "rate_bits", "distortion", "beta",
             "retained_symbols", "converged", "status")


def _flagged(fields_, n, status):
    row = {k: math.nan for k in fields_}
    row.update({"n": n, "status": status})
    for k in ("M", "tv_joint_mode"):
        if k in row:
            row[k] = ""
    return row


def divergence_point(cfg: ExperimentConfig, rd: RdSolution, n: int) -> dict:
    try:
        code = build_code(cfg, rd, n)
        if cfg.pathological is not None:
            backward = full_backward_matrix(rd)
            code = append_pathological_codeword(code, tuple(cfg.pathological),
                                                np.nan_to_num(backward), rd.source)
        pair = build_induced_P(code, rd.source, rd, cfg.budget)
        row = experiment_row(pair, rd, rd.measure, tv_budget=cfg.tv_budget)
        good = goodness_report(code, rd.source, rd.measure, rd, budget=cfg.budget)
    except ResourceError as exc:
        return _flagged(DIVERGENCE_FIELDS, n, f"infeasible: {exc}")
    row["target_mi"] = rd.rate
    row["expected_tv_type_to_target"] = good.expected_tv_to_target
    row["status"] = "infinite" if math.isinf(row["normalized_divergence"]) else "ok"
    return {k: row[k] for k in DIVERGENCE_FIELDS}


def channel_point(cfg: ExperimentConfig, rd: RdSolution, n: int) -> dict:
    try:
        code = build_code(cfg, rd, n, bijective=True)
        pair = build_induced_P(code, rd.source, rd, cfg.budget)
        exp = ChannelExperiment(code, rd, budget=cfg.budget)
        q = error_probability_Q(exp)
        error_probability_P(exp, pair)
        row = {"n": n, "M": code.M, "rate": code.rate, "q_error": q.value,
               "q_error_stderr": q.stderr, "q_error_mc": math.nan, "q_error_mc_stderr": math.nan,
               "tv_lower_bound": tv_lower_bound(exp, pair),
               "normalized_divergence": normalized_divergence(pair)}
        if cfg.monte_carlo_samples > 0:
            mc = ChannelExperiment(code, rd, mode="monte_carlo", samples=cfg.monte_carlo_samples,
                                   seed=point_seed(cfg.seed + 1, n), budget=cfg.budget)
            qm = error_probability_Q(mc)
            row["q_error_mc"], row["q_error_mc_stderr"] = qm.value, qm.stderr
        tv = tv_joint(pair, cfg.tv_budget)
        row["tv_joint"], row["tv_joint_mode"] = tv.value, tv.mode
    except ResourceError as exc:
        return _flagged(CHANNEL_FIELDS, n, f"infeasible: {exc}")
    row["status"] = "ok"
    return row


def _run(point, cfg, rd, grid, jobs):
    if jobs and jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(point, [cfg] * len(grid), [rd] * len(grid), grid))
    return [point(cfg, rd, n) for n in grid]


def divergence_rows(cfg: ExperimentConfig, jobs: int = 1) -> list[dict]:
    return _run(divergence_point, cfg, cfg.target(), cfg.n_grid, jobs)


def channel_rows(cfg: ExperimentConfig, jobs: int = 1) -> list[dict]:
    if cfg.constructor not in ("random", "best"):
        raise ConfigError("the channel experiment needs the bijective random constructor")
    rd = cfg.target()
    if cfg.messages is not None:
        for n in cfg.n_grid:
            if int(cfg.messages) > rd.output_size**n:
                raise ConfigError(f"{cfg.messages} distinct codewords impossible at n={n}")
    return _run(channel_point, cfg, rd, cfg.n_grid, jobs)


def rd_curve_rows(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """``(D, R(D))`` rows plus a backward-channel dump per grid point."""
    source, measure = cfg.source_law(), cfg.measure()
    grid = cfg.d_grid or list(np.linspace(0.05, 1.0, 20) * measure.d_max(source))
    rows, dump = [], []
    for D in grid:
        D = float(D)
        try:
            sol = reduce_alphabet(solve_rd(source, measure, D, cfg.solver_tol), tol=cfg.solver_tol)
        except Exception as exc:  # noqa: BLE001 - flagged row, sweep continues
            rows.append({k: math.nan for k in RD_FIELDS} | {"target_distortion": D,
                                                              "status": f"failed: {exc}"})
            continue
        rows.append({"target_distortion": D, "rate_nats": sol.rate, "rate_bits": to_bits(sol.rate),
                     "distortion": sol.distortion, "beta": sol.beta,
                     "retained_symbols": " ".join(str(y) for y in sol.reduced_alphabet),
                     "converged": sol.converged,
                     "status": "ok" if sol.converged else "not_converged"})
        dump.append({"target_distortion": D, "reduced_alphabet": list(sol.reduced_alphabet),
                     "backward": sol.backward.rows.tolist(),
                     "trace": [list(t) for t in sol.trace]})
    return rows, dump


# --- CSV and plots --------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict], fieldnames, kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: rdlab.{kind}/{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fieldnames)
    for r in rows:
        w.writerow([_cell(r.get(k, "")) for k in fieldnames])
    return buf.getvalue()


def read_csv(text: str) -> tuple[str, list[dict]]:
    lines = text.splitlines()
    kind = ""
    if lines and lines[0].startswith("# schema:"):
        kind = lines[0].split(":", 1)[1].strip()
        lines = lines[1:]
    rows = []
    for rec in csv.DictReader(lines):
        row = {}
        for k, v in rec.items():
            try:
                row[k] = float(v)
            except ValueError:
                row[k] = v
        rows.append(row)
    return kind, rows


def plot_rows(kind: str, rows: list[dict]) -> str:
    """SVG for a CSV schema; a pure function of the rows."""
    base = kind.split("/")[0].removeprefix("rdlab.")

    def series(key, xkey="n"):
        return [(float(r[xkey]), float(r[key])) for r in rows
                if isinstance(r.get(key), float) and not math.isnan(r[key])]

    if base == "divergence_sweep":
        return svg.line_chart({"(1/n) D(P||Q)": series("normalized_divergence"),
                               "term1 / n": series("term1_over_n"),
                               "term2 / n": series("term2_over_n")},
                              title="Normalized divergence vs blocklength",
                              xlabel="n", ylabel="nats / symbol")
    if base == "channel_experiment":
        return svg.line_chart({"(1/n) D(P||Q)": series("normalized_divergence"),
                               "Q(error) = TV lower bound": series("tv_lower_bound"),
                               "||P - Q||": series("tv_joint")},
                              title="Divergence vanishes, variational distance does not",
                              xlabel="n", ylabel="value")
    if base == "rd_curve":
        return svg.line_chart({"R(D) [bits]": series("rate_bits", "target_distortion")},
                              title="Rate-distortion function", xlabel="D", ylabel="bits / symbol")
    raise ValueError(f"no plot for schema {kind!r}")
