"""Experiment sweeps: SNR versus delivery delay for QNC and forwarding.

Seeding: every random draw comes from ``SeedSequence(seed, spawn_key=key)``.
Deployments use ``key = (edges, realization, 0)``, coding coefficients
``(edges, realization, 1)`` and messages ``(0, realization, 2, k_milli)`` with
``k_milli = round(1000 * k/n)``. Messages thus do not depend on the edge
count, so different deployments of one realization see the same data. A cell
is reproducible on its own, independent of which other cells run or in what
order.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from itertools import groupby
from pathlib import Path

import numpy as np

from .decode import DecodeError, DecodeProblem, l1_min_decode
from .forward import forwarding_schedule, simulate_forwarding
from .graph import generate_random_network, shortest_paths_to_gateway
from .qnc import edge_quantizers, epsilon_sq_series, generate_coefficients, psi_stack, simulate_qnc
from .signal import generate_sparse_messages

log = logging.getLogger(__name__)

CSV_HEADER = ("scheme", "edges", "k_over_n", "L", "t", "snr_db", "delay", "realizations")
SNR_BIN_DB = 0.5
STREAM_GRAPH, STREAM_COEFFS, STREAM_MESSAGES = 0, 1, 2


@dataclass
class ExperimentConfig:
    n_nodes: int = 100
    edge_counts: tuple[int, ...] = (300, 400)
    sparsity_ratios: tuple[float, ...] = (0.1, 0.2, 0.3)
    block_lengths: tuple[int, ...] = (2, 3, 4, 6, 8, 10, 12, 16, 20, 24)
    realizations: int = 30
    q_max: float = 1.0
    t_max: int = 12
    seed: int = 0
    capacity: int = 1
    output: str = "results.csv"
    workers: int = 1

    def __post_init__(self):
        self.edge_counts = tuple(int(e) for e in self.edge_counts)
        self.sparsity_ratios = tuple(float(r) for r in self.sparsity_ratios)
        self.block_lengths = tuple(int(L) for L in self.block_lengths)
        if self.n_nodes < 2 or self.realizations < 1 or self.t_max < 2 or self.workers < 1:
            raise ValueError("n_nodes >= 2, realizations >= 1, t_max >= 2 and workers >= 1 required")
        if not self.edge_counts or min(self.edge_counts) < 1:
            raise ValueError("edge_counts must be positive")
        if not self.sparsity_ratios or not all(0 < r <= 1 for r in self.sparsity_ratios):
            raise ValueError("sparsity ratios must lie in (0, 1]")
        if not self.block_lengths or min(self.block_lengths) * self.capacity < 2:
            raise ValueError("every block length needs L * capacity >= 2")
        if self.q_max <= 0:
            raise ValueError("q_max must be positive")

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        """Parse ``key = value`` lines; lists are comma separated, ``#``
        starts a comment."""
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (p.strip() for p in line.partition("="))
            if not sep or key not in kinds:
                raise ValueError(f"config line {n}: expected one of {sorted(kinds)} = value, got {raw!r}")
            kind = kinds[key]
            if kind.startswith("tuple"):
                kw[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif kind == "int":
                kw[key] = int(value)
            elif kind == "float":
                kw[key] = float(value)
            else:
                kw[key] = value
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def k_for(self, ratio) -> int:
        return max(1, round(ratio * self.n_nodes))


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    edges: int
    k_over_n: float
    L: int
    t: int
    snr_db: float
    delay: float
    realizations: int

    @property
    def key(self):
        return (self.scheme, self.edges, self.k_over_n, self.L, self.t)


@dataclass
class ExperimentResult:
    rows: list[ResultRow]
    failures: dict = field(default_factory=dict)

    def select(self, **crit) -> list[ResultRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in crit.items())]


def compute_snr(x_runs, xhat_runs) -> float:
    """``10 log10( mean ||x|| / mean ||x - x_hat|| )`` over realizations.

    Returns ``inf`` when every reconstruction is exact.
    """
    if len(x_runs) != len(xhat_runs) or not x_runs:
        raise ValueError("need equally many (non-zero) signals and reconstructions")
    sig = np.mean([np.linalg.norm(x) for x in x_runs])
    err = np.mean([np.linalg.norm(np.asarray(x) - np.asarray(xh)) for x, xh in zip(x_runs, xhat_runs)])
    return _snr_from_norms(sig, err)


def _snr_from_norms(sig, err):
    if err == 0:
        return math.inf
    return 10.0 * math.log10(sig / err)


def _rng(cfg, *key):
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=tuple(int(k) for k in key)))


def run_cell(cfg: ExperimentConfig, edges: int, realization: int):
    """All schemes, sparsities, block lengths and decode times for one
    deployment. Returns raw records ``(scheme, k_over_n, L, t, ||x||,
    ||x - x_hat||, delay)``; failed decodes carry ``None`` errors."""
    g = generate_random_network(cfg.n_nodes, edges, cfg.capacity, _rng(cfg, edges, realization, STREAM_GRAPH))
    routes = shortest_paths_to_gateway(g)
    arrival = forwarding_schedule(g, routes)
    sched = generate_coefficients(g, cfg.t_max, _rng(cfg, edges, realization, STREAM_COEFFS))
    psi = psi_stack(sched, g, cfg.t_max)
    rows = list(g.gateway_edges)
    d = len(rows)
    out = []
    for ratio in cfg.sparsity_ratios:
        msg = generate_sparse_messages(cfg.n_nodes, cfg.k_for(ratio), cfg.q_max,
                                       _rng(cfg, 0, realization, STREAM_MESSAGES, round(1000 * ratio)))
        x_norm = float(np.linalg.norm(msg.x))
        for L in cfg.block_lengths:
            fw = simulate_forwarding(g, routes, msg.x, L, cfg.q_max, arrival)
            out.append(("forwarding", ratio, L, 0, x_norm, float(np.linalg.norm(msg.x - fw.x_hat)),
                        float(fw.total_delay)))
            quantizers = edge_quantizers(g, L, cfg.q_max)
            run = simulate_qnc(g, sched, msg.x, quantizers)
            eps_sq = epsilon_sq_series(sched, g, [q.step for q in quantizers], cfg.t_max)
            for t in range(2, cfg.t_max + 1):
                z_tot = run.y[2 : t + 1, rows].reshape(-1)
                problem = DecodeProblem.from_measurements(z_tot, psi[: (t - 1) * d], msg.phi, eps_sq[t])
                try:
                    err = float(np.linalg.norm(msg.x - l1_min_decode(problem).x_hat))
                except DecodeError as exc:
                    log.warning("decode failed: edges=%d realization=%d k/n=%g L=%d t=%d: %s",
                                edges, realization, ratio, L, t, exc)
                    err = None
                out.append(("QNC", ratio, L, t, x_norm, err, float(L * (t - 1))))
    return edges, realization, out


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    jobs = [(cfg, e, r) for e in cfg.edge_counts for r in range(cfg.realizations)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            cells = list(pool.map(_run_cell_args, jobs))
    else:
        cells = []
        for job in jobs:
            cells.append(run_cell(*job))
            if progress:
                progress(len(cells), len(jobs))
    cells.sort(key=lambda c: (c[0], c[1]))

    acc = defaultdict(lambda: ([], [], []))
    failures = defaultdict(int)
    for edges, _, records in cells:
        for scheme, ratio, L, t, x_norm, err, delay in records:
            key = (scheme, edges, ratio, L, t)
            if err is None:
                failures[key] += 1
                continue
            sig, errs, delays = acc[key]
            sig.append(x_norm)
            errs.append(err)
            delays.append(delay)
    rows = []
    for key in sorted(set(acc) | set(failures)):
        sig, errs, delays = acc[key]
        if not sig:
            continue
        scheme, edges, ratio, L, t = key
        rows.append(ResultRow(scheme, edges, ratio, L, t, _snr_from_norms(np.mean(sig), np.mean(errs)),
                              float(np.mean(delays)), len(sig)))
    if failures:
        log.warning("%d decodes failed and were excluded", sum(failures.values()))
    return ExperimentResult(rows, dict(failures))


def pareto_frontier(rows) -> list[ResultRow]:
    """Rows not beaten by another row with no more delay and more SNR."""
    out = []
    best = -math.inf
    for r in sorted(rows, key=lambda r: (r.delay, -r.snr_db, r.L, r.t)):
        if r.snr_db > best:
            out.append(r)
            best = r.snr_db
    return out


def optimize_block_length(results: ExperimentResult) -> ExperimentResult:
    """Per scheme, edge count and sparsity: the smallest-delay row in every
    0.5 dB SNR bin, then the SNR-delay Pareto frontier of those."""
    if not results.rows:
        raise ValueError("no result rows to optimize")
    groups = defaultdict(list)
    for r in results.rows:
        if not math.isnan(r.snr_db):
            groups[(r.scheme, r.edges, r.k_over_n)].append(r)
    frontier = []
    for key in sorted(groups):
        bins = {}
        for r in groups[key]:
            b = math.inf if math.isinf(r.snr_db) else math.floor(r.snr_db / SNR_BIN_DB)
            cur = bins.get(b)
            if cur is None or (r.delay, -r.snr_db, r.L, r.t) < (cur.delay, -cur.snr_db, cur.L, cur.t):
                bins[b] = r
        frontier.extend(pareto_frontier(bins.values()))
    return ExperimentResult(frontier, dict(results.failures))


def best_snr_within(frontier, delay) -> float:
    """Best SNR reachable with at most ``delay`` channel uses (-inf if none)."""
    return max((r.snr_db for r in frontier if r.delay <= delay), default=-math.inf)


# -- CSV ---------------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(results: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(results.rows, key=lambda r: r.key):
        w.writerow([_fmt(getattr(r, c)) for c in CSV_HEADER])
    return buf.getvalue()


def emit_csv(results: ExperimentResult, path) -> Path:
    path = Path(path)
    path.write_text(to_csv(results))
    return path


def parse_csv(text: str) -> ExperimentResult:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = [ResultRow(d["scheme"], int(d["edges"]), float(d["k_over_n"]), int(d["L"]), int(d["t"]),
                      float(d["snr_db"]), float(d["delay"]), int(d["realizations"])) for d in reader]
    return ExperimentResult(rows)


def read_csv(path) -> ExperimentResult:
    return parse_csv(Path(path).read_text())


def frontier_by_group(frontier: ExperimentResult):
    """``{(scheme, edges, k_over_n): [rows sorted by delay]}``."""
    rows = sorted(frontier.rows, key=lambda r: (r.scheme, r.edges, r.k_over_n, r.delay))
    return {k: list(v) for k, v in groupby(rows, key=lambda r: (r.scheme, r.edges, r.k_over_n))}
