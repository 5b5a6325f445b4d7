"""Quantized network coding over a lossless directed network.

Every edge ``e`` leaving node ``v`` carries, at time ``t``::

    y_e(t) = Q_e[ sum_{e' in In(v)} beta_{e,e'}(t) y_{e'}(t-1) + alpha_{e,v}(t) x_v ]

with ``y(1) = 0``. In matrix form ``y(t) = F(t) y(t-1) + A(t) x + n(t)`` where
``n(t)`` is the logged quantization error, and the gateway observes
``z(t) = B y(t) = Psi(t) x + n_eff(t)``.

Times are 1-based; arrays indexed by time keep rows 0 and 1 for alignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .graph import NetworkGraph


class QuantizerOverflow(ArithmeticError):
    """Input to an edge quantizer exceeded ``q_max``; the no-overflow
    coefficient condition was violated upstream."""


# relative slack for floating-point roundoff in the overflow check
_OVERFLOW_RTOL = 1e-12


@dataclass(frozen=True)
class Quantizer:
    """Uniform midtread quantizer on ``[-q_max, q_max]`` with ``bits`` bits.

    Levels are ``i * step`` for ``|i| <= 2**(bits-1) - 1``, i.e.
    ``2**bits - 1`` levels with ``step = 2 q_max / (2**bits - 1)``.
    Exact midpoints round toward zero.
    """

    step: float
    q_max: float
    bits: int

    @property
    def levels(self) -> int:
        return 2**self.bits - 1

    @property
    def max_index(self) -> int:
        return 2 ** (self.bits - 1) - 1

    def index(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(np.abs(u) > self.q_max * (1 + _OVERFLOW_RTOL)):
            raise QuantizerOverflow(f"|u| = {np.max(np.abs(u))!r} exceeds q_max = {self.q_max!r}")
        i = np.ceil(np.abs(u) / self.step - 0.5)
        return (np.sign(u) * np.minimum(i, self.max_index)).astype(np.int64)

    def __call__(self, u):
        return self.index(u) * self.step


def quantizer_for_edge(L, capacity, q_max) -> Quantizer:
    bits = int(L) * int(capacity)
    if bits < 2:
        raise ValueError(f"L * C_e = {bits}; a symmetric midtread grid needs at least 2 bits")
    return Quantizer(2.0 * q_max / (2**bits - 1), float(q_max), bits)


def quantize(q: Quantizer, u):
    return q(u)


def edge_quantizers(g: NetworkGraph, L, q_max) -> list[Quantizer]:
    return [quantizer_for_edge(L, e.capacity, q_max) for e in g.edges]


def _quantize_edges(u, steps, max_index, q_max):
    """Vectorized per-edge quantization (same rule as :class:`Quantizer`)."""
    a = np.abs(u)
    if np.any(a > q_max * (1 + _OVERFLOW_RTOL)):
        e = int(np.argmax(a))
        raise QuantizerOverflow(f"edge {e}: pre-quantization value {u[e]!r} exceeds q_max = {q_max!r}")
    i = np.minimum(np.ceil(a / steps - 0.5), max_index)
    return np.sign(u) * i * steps


# -- coefficients -------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientSchedule:
    """Time-indexed coding coefficients.

    ``alpha[t, e]`` is alpha_{e, tail(e)}(t) (the only admissible source
    coefficient of edge ``e``). ``beta[t, j]`` is the coefficient of the pair
    ``beta_pairs[j] = (e, e')`` with ``tail(e) == head(e')``.
    """

    alpha: np.ndarray
    beta_pairs: np.ndarray
    beta: np.ndarray
    tails: np.ndarray
    n_nodes: int
    _F_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def t_max(self) -> int:
        return self.alpha.shape[0] - 1

    @property
    def n_edges(self) -> int:
        return self.tails.size

    def F(self, t) -> sp.csr_matrix:
        """Sparse ``F(t)``."""
        if t not in self._F_cache:
            E = self.n_edges
            r, c = self.beta_pairs.T if self.beta_pairs.size else (np.array([], int), np.array([], int))
            self._F_cache[t] = sp.csr_matrix((self.beta[t], (r, c)), shape=(E, E))
        return self._F_cache[t]

    def A(self, t) -> sp.csr_matrix:
        """Sparse ``A(t)``: ``alpha[t, e]`` at ``(e, tail(e))``."""
        E = self.n_edges
        return sp.csr_matrix((self.alpha[t], (np.arange(E), self.tails)), shape=(E, self.n_nodes))

    def coupling_sums(self, t) -> np.ndarray:
        """Per-edge ``sum |beta_{e,.}(t)| + |alpha_{e,tail(e)}(t)|``."""
        s = np.zeros(self.n_edges)
        if self.beta_pairs.size:
            np.add.at(s, self.beta_pairs[:, 0], np.abs(self.beta[t]))
        return s + np.abs(self.alpha[t])

    @cached_property
    def nonnegative_mixing(self) -> bool:
        return bool(np.all(self.beta >= 0))


def _beta_pairs(g: NetworkGraph) -> np.ndarray:
    pairs = [(e.id, ep) for e in g.edges for ep in g.in_edges(e.tail)]
    return np.array(pairs, dtype=int).reshape(-1, 2)


def generate_coefficients(g: NetworkGraph, t_max, seed=None, alpha_floor=1e-12) -> CoefficientSchedule:
    """Random source coefficients at ``t = 2`` only, fixed averaging weights.

    ``beta_{e,e'}(t) = 1 / (|In(v)| + 1)`` for ``v = tail(e)`` and all
    ``t >= 2``. ``alpha_{e,v}(2) ~ N(0, 1)`` i.i.d., then shrunk per edge to
    ``|alpha| <= 1 - sum |beta|`` wherever it exceeds that budget.
    """
    if t_max < 2:
        raise ValueError("t_max must be at least 2")
    rng = np.random.default_rng(seed)
    E = g.n_edges
    pairs = _beta_pairs(g)
    in_deg = np.array([len(g.in_edges(e.tail)) for e in g.edges], dtype=float)
    w = 1.0 / (in_deg[pairs[:, 0]] + 1.0) if pairs.size else np.zeros(0)
    beta = np.zeros((t_max + 1, len(pairs)))
    beta[2:] = w

    a = rng.standard_normal(E)
    budget = 1.0 - in_deg / (in_deg + 1.0)
    over = np.abs(a) > budget
    a[over] *= budget[over] / np.maximum(np.abs(a[over]), alpha_floor)
    # clipped edges sit exactly on the budget; step |alpha| down by ulps until
    # the sum evaluated as in coupling_sums is <= 1 in floating point too
    beta_sum = np.zeros(E)
    if pairs.size:
        np.add.at(beta_sum, pairs[:, 0], w)
    over = beta_sum + np.abs(a) > 1.0
    while np.any(over):
        a[over] = np.nextafter(a[over], 0.0)
        over = beta_sum + np.abs(a) > 1.0
    alpha = np.zeros((t_max + 1, E))
    alpha[2] = a
    return CoefficientSchedule(alpha, pairs, beta, g.tails, g.n_nodes)


# -- matrices -------------------------------------------------------------------


@dataclass(frozen=True)
class TransferMatrices:
    F: np.ndarray
    A: np.ndarray
    B: np.ndarray


def selector_matrix(g: NetworkGraph) -> np.ndarray:
    rows = g.gateway_edges
    B = np.zeros((len(rows), g.n_edges))
    B[np.arange(len(rows)), rows] = 1.0
    return B


def build_transfer_matrices(sched: CoefficientSchedule, g: NetworkGraph, t) -> TransferMatrices:
    if not 2 <= t <= sched.t_max:
        raise ValueError(f"t={t} outside 2..{sched.t_max}")
    return TransferMatrices(sched.F(t).toarray(), sched.A(t).toarray(), selector_matrix(g))


def transition(sched: CoefficientSchedule, t, t0) -> np.ndarray:
    """Dense ``F(t) F(t-1) ... F(t0+1)``; identity when ``t0 >= t``."""
    M = np.eye(sched.n_edges)
    for tt in range(t0 + 1, t + 1):
        M = sched.F(tt) @ M
    return M


def compute_psi(sched: CoefficientSchedule, g: NetworkGraph, t) -> np.ndarray:
    """``Psi(t) = B sum_{t'=2}^{t} F(t)...F(t'+1) A(t')``, term by term."""
    if t < 2:
        raise ValueError("Psi(t) is defined for t >= 2")
    acc = np.zeros((sched.n_edges, sched.n_nodes))
    for tp in range(2, t + 1):
        acc += transition(sched, t, tp) @ sched.A(tp).toarray()
    return selector_matrix(g) @ acc


def psi_stack(sched: CoefficientSchedule, g: NetworkGraph, t) -> np.ndarray:
    """``Psi_tot(t)``, rows of ``Psi(2), ..., Psi(t)`` stacked.

    Uses ``G(t) = F(t) G(t-1) + A(t)``, ``G(1) = 0``, ``Psi(t) = B G(t)``.
    """
    rows = list(g.gateway_edges)
    E = sched.n_edges
    G = np.zeros((E, sched.n_nodes))
    blocks = []
    for tt in range(2, t + 1):
        G = sched.F(tt) @ G
        G[np.arange(E), sched.tails] += sched.alpha[tt]
        blocks.append(G[rows])
    return np.vstack(blocks)


# -- propagation ------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeState:
    y: np.ndarray
    quant_err: np.ndarray
    t: int


def rest_state(n_edges) -> EdgeState:
    return EdgeState(np.zeros(n_edges), np.zeros(n_edges), 1)


def step_network(state: EdgeState, sched: CoefficientSchedule, x, quantizers=None) -> EdgeState:
    """Advance edge contents from ``state.t`` to ``state.t + 1``.

    ``quantizers=None`` disables quantization (ideal real-valued coding).
    """
    t = state.t + 1
    if t > sched.t_max:
        raise ValueError(f"schedule ends at t_max={sched.t_max}")
    x = np.asarray(x, dtype=float)
    u = sched.F(t) @ state.y + sched.alpha[t] * x[sched.tails]
    if quantizers is None:
        return EdgeState(u, np.zeros_like(u), t)
    steps = np.array([q.step for q in quantizers])
    max_index = np.array([q.max_index for q in quantizers])
    y = _quantize_edges(u, steps, max_index, quantizers[0].q_max)
    return EdgeState(y, y - u, t)


@dataclass(frozen=True)
class QNCRun:
    """History of one transmission: ``y[t]`` and ``quant_err[t]`` for
    ``t = 1..t_end`` (row 0 unused)."""

    graph: NetworkGraph
    sched: CoefficientSchedule
    x: np.ndarray
    steps: np.ndarray | None
    q_max: float
    y: np.ndarray
    quant_err: np.ndarray

    @property
    def t_end(self) -> int:
        return self.y.shape[0] - 1


def simulate_qnc(g: NetworkGraph, sched: CoefficientSchedule, x, quantizers=None, t_end=None) -> QNCRun:
    t_end = sched.t_max if t_end is None else t_end
    x = np.asarray(x, dtype=float)
    E = g.n_edges
    y = np.zeros((t_end + 1, E))
    n = np.zeros((t_end + 1, E))
    state = rest_state(E)
    for t in range(2, t_end + 1):
        state = step_network(state, sched, x, quantizers)
        y[t], n[t] = state.y, state.quant_err
    steps = None if quantizers is None else np.array([q.step for q in quantizers])
    q_max = quantizers[0].q_max if quantizers else float("inf")
    return QNCRun(g, sched, x, steps, q_max, y, n)


# -- measurements -------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementRecord:
    z_tot: np.ndarray
    Psi_tot: np.ndarray
    n_eff_tot: np.ndarray
    eps_sq: float
    t: int

    @property
    def m(self) -> int:
        return self.z_tot.size


def effective_noise(sched: CoefficientSchedule, g: NetworkGraph, quant_err, t) -> np.ndarray:
    """Stacked ``n_eff(2..t)`` from logged errors:
    ``n_eff(t) = B sum_{t'=2}^{t} F(t)...F(t'+1) n(t')``."""
    rows = list(g.gateway_edges)
    acc = np.zeros(sched.n_edges)
    out = []
    for tt in range(2, t + 1):
        acc = sched.F(tt) @ acc + quant_err[tt]
        out.append(acc[rows])
    return np.concatenate(out)


def assemble_measurements(run: QNCRun, t=None, psi_tot=None) -> MeasurementRecord:
    """Gateway measurements ``z(2..t)`` with their linear model.

    ``psi_tot`` may be passed when already computed for the same schedule.
    """
    t = run.t_end if t is None else t
    if t < 2:
        raise ValueError("measurements start at t=2")
    if t > run.t_end:
        raise ValueError(f"run only reaches t={run.t_end}")
    g, sched = run.graph, run.sched
    rows = list(g.gateway_edges)
    z_tot = run.y[2 : t + 1, rows].reshape(-1)
    if psi_tot is None:
        psi_tot = psi_stack(sched, g, t)
    else:
        psi_tot = psi_tot[: (t - 1) * len(rows)]
    n_eff = effective_noise(sched, g, run.quant_err, t)
    eps_sq = 0.0 if run.steps is None else compute_epsilon_sq(sched, g, run.steps, t)
    return MeasurementRecord(z_tot, psi_tot, n_eff, eps_sq, t)


def _steps_vector(steps_or_quantizers):
    if len(steps_or_quantizers) and isinstance(steps_or_quantizers[0], Quantizer):
        return np.array([q.step for q in steps_or_quantizers])
    return np.asarray(steps_or_quantizers, dtype=float)


def epsilon_sq_series(sched: CoefficientSchedule, g: NetworkGraph, steps, t_end) -> np.ndarray:
    """``eps^2(t)`` for ``t = 0..t_end`` (entries 0 and 1 are zero).

    Per time ``t'`` the worst-case effective noise on gateway edges is
    ``B sum_{j=2}^{t'} |F(t')...F(j+1)| Delta/2``; ``eps^2(t)`` sums its squared
    norm over ``t' = 2..t``.
    """
    half = _steps_vector(steps) / 2.0
    rows = list(g.gateway_edges)
    out = np.zeros(t_end + 1)
    if sched.nonnegative_mixing:
        # |product| == product: one vector recursion
        acc = np.zeros(sched.n_edges)
        for tp in range(2, t_end + 1):
            acc = sched.F(tp) @ acc + half
            out[tp] = out[tp - 1] + np.sum(acc[rows] ** 2)
        return out
    for tp in range(2, t_end + 1):
        bound = sum(np.abs(transition(sched, tp, j)) @ half for j in range(2, tp + 1))
        out[tp] = out[tp - 1] + np.sum(bound[rows] ** 2)
    return out


def compute_epsilon_sq(sched: CoefficientSchedule, g: NetworkGraph, steps, t, reading="symmetric") -> float:
    """Noise radius ``eps^2(t)`` that bounds ``||n_eff_tot(t)||^2``.

    ``reading="printed"`` evaluates the formula with the mismatched product
    limits (``t`` in the left factor, ``t'`` in the right); it is not a
    guaranteed bound and exists for comparison only.
    """
    if t < 2:
        raise ValueError("eps^2(t) is defined for t >= 2")
    if reading == "symmetric":
        return float(epsilon_sq_series(sched, g, steps, t)[t])
    if reading != "printed":
        raise ValueError(f"unknown reading {reading!r}")
    delta = _steps_vector(steps)
    B = selector_matrix(g)
    total = 0.0
    for tp in range(2, t + 1):
        left = sum(np.abs(transition(sched, t, tpp + 1)) @ delta for tpp in range(1, tp))
        right = sum(np.abs(transition(sched, tp, tpp + 1)) @ delta for tpp in range(1, tp))
        total += (B @ left) @ (B @ right)
    return 0.25 * float(total)
