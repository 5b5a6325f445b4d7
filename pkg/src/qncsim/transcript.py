"""Plain-text run transcripts and offline checks.

A transcript is a sequence of sections, each opened by a ``[name]`` line::

    [graph]      edge list: "n m gateway", then "edge_id tail head capacity"
    [params]     "key value" lines: L, q_max, t_end
    [x]          messages, one line of floats
    [phi]        sparsity basis, one row per line (optional)
    [alpha]      "t edge value", non-zero source coefficients
    [beta]       "t edge in_edge value"
    [y]          "t y_0 ... y_{|E|-1}" for t = 1..t_end
    [quant_err]  same layout as [y]
    [psi_tot]    one row per line
    [z_tot]      one line
    [eps_sq]     one value

Floats are written with ``repr`` so a transcript round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decode import DecodeProblem, l1_min_decode
from .graph import NetworkGraph
from .qnc import (
    CoefficientSchedule,
    QNCRun,
    assemble_measurements,
    compute_epsilon_sq,
    compute_psi,
    edge_quantizers,
    simulate_qnc,
)

MEASUREMENT_ATOL = 1e-9


def _row(v):
    return " ".join(repr(float(a)) for a in v)


@dataclass
class Transcript:
    graph: NetworkGraph
    sched: CoefficientSchedule
    x: np.ndarray
    L: int
    q_max: float
    y: np.ndarray
    quant_err: np.ndarray
    psi_tot: np.ndarray
    z_tot: np.ndarray
    eps_sq: float
    phi: np.ndarray | None = None

    @property
    def t_end(self) -> int:
        return self.y.shape[0] - 1

    @classmethod
    def from_run(cls, run: QNCRun, L, phi=None) -> "Transcript":
        rec = assemble_measurements(run)
        return cls(run.graph, run.sched, run.x, int(L), run.q_max, run.y, run.quant_err,
                   rec.Psi_tot, rec.z_tot, rec.eps_sq, phi)

    def to_text(self) -> str:
        s = self.sched
        out = ["[graph]", self.graph.to_text().rstrip("\n"),
               "[params]", f"L {self.L}", f"q_max {float(self.q_max)!r}", f"t_end {self.t_end}",
               "[x]", _row(self.x)]
        if self.phi is not None:
            out += ["[phi]"] + [_row(r) for r in self.phi]
        out.append("[alpha]")
        for t in range(2, s.t_max + 1):
            out += [f"{t} {e} {float(s.alpha[t, e])!r}" for e in np.flatnonzero(s.alpha[t])]
        out.append("[beta]")
        for t in range(2, s.t_max + 1):
            out += [f"{t} {e} {ep} {float(s.beta[t, j])!r}" for j, (e, ep) in enumerate(s.beta_pairs) if s.beta[t, j] != 0]
        out.append("[y]")
        out += [f"{t} {_row(self.y[t])}" for t in range(1, self.t_end + 1)]
        out.append("[quant_err]")
        out += [f"{t} {_row(self.quant_err[t])}" for t in range(1, self.t_end + 1)]
        out.append("[psi_tot]")
        out += [_row(r) for r in self.psi_tot]
        out += ["[z_tot]", _row(self.z_tot), "[eps_sq]", repr(float(self.eps_sq))]
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        sections = {}
        name = None
        for line in text.splitlines():
            if line.startswith("[") and line.rstrip().endswith("]"):
                name = line.strip()[1:-1]
                sections[name] = []
            elif line.strip():
                if name is None:
                    raise ValueError("transcript content before the first section header")
                sections[name].append(line)
        missing = {"graph", "params", "x", "alpha", "beta", "y", "quant_err", "psi_tot", "z_tot", "eps_sq"} - set(sections)
        if missing:
            raise ValueError(f"transcript lacks sections {sorted(missing)}")
        g = NetworkGraph.from_text("\n".join(sections["graph"]))
        params = dict(ln.split(None, 1) for ln in sections["params"])
        t_end = int(params["t_end"])
        E = g.n_edges
        alpha = np.zeros((t_end + 1, E))
        for ln in sections["alpha"]:
            t, e, v = ln.split()
            alpha[int(t), int(e)] = float(v)
        pairs = [(e.id, ep) for e in g.edges for ep in g.in_edges(e.tail)]
        index = {p: j for j, p in enumerate(pairs)}
        beta = np.zeros((t_end + 1, len(pairs)))
        for ln in sections["beta"]:
            t, e, ep, v = ln.split()
            key = (int(e), int(ep))
            if key not in index:
                raise ValueError(f"beta for edges {key}: in-edge does not end at the edge's tail")
            beta[int(t), index[key]] = float(v)
        sched = CoefficientSchedule(alpha, np.array(pairs, dtype=int).reshape(-1, 2), beta, g.tails, g.n_nodes)

        def history(lines):
            h = np.zeros((t_end + 1, E))
            for ln in lines:
                t, *vals = ln.split()
                h[int(t)] = np.array(vals, dtype=float)
            return h

        def matrix(lines):
            return np.array([ln.split() for ln in lines], dtype=float).reshape(len(lines), -1)

        phi = matrix(sections["phi"]) if "phi" in sections else None
        return cls(g, sched, np.array(sections["x"][0].split(), dtype=float), int(params["L"]),
                   float(params["q_max"]), history(sections["y"]), history(sections["quant_err"]),
                   matrix(sections["psi_tot"]), np.array(sections["z_tot"][0].split(), dtype=float),
                   float(sections["eps_sq"][0]), phi)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Transcript":
        return cls.from_text(Path(path).read_text())


def verify_transcript(tr: Transcript) -> list[tuple[str, bool, str]]:
    """Re-derive everything checkable from a transcript.

    Returns ``(check, passed, detail)`` triples.
    """
    g, s, t = tr.graph, tr.sched, tr.t_end
    quantizers = edge_quantizers(g, tr.L, tr.q_max)
    steps = np.array([q.step for q in quantizers])
    rows = list(g.gateway_edges)
    checks = []

    def add(name, ok, detail):
        checks.append((name, bool(ok), detail))

    worst = max(float(np.max(s.coupling_sums(tt))) for tt in range(2, s.t_max + 1))
    add("coefficient budget", worst <= 1.0, f"max sum|beta|+|alpha| = {worst:.15g}")
    add("alpha only at t=2", not np.any(s.alpha[3:]), "")
    add("initial rest", not np.any(tr.y[1]), "")
    add("edge magnitude", np.max(np.abs(tr.y)) <= tr.q_max, f"max |y| = {np.max(np.abs(tr.y)):.6g}")
    ratio = float(np.max(np.abs(tr.quant_err[2:]) / (steps / 2))) if t >= 2 else 0.0
    add("quantization error", ratio <= 1 + 1e-9, f"max |n_e| / (step/2) = {ratio:.6g}")

    replay = simulate_qnc(g, s, tr.x, quantizers, t_end=t)
    add("replay", np.array_equal(replay.y, tr.y), "re-simulated edge contents are bit-identical")
    z = tr.y[2 : t + 1, rows].reshape(-1)
    add("z_tot from edges", np.array_equal(z, tr.z_tot), "")

    rec = assemble_measurements(replay, t)
    literal = np.vstack([compute_psi(s, g, tt) for tt in range(2, t + 1)])
    gap = float(np.max(np.abs(literal - tr.psi_tot))) if literal.size else 0.0
    add("Psi_tot", gap < MEASUREMENT_ATOL, f"max |Psi_tot - term-by-term Psi| = {gap:.3e}")
    n_eff = rec.n_eff_tot
    resid = float(np.max(np.abs(tr.z_tot - tr.psi_tot @ tr.x - n_eff)))
    add("measurement identity", resid < MEASUREMENT_ATOL, f"max |z - Psi x - n_eff| = {resid:.3e}")
    eps_sq = compute_epsilon_sq(s, g, steps, t)
    add("eps_sq", np.isclose(eps_sq, tr.eps_sq, rtol=1e-12, atol=0), f"recomputed {eps_sq!r}")
    noise = float(n_eff @ n_eff)
    add("noise bound", noise <= eps_sq, f"||n_eff||^2 = {noise:.6g} <= eps^2 = {eps_sq:.6g}")
    return checks


def decode_report(tr: Transcript, x_true=None) -> str:
    """Decode a transcript with its own ``eps_sq`` and format a report."""
    if tr.phi is None:
        raise ValueError("transcript has no [phi] section; cannot decode")
    p = DecodeProblem.from_measurements(tr.z_tot, tr.psi_tot, tr.phi, tr.eps_sq)
    res = l1_min_decode(p)
    x_true = tr.x if x_true is None else x_true
    err_sq = float(np.sum((x_true - res.x_hat) ** 2))
    lines = [
        f"m {tr.z_tot.size}",
        f"n {tr.x.size}",
        f"eps_sq {tr.eps_sq!r}",
        f"residual_sq {res.residual_sq!r}",
        f"l1 {res.l1!r}",
        f"iterations {res.iterations}",
        f"certified {str(res.certified).lower()}",
        f"error_sq {err_sq!r}",
        "x_hat " + _row(res.x_hat),
    ]
    return "\n".join(lines) + "\n"


def forwarding_transcript(g: NetworkGraph, routes, x, run) -> str:
    """Sectioned text record of a forwarding run: graph, routes, arrivals and
    reconstruction, in the same layout family as :class:`Transcript`."""
    out = ["[graph]", g.to_text().rstrip("\n"),
           "[params]", f"L {run.L}", f"bits {run.bits}", f"total_delay {run.total_delay}",
           "[routes]"]
    out += [f"{v} {routes.next_hop[v]} {routes.dist[v]}" for v in sorted(routes.next_hop)]
    out += ["[arrival]", " ".join(str(int(a)) for a in run.arrival),
            "[x]", _row(x), "[x_hat]", _row(run.x_hat)]
    return "\n".join(out) + "\n"
