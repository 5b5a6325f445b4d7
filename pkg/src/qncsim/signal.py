"""Sparse message ensembles ``x = phi @ s``."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

PEAK_FRACTION = 0.99


@dataclass(frozen=True)
class MessageEnsemble:
    s: np.ndarray
    phi: np.ndarray
    x: np.ndarray
    q_max: float

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.s))

    def to_text(self) -> str:
        """Dump as ``key value...`` lines; ``phi`` is written row by row."""
        n = self.n
        lines = [f"n {n}", f"q_max {self.q_max!r}", "s " + _fmt(self.s), "x " + _fmt(self.x)]
        lines += ["phi " + _fmt(row) for row in self.phi]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MessageEnsemble":
        phi_rows = []
        fields = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, rest = line.partition(" ")
            if key == "phi":
                phi_rows.append(np.array(rest.split(), dtype=float))
            else:
                fields[key] = rest
        s = np.array(fields["s"].split(), dtype=float)
        x = np.array(fields["x"].split(), dtype=float)
        return cls(s, np.vstack(phi_rows), x, float(fields["q_max"]))

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())


def _fmt(v):
    return " ".join(repr(float(a)) for a in v)


def random_orthonormal_basis(n, seed=None):
    """QR of an i.i.d. standard Gaussian matrix, sign-corrected so the
    result is Haar distributed."""
    if n < 1:
        raise ValueError("basis dimension must be positive")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def generate_sparse_messages(n, k, q_max=1.0, seed=None, phi=None) -> MessageEnsemble:
    """Draw a ``k``-sparse ``s`` (uniform support, values U(-1/2, 1/2)) and
    messages ``x = phi @ s``, jointly rescaled so ``max|x| = 0.99 * q_max``.

    A fresh random orthonormal ``phi`` is drawn unless one is given.
    """
    if not 1 <= k <= n:
        raise ValueError(f"sparsity k={k} must be in 1..{n}")
    if q_max <= 0:
        raise ValueError("q_max must be positive")
    rng = np.random.default_rng(seed)
    if phi is None:
        phi = random_orthonormal_basis(n, rng)
    while True:
        s = np.zeros(n)
        support = rng.choice(n, size=k, replace=False)
        s[support] = rng.uniform(-0.5, 0.5, size=k)
        x = phi @ s
        peak = np.max(np.abs(x))
        if np.all(s[support] != 0) and peak > 0:
            break
    scale = PEAK_FRACTION * q_max / peak
    return MessageEnsemble(s * scale, phi, x * scale, float(q_max))
