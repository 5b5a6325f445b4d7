"""l1-minimization decoding, RIP constants and the recovery error bound.

The decoder solves::

    minimize ||s||_1   subject to   ||z - Theta s||_2^2 <= eps^2

and returns ``x_hat = phi @ s_hat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg as sla

# acceptance slack on the residual constraint (relative)
FEASIBILITY_RTOL = 1e-6
# relative tolerance on the dual certificate of the polished solution
CERTIFICATE_RTOL = 1e-7
RIP_THRESHOLD = math.sqrt(2.0) - 1.0


class DecodeError(RuntimeError):
    """The solver ran out of iterations without a usable solution."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class DecodeProblem:
    z_tot: np.ndarray
    Theta: np.ndarray
    phi: np.ndarray
    eps: float

    def __post_init__(self):
        if self.z_tot.ndim != 1 or self.z_tot.size < 1:
            raise ValueError("z_tot must be a non-empty vector")
        if self.Theta.shape[0] != self.z_tot.size:
            raise ValueError(f"Theta has {self.Theta.shape[0]} rows for {self.z_tot.size} measurements")
        if self.phi.shape != (self.Theta.shape[1], self.Theta.shape[1]):
            raise ValueError("phi must be n x n with n = Theta columns")
        if not self.eps >= 0:
            raise ValueError("eps must be non-negative")

    @classmethod
    def from_measurements(cls, z_tot, Psi_tot, phi, eps_sq):
        return cls(np.asarray(z_tot, float), np.asarray(Psi_tot, float) @ phi, np.asarray(phi, float),
                   math.sqrt(eps_sq))


@dataclass(frozen=True)
class DecodeResult:
    x_hat: np.ndarray
    s_hat: np.ndarray
    residual_sq: float
    iterations: int
    certified: bool

    @property
    def l1(self) -> float:
        return float(np.abs(self.s_hat).sum())


def feasible(residual_sq, eps, z_norm, rtol=FEASIBILITY_RTOL) -> bool:
    return residual_sq <= eps**2 * (1 + rtol) + (rtol * z_norm) ** 2


def _soft(v, thr):
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def _project_ball(v, center, radius):
    d = v - center
    nd = np.linalg.norm(d)
    if nd <= radius:
        return v
    return center + d * (radius / nd)


def _polish(Theta, z, eps, support, signs, y_dual):
    """Exact minimizer on a guessed support/sign pattern.

    Returns ``(s, certified)``, or None when the pattern admits no
    consistent solution. ``certified`` means the KKT conditions prove ``s``
    globally optimal.
    """
    m, n = Theta.shape
    k = support.size
    if k == 0 or k > m:
        return None
    TS = Theta[:, support]
    Q, R = np.linalg.qr(TS)
    d = np.abs(np.diag(R))
    if d.min() <= 1e-10 * d.max():
        return None
    Qz = Q.T @ z
    rperp = z - Q @ Qz
    rperp_sq = float(rperp @ rperp)
    w = sla.solve_triangular(R, signs, trans="T")  # R^-T sigma
    off = np.delete(np.arange(n), support)
    if eps > 0:
        if rperp_sq >= eps**2:
            return None
        c = math.sqrt((eps**2 - rperp_sq) / (w @ w))
        sS = sla.solve_triangular(R, Qz - c * w)
        if np.any(np.sign(sS) != signs):
            return None
        r = z - TS @ sS
        certified = not off.size or np.max(np.abs(Theta[:, off].T @ r)) <= c * (1 + CERTIFICATE_RTOL)
    else:
        if rperp_sq > (1e-10 * np.linalg.norm(z)) ** 2:
            return None
        sS = sla.solve_triangular(R, Qz)
        if np.any(np.sign(sS) != signs):
            return None
        # any y with Theta_S^T y = sign and |Theta_off^T y| <= 1 certifies;
        # try the minimum-norm one and the ADMM dual moved onto that plane
        candidates = [Q @ w, y_dual + Q @ (w - sla.solve_triangular(R, TS.T @ y_dual, trans="T"))]
        certified = not off.size or any(
            np.max(np.abs(Theta[:, off].T @ y)) <= 1 + CERTIFICATE_RTOL for y in candidates)
    s = np.zeros(n)
    s[support] = sS
    return s, bool(certified)


def _make_feasible(Theta, z, eps, s):
    """Slide ``s`` toward the least-squares point until the residual
    constraint holds."""
    a = z - Theta @ s
    if a @ a <= eps**2:
        return s
    s_ls = np.linalg.lstsq(Theta, z, rcond=None)[0]
    b = Theta @ (s_ls - s)
    # ||a - th b||^2 = eps^2, smallest root in [0, 1]
    bb, ab = b @ b, a @ b
    disc = ab**2 - bb * (a @ a - eps**2)
    if bb == 0 or disc < 0:
        return s_ls
    th = min(max((ab - math.sqrt(disc)) / bb, 0.0), 1.0)
    return s + th * (s_ls - s)


def _homotopy(Theta, z, eps, max_steps):
    """Follow the lasso path ``min 0.5||z - Theta s||^2 + lam ||s||_1`` from
    ``lam = ||Theta^T z||_inf`` down until ``||z - Theta s|| = eps``.

    The residual norm is monotone along the path, so the crossing point is
    the constrained minimizer. Returns ``(s, steps, dual)`` or None on
    breakdown.
    """
    m, n = Theta.shape
    s = np.zeros(n)
    r = z.copy()
    c = Theta.T @ r
    lam = float(np.max(np.abs(c)))
    lam_end = 1e-12 * lam
    active = [int(np.argmax(np.abs(c)))]
    tiny = 1e-14
    for step in range(1, max_steps + 1):
        A = np.array(active)
        sigma = np.sign(c[A])
        TA = Theta[:, A]
        try:
            d = np.linalg.solve(TA.T @ TA, sigma)
        except np.linalg.LinAlgError:
            return None
        u = TA @ d
        a = Theta.T @ u
        # residual crossing: ||r - g u||^2 = eps^2
        uu, ru, rr = u @ u, r @ u, r @ r
        disc = ru**2 - uu * (rr - eps**2)
        g_eps = (ru - math.sqrt(disc)) / uu if uu > 0 and disc >= 0 else np.inf
        if g_eps < 0:
            g_eps = np.inf
        g_join, j_join = np.inf, -1
        inactive = np.ones(n, bool)
        inactive[A] = False
        for sgn in (1.0, -1.0):
            den = 1.0 - sgn * a
            num = lam - sgn * c
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(inactive & (den > tiny), num / den, np.inf)
            g[g <= tiny * lam] = np.inf
            j = int(np.argmin(g))
            if g[j] < g_join:
                g_join, j_join = float(g[j]), j
        with np.errstate(divide="ignore", invalid="ignore"):
            g_drop_all = np.where(d * s[A] < 0, -s[A] / d, np.inf)
        g_drop_all[g_drop_all <= 0] = np.inf
        i_drop = int(np.argmin(g_drop_all))
        g_drop = float(g_drop_all[i_drop])
        g = min(g_eps, g_join, g_drop, lam)
        if lam - g <= lam_end:
            g = lam
        y = r / lam  # dual certificate valid along this segment
        s[A] += g * d
        r = r - g * u
        c = c - g * a
        lam -= g
        if g == g_eps or lam <= lam_end:
            return s, step, y
        if g == g_drop:
            s[A[i_drop]] = 0.0
            active.pop(i_drop)
        else:
            if len(active) >= m:
                return s, step, y
            active.append(j_join)
    return None


def l1_min_decode(p: DecodeProblem, max_iter=20000, rho=1.0, tol=1e-9, polish_every=20,
                  relax=1.6) -> DecodeResult:
    """Constrained basis pursuit denoising by ADMM with support polishing.

    Splitting: ``p = s`` carries the l1 term and ``w = Theta s`` the residual
    ball. The s-update matrix ``I + Theta^T Theta`` does not depend on
    ``rho``, so the penalty is rebalanced freely. Every ``polish_every``
    iterations the current support and signs are solved exactly and kept if
    the KKT conditions certify optimality.
    """
    Theta, z, phi = p.Theta, p.z_tot, p.phi
    m, n = Theta.shape
    z_norm = float(np.linalg.norm(z))
    if z_norm <= p.eps:
        zero = np.zeros(n)
        return DecodeResult(zero, zero, z_norm**2, 0, True)

    scale = float(np.linalg.norm(Theta, 2))
    if scale == 0:
        raise DecodeError("Theta is zero but ||z|| > eps: infeasible", residual=z_norm)
    T = Theta / scale
    zs, eps = z / scale, p.eps / scale
    if m > n or np.linalg.matrix_rank(T) < m:
        r_ls = zs - T @ np.linalg.lstsq(T, zs, rcond=None)[0]
        if not feasible(r_ls @ r_ls, eps, np.linalg.norm(zs)):
            raise DecodeError(f"infeasible: least-squares residual {np.linalg.norm(r_ls) * scale:.3e} "
                              f"exceeds eps = {p.eps:.3e}", residual=float(np.linalg.norm(r_ls) * scale))

    def finish(s_final, it, certified):
        r = z - Theta @ s_final
        return DecodeResult(phi @ s_final, s_final, float(r @ r), it, certified)

    path = _homotopy(T, zs, eps, max_steps=50 * max(m, 1))
    if path is not None:
        s_path = path[0]
        support = np.flatnonzero(np.abs(s_path) > 1e-9 * np.max(np.abs(s_path)))
        cand = _polish(T, zs, eps, support, np.sign(s_path[support]), path[2])
        if cand is not None and cand[1]:
            return finish(cand[0], path[1], True)

    M = np.linalg.inv(np.eye(n) + T.T @ T)
    s = np.zeros(n)
    pv = np.zeros(n)
    w = _project_ball(np.zeros(m), zs, eps)
    u = np.zeros(n)
    v = np.zeros(m)

    r_pri = r_dual = np.inf
    for it in range(1, max_iter + 1):
        s = M @ (pv - u + T.T @ (w - v))
        Ts = T @ s
        s_h = relax * s + (1 - relax) * pv
        Ts_h = relax * Ts + (1 - relax) * w
        p_old, w_old = pv, w
        pv = _soft(s_h + u, 1.0 / rho)
        w = _project_ball(Ts_h + v, zs, eps)
        u = u + s_h - pv
        v = v + Ts_h - w

        if it % polish_every == 0:
            support = np.flatnonzero(pv)
            cand = _polish(T, zs, eps, support, np.sign(pv[support]), -rho * v)
            if cand is not None and cand[1]:
                return finish(cand[0], it, True)

        if it % 10 == 0:
            r_pri = math.sqrt(np.sum((s - pv) ** 2) + np.sum((Ts - w) ** 2))
            dp, dw = pv - p_old, w - w_old
            r_dual = rho * np.linalg.norm(dp + T.T @ dw)
            scale_pri = max(np.linalg.norm(s), np.linalg.norm(pv), 1e-300)
            scale_dual = max(rho * math.hypot(np.linalg.norm(u), np.linalg.norm(v)), 1e-300)
            rp, rd = r_pri / scale_pri, r_dual / scale_dual
            if rp <= tol and rd <= tol:
                break
            if rp > 10 * rd and rho < 1e8:
                rho *= 2.0
                u, v = u / 2.0, v / 2.0
            elif rd > 10 * rp and rho > 1e-8:
                rho /= 2.0
                u, v = u * 2.0, v * 2.0
    else:
        if not r_pri / scale_pri <= 1e3 * tol:
            raise DecodeError(f"ADMM did not converge in {max_iter} iterations "
                              f"(primal residual {r_pri:.3e}, dual residual {r_dual:.3e})", residual=r_pri)

    support = np.flatnonzero(pv)
    cand = _polish(T, zs, eps, support, np.sign(pv[support]), -rho * v)
    if cand is not None:
        return finish(cand[0], it, cand[1])
    return finish(_make_feasible(T, zs, eps, pv), it, False)


# -- verification oracle ---------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    s_hat: np.ndarray
    support: tuple[int, ...]
    residual_sq: float
    feasible: bool


def exhaustive_sparse_oracle(z, Theta, k, eps, max_n=20, max_k=3) -> OracleResult:
    """Sparsest-fit search: least squares on every support of size <= k.

    Among supports whose fit satisfies ``||z - Theta s||^2 <= eps^2`` the
    smallest l1 norm wins (ties: smaller support, then lexicographic). With
    no feasible support the best-residual fit is returned, flagged.
    """
    z = np.asarray(z, float)
    Theta = np.asarray(Theta, float)
    n = Theta.shape[1]
    if n > max_n or k > max_k:
        raise ValueError(f"exhaustive search limited to n <= {max_n}, k <= {max_k} (got n={n}, k={k})")
    z_norm = np.linalg.norm(z)
    best = None
    fallback = None
    for size in range(0, k + 1):
        for S in combinations(range(n), size):
            s = np.zeros(n)
            if size:
                s[list(S)] = np.linalg.lstsq(Theta[:, S], z, rcond=None)[0]
            r = z - Theta @ s
            res = float(r @ r)
            l1 = float(np.abs(s).sum())
            if res <= eps**2 + (1e-9 * z_norm) ** 2:
                if best is None or l1 < best[0] - 1e-12 * max(l1, 1.0):
                    best = (l1, S, s, res)
            elif fallback is None or res < fallback[0]:
                fallback = (res, S, s)
    if best is not None:
        return OracleResult(best[2], best[1], best[3], True)
    return OracleResult(fallback[2], fallback[1], fallback[0], False)


# -- restricted isometry ----------------------------------------------------------------


@dataclass(frozen=True)
class RipEstimate:
    k: int
    delta_k: float
    worst_support: tuple[int, ...]
    exhaustive: bool = True
    # extreme squared singular values over the supports examined
    sigma_min_sq: float = float("nan")
    sigma_max_sq: float = float("nan")


def _support_extremes(Theta, supports):
    # eigenvalues of the k x k Gram matrices; exact on exactly orthogonal
    # or duplicated columns, where squared singular values pick up roundoff
    sub = Theta[:, np.array(supports)].transpose(1, 0, 2)  # (count, m, k)
    ev = np.linalg.eigvalsh(np.einsum("cmi,cmj->cij", sub, sub))
    lo = np.zeros(len(supports)) if sub.shape[1] < sub.shape[2] else np.maximum(ev[:, 0], 0.0)
    return lo, ev[:, -1]


def rip_constant(Theta, k, max_supports=5000, n_samples=None, seed=None, chunk=2048) -> RipEstimate:
    """Smallest ``delta_k`` with ``1 - d <= ||Theta s||^2 / ||s||^2 <= 1 + d``
    for every ``k``-sparse ``s``.

    Exhaustive over all ``C(n, k)`` column subsets. If that count exceeds
    ``max_supports``, pass ``n_samples`` to examine random supports instead;
    the result is then only a lower bound (``exhaustive=False``).
    """
    Theta = np.asarray(Theta, float)
    n = Theta.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"order k={k} must be in 1..{n}")
    count = math.comb(n, k)
    if count <= max_supports:
        supports = list(combinations(range(n), k))
        exhaustive = True
    elif n_samples:
        rng = np.random.default_rng(seed)
        supports = sorted({tuple(sorted(rng.choice(n, k, replace=False))) for _ in range(n_samples)})
        exhaustive = False
    else:
        raise ValueError(f"C({n},{k}) = {count} supports exceeds max_supports={max_supports}; "
                         "pass n_samples for a sampled lower bound")
    delta, worst = -np.inf, None
    lo_all, hi_all = np.inf, -np.inf
    for i in range(0, len(supports), chunk):
        part = supports[i : i + chunk]
        lo, hi = _support_extremes(Theta, part)
        d = np.maximum(1 - lo, hi - 1)
        j = int(np.argmax(d))
        if d[j] > delta:
            delta, worst = float(d[j]), part[j]
        lo_all, hi_all = min(lo_all, lo.min()), max(hi_all, hi.max())
    return RipEstimate(k, max(delta, 0.0), tuple(int(c) for c in worst), exhaustive,
                       float(lo_all), float(hi_all))


def best_rip_scaling(est: RipEstimate) -> tuple[float, float]:
    """Gain ``c`` minimizing the RIP constant of ``c * Theta`` and that constant.

    Decoding ``(c z, c Theta, c eps)`` gives the same solution as
    ``(z, Theta, eps)``, so a certificate for the rescaled matrix applies.
    """
    a, b = est.sigma_min_sq, est.sigma_max_sq
    if not a > 0:
        return 1.0, 1.0
    return math.sqrt(2.0 / (a + b)), (b - a) / (a + b)


def c1_constant(delta_2k) -> float:
    if not 0 <= delta_2k < RIP_THRESHOLD:
        raise ValueError(f"delta_2k = {delta_2k} is outside [0, sqrt(2) - 1); the recovery bound does not apply")
    return 4.0 * math.sqrt(1.0 + delta_2k) / (1.0 - (1.0 + math.sqrt(2.0)) * delta_2k)


def error_bound(delta_2k, eps_sq) -> float:
    """Upper bound ``c1 * eps^2`` on ``||x - x_hat||^2``."""
    return c1_constant(delta_2k) * eps_sq
