"""Condensed box-constrained QP for the finite-horizon tracking problem.

The horizon window (time-varying discrete error dynamics, reference inputs,
quadratic weights, input box) is condensed by forward substitution into a
dense strictly convex QP over the stacked input deviations uhat = u - ud:

    min  0.5 uhat' P uhat + q' uhat (+ const)   s.t.  lo <= uhat <= hi

solved by gradient projection with exact line search along the projected
path plus a Newton step on the free set (finite termination on strictly
convex box QPs, no external solver).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ControlInput, DiscreteDynamics
from .liegroup import Twist

BIG_BOUND = 1e9  # stand-in for infinite bounds; keeps projection branch-free


@dataclass(frozen=True, eq=False)
class MpcWindow:
    """One receding-horizon window of the tracking problem.

    Q, Qf, H are the per-step weights as they appear in the objective
    psi_T' Qf psi_T + sum_k (psi_k' Q psi_k + uhat_k' H uhat_k); any
    timestep scaling is the caller's business.
    """

    horizon: int
    psi0: Twist
    dyn: tuple[DiscreteDynamics, ...]
    ud: tuple[ControlInput, ...]
    Q: np.ndarray
    Qf: np.ndarray
    H: np.ndarray
    lb: ControlInput
    ub: ControlInput

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        _check_weight(self.Q, "Q", min_eig=-1e-10)
        _check_weight(self.Qf, "Qf", min_eig=-1e-10)
        _check_weight(self.H, "H", min_eig=1e-12)
        if not (self.lb.mu <= self.ub.mu and self.lb.omega <= self.ub.omega):
            raise ValueError("lower input bound exceeds upper input bound")


def _check_weight(m: np.ndarray, name: str, min_eig: float) -> None:
    m = np.asarray(m, dtype=float)
    if m.shape != (m.shape[0], m.shape[0]):
        raise ValueError(f"{name} must be square")
    if np.max(np.abs(m - m.T)) > 1e-12:
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(m)[0] < min_eig:
        kind = "positive definite" if min_eig > 0 else "positive semidefinite"
        raise ValueError(f"{name} must be {kind}")


@dataclass(frozen=True, eq=False)
class BoxQp:
    """Dense strictly convex QP with per-variable bounds."""

    P: np.ndarray
    q: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    const: float = 0.0  # objective offset; makes the condensed value exact

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        q = np.asarray(self.q, dtype=float).ravel()
        lo = np.clip(np.asarray(self.lo, dtype=float).ravel(), -BIG_BOUND, BIG_BOUND)
        hi = np.clip(np.asarray(self.hi, dtype=float).ravel(), -BIG_BOUND, BIG_BOUND)
        n = q.size
        if P.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}, got {P.shape}")
        if np.max(np.abs(P - P.T)) > 1e-12:
            raise ValueError("P must be symmetric")
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            raise ValueError("P must be strictly positive definite") from None
        if lo.size != n or hi.size != n:
            raise ValueError("bound vectors must match the variable dimension")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.q.size

    def objective(self, uhat: np.ndarray) -> float:
        uhat = np.asarray(uhat, dtype=float)
        return float(0.5 * uhat @ self.P @ uhat + self.q @ uhat + self.const)


@dataclass(frozen=True, eq=False)
class QpSolution:
    uhat: np.ndarray
    iterations: int
    kkt_residual: float
    status: str  # "optimal" | "max_iter"
    trace: tuple[float, ...] = field(repr=False, default=())


def condense(w: MpcWindow) -> BoxQp:
    """Eliminate the error states by forward substitution.

    The returned QP satisfies, for every stacked uhat,
        0.5 uhat' P uhat + q' uhat + const
          == psi_T' Qf psi_T + sum_k (psi_k' Q psi_k + uhat_k' H uhat_k)
    with psi_{k+1} = Ak psi_k + Bk (uhat_k + ud_k) + ck rolled out from psi0.
    """
    T = w.horizon
    if len(w.dyn) != T or len(w.ud) != T:
        raise ValueError(
            f"window wants {T} dynamics/reference-input entries, "
            f"got {len(w.dyn)}/{len(w.ud)}"
        )
    n = 2 * T

    # Zero-input response r and input-response operator G, stacked over
    # psi_0 .. psi_T (block rows of height 3).
    G = np.zeros((3 * (T + 1), n))
    r = np.zeros(3 * (T + 1))
    r[0:3] = w.psi0.as_array()
    for k in range(1, T + 1):
        d = w.dyn[k - 1]
        lo, hi = 3 * (k - 1), 3 * k
        G[hi:hi + 3] = d.Ak @ G[lo:lo + 3]
        G[hi:hi + 3, 2 * (k - 1):2 * k] = d.Bk
        r[hi:hi + 3] = d.Ak @ r[lo:lo + 3] + d.Bk @ w.ud[k - 1].as_array() + d.ck

    # Apply the block-diagonal state weight (Q on steps 0..T-1, Qf on T).
    WG = np.empty_like(G)
    Wr = np.empty_like(r)
    for k in range(T + 1):
        blk = w.Q if k < T else w.Qf
        WG[3 * k:3 * k + 3] = blk @ G[3 * k:3 * k + 3]
        Wr[3 * k:3 * k + 3] = blk @ r[3 * k:3 * k + 3]

    P = 2.0 * (G.T @ WG + np.kron(np.eye(T), w.H))
    P = 0.5 * (P + P.T)
    q = 2.0 * (G.T @ Wr)
    const = float(r @ Wr)

    ud = np.concatenate([u.as_array() for u in w.ud])
    lo = np.tile([w.lb.mu, w.lb.omega], T) - ud
    hi = np.tile([w.ub.mu, w.ub.omega], T) - ud
    return BoxQp(P, q, lo, hi, const)


def kkt_residual(qp: BoxQp, uhat: np.ndarray) -> float:
    """Projected-gradient residual ||u - clamp(u - (Pu + q), lo, hi)||_inf."""
    uhat = np.asarray(uhat, dtype=float).ravel()
    if np.any(uhat < qp.lo) or np.any(uhat > qp.hi):
        raise ValueError("uhat violates the bounds")
    g = qp.P @ uhat + qp.q
    return float(np.max(np.abs(uhat - np.clip(uhat - g, qp.lo, qp.hi))))


def _cauchy_step(P, q, x, g, lo, hi):
    # Exact minimization along the projected steepest-descent path
    # x(t) = clamp(x - t g). Piecewise linear in t; walk the breakpoints.
    tb = np.full(x.size, np.inf)
    pos = g > 0
    neg = g < 0
    tb[pos] = (x[pos] - lo[pos]) / g[pos]
    tb[neg] = (hi[neg] - x[neg]) / (-g[neg])
    d = np.where(tb > 0, -g, 0.0)
    x = x.copy()
    t_prev = 0.0
    finite = np.isfinite(tb) & (tb > 0)
    for t_next in [*np.unique(tb[finite]), np.inf]:
        if not d.any():
            break
        gd = (P @ x + q) @ d
        if gd >= 0:
            break  # the path starts uphill here: segment start is the local min
        dPd = d @ P @ d
        seg = t_next - t_prev
        if dPd > 0 and -gd / dPd < seg:
            x += (-gd / dPd) * d
            break
        if not np.isfinite(t_next):
            break
        x += seg * d
        hit = tb == t_next
        x[hit & pos] = lo[hit & pos]
        x[hit & neg] = hi[hit & neg]
        d[hit] = 0.0
        t_prev = t_next
    return np.clip(x, lo, hi)


def solve(
    qp: BoxQp,
    tol: float = 1e-8,
    max_iter: int = 200,
    warm_start: np.ndarray | None = None,
) -> QpSolution:
    """Solve the box QP; every iterate (and the result) satisfies the bounds.

    On "max_iter" the best-so-far iterate is returned and the caller decides
    whether it is usable.
    """
    P, q, lo, hi = qp.P, qp.q, qp.lo, qp.hi
    n = qp.dim
    if warm_start is not None:
        x = np.clip(np.asarray(warm_start, dtype=float).ravel(), lo, hi)
        if x.size != n:
            raise ValueError("warm start has wrong dimension")
    else:
        x = np.clip(np.zeros(n), lo, hi)

    trace = []
    status = "max_iter"
    it = 0
    while True:
        g = P @ x + q
        res = float(np.max(np.abs(x - np.clip(x - g, lo, hi))))
        trace.append(res)
        if res <= tol:
            status = "optimal"
            break
        if it >= max_iter:
            break
        it += 1

        x = _cauchy_step(P, q, x, g, lo, hi)

        # Newton step on the free set of the Cauchy point, cut back to the
        # first bound it meets.
        g = P @ x + q
        free = (x > lo) & (x < hi)
        if free.any():
            d = np.zeros(n)
            d[free] = np.linalg.solve(P[np.ix_(free, free)], -g[free])
            if g @ d < 0:
                alpha = 1.0
                up = d > 0
                dn = d < 0
                if up.any():
                    alpha = min(alpha, float(np.min((hi[up] - x[up]) / d[up])))
                if dn.any():
                    alpha = min(alpha, float(np.min((lo[dn] - x[dn]) / d[dn])))
                if alpha > 0:
                    x = np.clip(x + alpha * d, lo, hi)

    return QpSolution(x, it, trace[-1], status, tuple(trace))
