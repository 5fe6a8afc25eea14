"""Steady-state nonanticipative rate-distortion function (NRDF).

For the source ``x[t+1] = A x[t] + B w[t]`` and a per-step sum-MSE budget
``D``, the steady-state NRDF is the value of the log-determinant program

    R(D) = min  1/2 log2( det(A P A' + W) / det(P) )
           s.t. 0 < P,  P <= A P A' + W,  trace(P) <= D

where ``P`` is the posterior (filtering) error covariance, ``A P A' + W`` the
prior (prediction) covariance and ``W = B B'``. The objective is convex in
``P`` (it is a Gaussian mutual information viewed as a function of the noise
covariance, composed with a linear map), so :func:`solve_nrdf` uses a
log-barrier Newton method by default. A structured fixed-point iteration that
reverse-waterfills in the eigenbasis of the prior is available as
``method="fixed_point"``; it is cheaper but only optimal in special cases
(scalar sources, ``A = a I`` with ``W = w I``, ...).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import check_positive_scalar
from .exceptions import (DimensionTooLarge, InvalidGp, NoConvergence, NonPositiveInput,
                         NotStabilizable, ZeroDelayError)
from .model import UNIT_CIRCLE_TOL, StateSpaceModel, ValidatedModel, validate_model

LN2 = math.log(2.0)
#: ``1/2 log2(pi e / 6)``: rate loss of a scalar uniform quantizer per dimension.
SCALAR_SPACE_FILLING = 0.5 * math.log2(math.pi * math.e / 6.0)
#: Normalized second moment of the ideal (sphere-like) lattice.
G_SPHERE = 1.0 / (2.0 * math.pi * math.e)


@dataclass(frozen=True)
class NrdfSolution:
    """Optimal steady-state covariances at distortion ``D``.

    ``E`` jointly diagonalizes both covariances: ``E pi_prior E' = diag(lam)``
    and ``E pi_post E' = diag(delta)``. Its rows have unit norm. When the two
    covariances commute (always for ``p = 1`` and for the fixed-point method)
    ``E`` is orthogonal; otherwise it is merely invertible and the decoder
    must use ``E_inv`` in place of ``E'``.
    """

    D: float
    pi_post: np.ndarray
    pi_prior: np.ndarray
    E: np.ndarray
    lam: np.ndarray
    delta: np.ndarray
    rate: float
    water_level: float
    iterations: int
    residual: float
    method: str = "barrier"

    @property
    def p(self) -> int:
        return self.pi_post.shape[0]

    @property
    def E_inv(self) -> np.ndarray:
        return np.linalg.inv(self.E)

    @property
    def orthogonal(self) -> bool:
        return bool(np.allclose(self.E @ self.E.T, np.eye(self.p), atol=1e-10, rtol=0))

    @property
    def component_rates(self) -> np.ndarray:
        """Per-component rates ``1/2 log2(lam_i / delta_i)`` in bits."""
        return 0.5 * np.log2(self.lam / self.delta)

    def summary(self) -> dict:
        return {
            "D": self.D,
            "rate_bits": self.rate,
            "method": self.method,
            "iterations": self.iterations,
            "residual": self.residual,
            "water_level": self.water_level,
            "lam": self.lam.tolist(),
            "delta": self.delta.tolist(),
            "pi_post": self.pi_post.tolist(),
            "pi_prior": self.pi_prior.tolist(),
            "E": self.E.tolist(),
        }


@dataclass(frozen=True)
class BoundsReport:
    lower: float
    upper_scalar: float
    upper_lattice: float | None
    space_filling_gap_scalar: float
    g_p: float | None
    p: int


# -- reverse water-filling ---------------------------------------------------

def reverse_waterfill(lam, D):
    """Distortion allocation ``delta_i = min(xi, lam_i)`` with ``sum(delta) = D``.

    If ``sum(lam) <= D`` every component is left at its variance and the
    water level is ``max(lam)``.

    Returns
    -------
    delta : ndarray
    xi : float
    """
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size == 0 or np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise NonPositiveInput("all variances must be positive")
    D = check_positive_scalar(D, "D")
    if lam.sum() <= D:
        return lam.copy(), float(lam.max())
    # exact level: sort ascending and find the first component that saturates
    srt = np.sort(lam)
    below = 0.0
    n = srt.size
    xi = srt[-1]
    for k in range(n):
        level = (D - below) / (n - k)
        if level <= srt[k]:
            xi = level
            break
        below += srt[k]
    delta = np.minimum(xi, lam)
    return delta, float(xi)


# -- decomposition helpers -------------------------------------------------

def _fix_signs(E):
    for row in E:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return E


def _eig_desc(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(w)[::-1]
    return w[order], _fix_signs(V[:, order].T.copy())


def joint_diagonalizer(pi_prior, pi_post):
    """Return ``(E, lam, delta)`` with unit-norm rows diagonalizing both matrices.

    Prefers the orthogonal eigenbasis of ``pi_prior``; falls back to the
    generalized eigenvectors of the pencil ``(pi_post, pi_prior)`` when the
    two matrices do not commute. Rows are sorted by ``lam`` descending and
    signed so the first nonzero entry is positive.
    """
    lam, E = _eig_desc(pi_prior)
    C = E @ pi_post @ E.T
    off = C - np.diag(np.diag(C))
    scale = max(np.abs(pi_post).max(), 1e-300)
    if np.abs(off).max() <= 1e-9 * scale:
        delta = np.minimum(np.diag(C).copy(), lam)
        return E, lam, delta
    mu, V = scipy.linalg.eigh(pi_post, pi_prior)
    T = V.T
    norms = np.linalg.norm(T, axis=1)
    T = T / norms[:, None]
    lam = np.einsum("ij,jk,ik->i", T, pi_prior, T)
    delta = np.einsum("ij,jk,ik->i", T, pi_post, T)
    order = np.argsort(lam)[::-1]
    T, lam, delta = _fix_signs(T[order].copy()), lam[order], delta[order]
    delta = np.minimum(delta, lam)
    return T, lam, delta


def _rate_bits(pi_prior, pi_post):
    s1, ld1 = np.linalg.slogdet(pi_prior)
    s2, ld2 = np.linalg.slogdet(pi_post)
    if s1 <= 0 or s2 <= 0:
        raise ZeroDelayError("covariance lost positive definiteness")
    return max(0.0, 0.5 * (ld1 - ld2) / LN2)


def _stable(A):
    return np.max(np.abs(np.linalg.eigvals(A))) < 1 - UNIT_CIRCLE_TOL


def _make_solution(D, pi_post, pi_prior, water_level, iterations, residual, method):
    pi_post = 0.5 * (pi_post + pi_post.T)
    pi_prior = 0.5 * (pi_prior + pi_prior.T)
    E, lam, delta = joint_diagonalizer(pi_prior, pi_post)
    rate = _rate_bits(pi_prior, pi_post)
    return NrdfSolution(D=float(D), pi_post=pi_post, pi_prior=pi_prior, E=E, lam=lam,
                        delta=delta, rate=rate, water_level=float(water_level),
                        iterations=int(iterations), residual=float(residual), method=method)


def _zero_rate_solution(A, W, D):
    """Stable source whose stationary covariance already meets the budget."""
    if not _stable(A):
        return None
    S = scipy.linalg.solve_discrete_lyapunov(A, W)
    S = 0.5 * (S + S.T)
    if np.trace(S) > D:
        return None
    lam, E = _eig_desc(S)
    return NrdfSolution(D=float(D), pi_post=S, pi_prior=S.copy(), E=E, lam=lam, delta=lam.copy(),
                        rate=0.0, water_level=float(lam.max()), iterations=0, residual=0.0,
                        method="lyapunov")


# -- barrier (interior point) solver ------------------------------------------

def _sym_basis(p):
    basis = []
    r = 1.0 / math.sqrt(2.0)
    for i in range(p):
        for j in range(i, p):
            M = np.zeros((p, p))
            if i == j:
                M[i, i] = 1.0
            else:
                M[i, j] = M[j, i] = r
            basis.append(M)
    return np.array(basis)


def _chol_ok(M):
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


def _interior_start(A, W, D):
    """A strictly feasible posterior covariance.

    Runs the Riccati recursion of a Kalman filter observing the full state in
    white noise of variance ``D / (2p)``; its fixed point ``P`` satisfies
    ``P < A P A' + W`` strictly and ``trace(P) < D / 2``.
    """
    p = A.shape[0]
    s2 = D / (2.0 * p)
    X = s2 * np.eye(p)
    for _ in range(20000):
        Pi = A @ X @ A.T + W
        Xn = s2 * np.linalg.solve((Pi + s2 * np.eye(p)).T, Pi.T).T
        Xn = 0.5 * (Xn + Xn.T)
        done = np.abs(Xn - X).max() <= 1e-13 * max(1.0, np.abs(X).max())
        X = Xn
        if done:
            break
    Pi = A @ X @ A.T + W
    if not (_chol_ok(X) and _chol_ok(Pi - X) and np.trace(X) < D):
        raise ZeroDelayError("could not find a strictly feasible point; the source covariance is "
                             "degenerate (singular prediction error covariance)")
    return X


def _solve_barrier(A, W, D, *, tol, max_iter, mu=30.0, center_tol=1e-3):
    p = A.shape[0]
    basis = _sym_basis(p)
    ABA = np.einsum("ij,kjl,ml->kim", A, basis, A)   # A E_k A'
    LS = ABA - basis                                 # A E_k A' - E_k
    traces = np.einsum("kii->k", basis)
    m_barrier = 1 + p
    I = np.eye(p)

    def mat(v):
        return np.einsum("k,kij->ij", v, basis)

    def vec(M):
        return np.einsum("kij,ij->k", basis, M)

    def phi(X, t):
        Pi = A @ X @ A.T + W
        S = Pi - X
        slack = D - np.trace(X)
        if slack <= 0:
            return np.inf
        try:
            lp = 2 * np.log(np.diag(np.linalg.cholesky(Pi))).sum()
            lx = 2 * np.log(np.diag(np.linalg.cholesky(X))).sum()
            ls = 2 * np.log(np.diag(np.linalg.cholesky(S))).sum()
        except np.linalg.LinAlgError:
            return np.inf
        return t * (lp - lx) - math.log(slack) - ls

    X = _interior_start(A, W, D)
    t = 1.0
    newton_steps = 0
    while True:
        # only the last round needs exact centering for the gap bound to hold
        final = m_barrier / t <= tol
        for _ in range(200):
            Pi = A @ X @ A.T + W
            S = Pi - X
            slack = D - np.trace(X)
            Pi_inv = np.linalg.inv(Pi)
            X_inv = np.linalg.inv(X)
            S_inv = np.linalg.inv(S)
            G = (t * (A.T @ Pi_inv @ A - X_inv) + I / slack - (A.T @ S_inv @ A - S_inv))
            g = vec(0.5 * (G + G.T))
            P = np.einsum("ij,kjl->kil", Pi_inv, ABA)
            Q = np.einsum("ij,kjl->kil", X_inv, basis)
            R = np.einsum("ij,kjl->kil", S_inv, LS)
            H = (t * (np.einsum("kij,lji->kl", Q, Q) - np.einsum("kij,lji->kl", P, P))
                 + np.outer(traces, traces) / slack**2 + np.einsum("kij,lji->kl", R, R))
            H = 0.5 * (H + H.T)
            try:
                dx = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            dec = float(-g @ dx)
            newton_steps += 1
            if dec / 2 <= (1e-10 if final else center_tol):
                break
            f0 = phi(X, t)
            step = 1.0
            dX = mat(dx)
            slope = float(g @ dx)
            while step > 1e-14:
                f1 = phi(X + step * dX, t)
                if f1 <= f0 + 0.25 * step * slope + 1e-13 * abs(f0):
                    break
                step *= 0.5
            else:
                break
            X = X + step * dX
            X = 0.5 * (X + X.T)
            if newton_steps > max_iter:
                raise NoConvergence("barrier method exceeded max_iter Newton steps",
                                    residual=m_barrier / t, iterations=newton_steps)
        if final:
            break
        t *= mu
    slack = D - np.trace(X)
    return X, A @ X @ A.T + W, t * slack, newton_steps, m_barrier / t


# -- structured fixed point ----------------------------------------------------

def _solve_fixed_point(A, W, D, *, tol, max_iter, damping, init=None):
    p = A.shape[0]
    X = (D / p) * np.eye(p) if init is None else np.array(init, dtype=float)
    xi = float("nan")
    resid = float("inf")
    for it in range(1, max_iter + 1):
        Pi = A @ X @ A.T + W
        lam, E = _eig_desc(Pi)
        delta, xi = reverse_waterfill(np.maximum(lam, 1e-300), D)
        Xn = E.T @ np.diag(delta) @ E
        resid = float(np.linalg.norm(Xn - X))
        X = (1 - damping) * X + damping * Xn
        X = 0.5 * (X + X.T)
        if resid <= tol:
            # land exactly on the waterfilled point of the converged prior
            Pi = A @ X @ A.T + W
            lam, E = _eig_desc(Pi)
            delta, xi = reverse_waterfill(lam, D)
            X = E.T @ np.diag(delta) @ E
            return 0.5 * (X + X.T), A @ X @ A.T + W, xi, it, resid
    raise NoConvergence(f"fixed-point iteration did not reach tol={tol:g} in {max_iter} iterations "
                        f"(residual {resid:.3g})", residual=resid, iterations=max_iter)


def _as_validated(m):
    if isinstance(m, ValidatedModel):
        return m
    if isinstance(m, StateSpaceModel):
        return validate_model(m)
    raise TypeError(f"expected a StateSpaceModel, got {type(m).__name__}")


def solve_nrdf(m, D, *, method="barrier", tol=1e-10, max_iter=10_000, damping=0.5,
               init=None) -> NrdfSolution:
    """Steady-state NRDF of a stabilizable source at distortion ``D``.

    Parameters
    ----------
    m : StateSpaceModel or ValidatedModel
    D : float
        Per-step sum-MSE budget.
    method : {"barrier", "fixed_point"}
        ``"barrier"`` solves the log-det program to global optimality; ``tol``
        bounds its duality gap (in nats of ``2 R``). ``"fixed_point"``
        alternates ``Pi = A P A' + W`` with reverse water-filling in the
        eigenbasis of ``Pi`` (damping ``damping``) until the Frobenius step is
        below ``tol``; its value is an upper bound on the NRDF.
    init : array-like, optional
        Starting posterior covariance for the fixed-point method.

    Raises
    ------
    NotStabilizable, NoConvergence
    """
    vm = _as_validated(m)
    if not vm.spectrum.is_stabilizable:
        raise NotStabilizable("the pair (A, B) is not stabilizable")
    D = check_positive_scalar(D, "D")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    A, W = np.asarray(vm.A), np.asarray(vm.W)
    zero = _zero_rate_solution(A, W, D)
    if zero is not None:
        return zero
    if method == "barrier":
        X, Pi, xi, iters, resid = _solve_barrier(A, W, D, tol=tol, max_iter=max_iter)
    elif method == "fixed_point":
        X, Pi, xi, iters, resid = _solve_fixed_point(A, W, D, tol=tol, max_iter=max_iter,
                                                     damping=damping, init=init)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _make_solution(D, X, Pi, xi, iters, resid, method)


def rate_distortion_sweep(m, D_grid, *, n_jobs=1, **solver_opts):
    """Solve on an increasing grid of distortions.

    The fixed-point method is warm-started from the previous solution. Rates
    must come out non-increasing in ``D`` (to 1e-6 bits); a violation raises.
    Any solver error is re-raised with a ``distortion`` attribute naming the
    offending grid point.
    """
    D_grid = [float(d) for d in np.asarray(D_grid, dtype=float).ravel()]
    if not D_grid:
        raise ValueError("distortion grid is empty")
    if any(d <= 0 for d in D_grid) or any(b <= a for a, b in zip(D_grid, D_grid[1:])):
        raise ValueError("distortion grid must be positive and strictly increasing")
    vm = _as_validated(m)
    results = []
    if n_jobs is not None and n_jobs != 1 and len(D_grid) > 1:
        workers = None if n_jobs in (-1, 0) else n_jobs
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(solve_nrdf, vm.model, d, **solver_opts) for d in D_grid]
            for d, fut in zip(D_grid, futures):
                try:
                    results.append((d, fut.result()))
                except ZeroDelayError as exc:
                    exc.distortion = d
                    raise
    else:
        prev = None
        for d in D_grid:
            opts = dict(solver_opts)
            if prev is not None and opts.get("method") == "fixed_point" and prev.rate > 0:
                opts.setdefault("init", prev.pi_post)
            try:
                sol = solve_nrdf(vm, d, **opts)
            except ZeroDelayError as exc:
                exc.distortion = d
                raise
            results.append((d, sol))
            prev = sol
    for (d0, s0), (d1, s1) in zip(results, results[1:]):
        if s1.rate > s0.rate + 1e-6:
            err = ZeroDelayError(f"rate increased from {s0.rate:.9g} at D={d0:.9g} "
                                 f"to {s1.rate:.9g} at D={d1:.9g}")
            err.distortion = d1
            raise err
    return results


def bounds(sol: NrdfSolution, g_p=None) -> BoundsReport:
    """Lower bound (the NRDF) and the two operational upper bounds.

    ``upper_scalar = R + p/2 log2(pi e / 6) + 1`` for uniform scalar
    quantizers; ``upper_lattice = R + p/2 log2(2 pi e G_p) + 1`` for a lattice
    with normalized second moment ``g_p``.
    """
    p = sol.p
    gap = p * SCALAR_SPACE_FILLING + 1.0
    lattice = None
    if g_p is not None:
        g_p = float(g_p)
        if not np.isfinite(g_p) or g_p < G_SPHERE - 1e-15:
            raise InvalidGp(f"G_p={g_p!r} is below the sphere bound 1/(2 pi e)")
        lattice = sol.rate + 0.5 * p * math.log2(2 * math.pi * math.e * g_p) + 1.0
    return BoundsReport(lower=sol.rate, upper_scalar=sol.rate + gap, upper_lattice=lattice,
                        space_filling_gap_scalar=gap, g_p=g_p, p=p)


# -- brute-force oracle ---------------------------------------------------

def _oracle_p1(a, w, D, resolution, refine):
    def evaluate(d):
        prior = a * a * d + w
        feas = prior - d >= -1e-9
        r = 0.5 * np.log2(np.maximum(1.0, prior / d))
        return np.where(feas, r, np.inf)

    d = D * np.arange(1, resolution + 1) / resolution
    vals = evaluate(d)
    k = int(np.argmin(vals))
    best, centre, width = vals[k], d[k], D / resolution
    for _ in range(refine):
        d = np.clip(centre + width * np.linspace(-2, 2, 41), D * 1e-12, D)
        vals = evaluate(d)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, centre = vals[k], d[k]
        width /= 10
    return float(best)


def _oracle_eval_p2(A, W, D, s, tau, th):
    """Rates on a grid; s, tau, th broadcast against each other."""
    d1 = tau * s * D
    d2 = tau * (1 - s) * D
    c, sn = np.cos(th), np.sin(th)
    x11 = d1 * c * c + d2 * sn * sn
    x22 = d1 * sn * sn + d2 * c * c
    x12 = (d1 - d2) * c * sn
    (a, b), (cc, dd) = A
    # prior = A X A' + W, written out for 2x2
    ax11 = a * x11 + b * x12
    ax12 = a * x12 + b * x22
    ax21 = cc * x11 + dd * x12
    ax22 = cc * x12 + dd * x22
    p11 = ax11 * a + ax12 * b + W[0, 0]
    p12 = ax11 * cc + ax12 * dd + W[0, 1]
    p22 = ax21 * cc + ax22 * dd + W[1, 1]
    det_prior = p11 * p22 - p12 * p12
    det_post = d1 * d2
    g11, g12, g22 = p11 - x11, p12 - x12, p22 - x22
    min_eig = 0.5 * (g11 + g22) - np.sqrt(0.25 * (g11 - g22) ** 2 + g12 * g12)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 0.5 * np.log2(np.maximum(1.0, det_prior / det_post))
    return np.where((min_eig >= -1e-9) & (det_post > 0), r, np.inf)


def _oracle_stationary(A, W, D):
    if not _stable(A):
        return math.inf
    S = scipy.linalg.solve_discrete_lyapunov(A, W)
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    if w[0] <= 0 or w.sum() > D:
        return math.inf
    # larger eigenvalue along (cos th, sin th)
    th = math.atan2(V[1, 1], V[0, 1])
    return float(_oracle_eval_p2(A, W, D, w[1] / w.sum(), w.sum() / D, th))


def grid_oracle_nrdf(m, D, resolution=200, refine=12, keep=4) -> float:
    """Brute-force NRDF for ``p <= 2`` (validation oracle).

    For ``p = 2`` the posterior covariance is written as
    ``R(theta) diag(d1, d2) R(theta)'`` with ``d1 = tau s D`` and
    ``d2 = tau (1 - s) D``; ``(s, tau, theta)`` run over a ``resolution**3``
    grid. The ``keep`` best angles then seed a zoomed pattern search: the
    box is recentred on its best point and shrunk by 4 only when that point
    is interior, until it has shrunk ``refine`` times. Infeasible points (``P`` not
    below ``A P A' + W``, checked to 1e-9) are discarded.

    A stable source's stationary covariance is a feasible zero-rate point
    that no finite grid hits exactly, so it is evaluated as an extra
    candidate whenever its trace fits the budget.
    """
    m = m.model if isinstance(m, ValidatedModel) else m
    D = check_positive_scalar(D, "D")
    A, W = np.asarray(m.A), np.asarray(m.W)
    p = A.shape[0]
    if p > 2:
        raise DimensionTooLarge("the grid oracle supports p <= 2 only")
    if p == 1:
        return _oracle_p1(A[0, 0], W[0, 0], D, resolution, refine)

    s = np.arange(1, resolution) / resolution
    tau = np.arange(1, resolution + 1) / resolution
    th = np.arange(resolution) * math.pi / resolution
    S, T = np.meshgrid(s, tau, indexing="ij")
    seeds = []
    for angle in th:
        vals = _oracle_eval_p2(A, W, D, S, T, angle)
        k = np.unravel_index(np.argmin(vals), vals.shape)
        seeds.append((float(vals[k]), S[k], T[k], angle))
    seeds.sort(key=lambda c: c[0])
    best = min(seeds[0][0], _oracle_stationary(A, W, D))
    for val, s0, t0, a0 in seeds[:keep]:
        if not np.isfinite(val):
            continue
        widths = np.array([1.0 / resolution, 1.0 / resolution, math.pi / resolution])
        shrinks = rounds = 0
        while shrinks < refine and rounds < 40 * refine:
            rounds += 1
            ss = np.clip(s0 + widths[0] * np.linspace(-2, 2, 17), 1e-12, 1 - 1e-12)
            tt = np.clip(t0 + widths[1] * np.linspace(-2, 2, 17), 1e-12, 1.0)
            aa = a0 + widths[2] * np.linspace(-2, 2, 17)
            Sg, Tg, Ag = np.meshgrid(ss, tt, aa, indexing="ij")
            vals = _oracle_eval_p2(A, W, D, Sg, Tg, Ag)
            k = np.unravel_index(np.argmin(vals), vals.shape)
            if vals[k] <= val:
                val, s0, t0, a0 = float(vals[k]), Sg[k], Tg[k], Ag[k]
            if all(0 < i < 16 for i in k) or not np.isfinite(val):
                widths = widths / 4
                shrinks += 1
        best = min(best, val)
    return best


# -- export ------------------------------------------------------------------

def write_sweep_csv(results, path, g_p=None):
    """Write ``D,rate_bits,upper_scalar_bits,upper_lattice_bits,iterations,residual``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["D", "rate_bits", "upper_scalar_bits", "upper_lattice_bits",
                         "iterations", "residual"])
        for d, sol in results:
            b = bounds(sol, g_p)
            lattice = "nan" if b.upper_lattice is None else f"{b.upper_lattice:.9g}"
            writer.writerow([f"{d:.9g}", f"{sol.rate:.9g}", f"{b.upper_scalar:.9g}", lattice,
                             sol.iterations, f"{sol.residual:.9g}"])
