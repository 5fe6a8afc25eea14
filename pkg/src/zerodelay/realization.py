"""Feedback test channel that realizes the NRDF, and its ideal AWGN simulation.

The channel works on the innovation ``k = x - A y_prev``. The encoder sends
``alpha = Phi E k`` over parallel Gaussian channels ``beta = alpha + v`` and
the decoder updates ``y = E^-1 Theta beta + A y_prev``. With the diagonal
gains below this update is exactly the steady-state Kalman filter, so the
end-to-end error covariance equals the optimal posterior covariance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateComponent, DimensionMismatch, NonPositiveVariance
from .model import UNIT_CIRCLE_TOL, simulate_source
from .nrdf import NrdfSolution

#: Relative gap under which a posterior variance is treated as equal to its prior.
SNAP_TOL = 1e-9
DEFAULT_V = 1.0 / 12.0


@dataclass(frozen=True)
class RealizationParams:
    E: np.ndarray
    E_inv: np.ndarray
    h: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    delta: np.ndarray

    @property
    def p(self):
        return self.h.size

    @property
    def active(self):
        """Mask of components that carry information (``H_ii > 0``)."""
        return self.h > 0

    @property
    def H(self):
        return np.diag(self.h)

    @property
    def Theta(self):
        return np.diag(self.theta)

    @property
    def Phi(self):
        return np.diag(self.phi)

    @property
    def sigma_v(self):
        return np.diag(self.v)

    @property
    def precoder(self):
        """Encoder matrix ``Phi E`` applied to the innovation."""
        return self.phi[:, None] * self.E

    @property
    def postcoder(self):
        """Decoder matrix ``E^-1 Theta`` applied to the channel output."""
        return self.E_inv * self.theta[None, :]

    @property
    def alpha_var(self):
        """Per-component variance of ``alpha`` in steady state, ``Phi^2 lam``."""
        return self.phi**2 * self.lam

    def channel_rate(self):
        """Sum of parallel Gaussian channel capacities ``1/2 log2(1 + Phi^2 lam / V)``."""
        return float(0.5 * np.sum(np.log2(1.0 + self.alpha_var / self.v)))


@dataclass
class RealizationTrace:
    """Per-step record of the channel loop.

    ``x``, ``x_pred`` and ``y`` are ``None`` when the run was carried out in
    the error frame (unstable source without a supplied trajectory), where
    only ``x - y`` stays representable in floating point.
    """

    k: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    k_tilde: np.ndarray
    err: np.ndarray
    x: np.ndarray | None = None
    x_pred: np.ndarray | None = None
    y: np.ndarray | None = None

    @property
    def sqerr(self):
        return np.sum(self.err**2, axis=1)

    def mse(self, burn_in=0):
        return float(self.sqerr[burn_in:].mean())

    def write_csv(self, path):
        n, p = self.k.shape
        blank = np.full((n, p), np.nan)
        cols = ["t"]
        for name in ("x", "y", "k", "ktilde"):
            cols += [f"{name}_{i + 1}" for i in range(p)]
        cols.append("sqerr")
        err = self.sqerr
        blocks = [blank if a is None else a for a in (self.x, self.y, self.k, self.k_tilde)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for t in range(n):
                row = [t]
                for arr in blocks:
                    row += [f"{v:.9g}" for v in arr[t]]
                row.append(f"{err[t]:.9g}")
                w.writerow(row)


def derive_channel(sol: NrdfSolution, sigma_v=None) -> RealizationParams:
    """Channel gains for an NRDF solution.

    ``H = 1 - delta/lam``, ``Theta = sqrt(H delta / V)`` and ``Phi = H / Theta``
    per component. ``sigma_v`` is the diagonal channel-noise covariance
    (default ``1/12`` on every component, i.e. unit quantizer steps); any
    positive choice works because ``Theta`` compensates for it.
    Zero-rate components (``delta == lam``) get ``Theta = Phi = 0``.
    """
    lam = np.asarray(sol.lam, dtype=float)
    delta = np.asarray(sol.delta, dtype=float).copy()
    p = lam.size
    if sigma_v is None:
        v = np.full(p, DEFAULT_V)
    else:
        sv = np.asarray(sigma_v, dtype=float)
        v = np.diag(sv).copy() if sv.ndim == 2 else sv.ravel().copy()
        if v.size == 1:
            v = np.full(p, v[0])
        if v.size != p:
            raise DimensionMismatch(f"sigma_v must have {p} diagonal entries")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise NonPositiveVariance("channel noise variances must be positive")
    if np.any(delta > lam * (1 + SNAP_TOL)):
        raise DegenerateComponent("a posterior variance exceeds its prior variance")
    delta = np.where(lam - delta <= SNAP_TOL * lam, lam, delta)
    h = 1.0 - delta / lam
    theta = np.sqrt(h * delta / v)
    phi = np.divide(h, theta, out=np.zeros(p), where=theta > 0)
    E = np.asarray(sol.E, dtype=float)
    return RealizationParams(E=E, E_inv=np.linalg.inv(E), h=h, theta=theta, phi=phi, v=v,
                             lam=lam, delta=delta)


def simulate_awgn(m, params: RealizationParams, sol: NrdfSolution | None = None, n: int = 1000,
                  seed=None, *, x=None, noise_scale=1.0) -> RealizationTrace:
    """Run the ideal channel loop with Gaussian noise ``v ~ N(0, diag(V))``.

    Without ``x`` the source is drawn from ``m``: in absolute coordinates if
    ``A`` is strictly stable, otherwise in the error frame
    ``k[t+1] = A (k[t] - k_tilde[t]) + B w[t]``, which is the same loop
    written without the exploding states. ``noise_scale`` multiplies the
    channel noise standard deviation (0 gives a noiseless channel).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    mm = getattr(m, "model", m)
    A, B = np.asarray(mm.A), np.asarray(mm.B)
    p = A.shape[0]
    src_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    if x is None and np.max(np.abs(np.linalg.eigvals(A))) < 1 - UNIT_CIRCLE_TOL:
        x = simulate_source(mm, n - 1, np.random.default_rng(src_seed))
    rng = np.random.default_rng(noise_seed)
    v = noise_scale * rng.standard_normal((n, p)) * np.sqrt(params.v)
    pre, post = params.precoder, params.postcoder
    k = np.empty((n, p))
    alpha = np.empty((n, p))
    beta = np.empty((n, p))
    k_tilde = np.empty((n, p))
    if x is not None:
        x = np.asarray(x, dtype=float)
        if x.shape != (n, p):
            raise DimensionMismatch(f"x must have shape {(n, p)}, got {x.shape}")
        x_pred = np.empty((n, p))
        y = np.empty((n, p))
        y_prev = np.zeros(p)
        for t in range(n):
            x_pred[t] = A @ y_prev
            k[t] = x[t] - x_pred[t]
            alpha[t] = pre @ k[t]
            beta[t] = alpha[t] + v[t]
            k_tilde[t] = post @ beta[t]
            y[t] = k_tilde[t] + x_pred[t]
            y_prev = y[t]
        return RealizationTrace(k=k, alpha=alpha, beta=beta, k_tilde=k_tilde, err=x - y,
                                x=x, x_pred=x_pred, y=y)
    src = np.random.default_rng(src_seed)
    w_, V_ = np.linalg.eigh(mm.sigma_x0)
    kt = (V_ * np.sqrt(np.clip(w_, 0, None))) @ src.standard_normal(p)
    drive = src.standard_normal((n, B.shape[1])) @ B.T
    err = np.empty((n, p))
    for t in range(n):
        k[t] = kt
        alpha[t] = pre @ kt
        beta[t] = alpha[t] + v[t]
        k_tilde[t] = post @ beta[t]
        err[t] = kt - k_tilde[t]
        kt = A @ err[t] + drive[t]
    return RealizationTrace(k=k, alpha=alpha, beta=beta, k_tilde=k_tilde, err=err)


@dataclass(frozen=True)
class KalmanRun:
    prior: list
    post: list
    gains: list
    converged_at: int | None

    @property
    def G(self):
        return self.gains[-1]


def kalman_recursion(m, params: RealizationParams, sol: NrdfSolution, horizon: int = 500,
                     pi0=None, tol=1e-6) -> KalmanRun:
    """Riccati recursion of the filter that observes ``beta = Phi E x + v``.

    Returns the prior and posterior covariances for ``t = 0 .. horizon - 1``
    and the normalized gains ``G_t``, defined through ``K_t = E^-1 Theta G_t``
    (``G_t = I`` means the filter gain equals the designed decoder gain;
    zero-rate rows of ``G_t`` are reported as identity). ``converged_at`` is
    the first ``t`` with ``||Pi_{t|t-1} - Pi||_F <= tol`` (``None`` if never).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    mm = getattr(m, "model", m)
    A, W = np.asarray(mm.A), np.asarray(mm.W)
    C = params.precoder
    V = params.sigma_v
    E = params.E
    act = params.active
    theta_pinv = np.divide(1.0, params.theta, out=np.zeros(params.p), where=act)
    P = np.array(sol.pi_prior if pi0 is None else pi0, dtype=float)
    priors, posts, gains = [], [], []
    converged = None
    for t in range(horizon):
        priors.append(P)
        if converged is None and np.linalg.norm(P - sol.pi_prior) <= tol:
            converged = t
        S = C @ P @ C.T + V
        K = np.linalg.solve(S.T, (P @ C.T).T).T
        G = theta_pinv[:, None] * (E @ K)
        G[~act] = 0.0
        G[~act, ~act] = 1.0
        Pp = P - K @ C @ P
        Pp = 0.5 * (Pp + Pp.T)
        posts.append(Pp)
        gains.append(G)
        P = A @ Pp @ A.T + W
        P = 0.5 * (P + P.T)
    return KalmanRun(prior=priors, post=posts, gains=gains, converged_at=converged)


def designed_posterior(params: RealizationParams):
    """``E^-1 diag(delta) E^-T``, the posterior covariance the channel is built for."""
    return params.E_inv @ np.diag(params.delta) @ params.E_inv.T
