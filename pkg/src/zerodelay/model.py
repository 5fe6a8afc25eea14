"""Vector Gauss-Markov sources ``x[t+1] = A x[t] + B w[t]``.

Covers model validation (spectrum and stabilizability), the block-companion
augmentation that turns an AR(s) recursion into an AR(1) one, seeded
simulation and the JSON/CSV formats used by the command line.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from ._validation import as_matrix, check_square, check_symmetric_psd, readonly
from .exceptions import ConfigError, DimensionMismatch, NotStabilizable

#: Eigenvalues with ``| |lambda| - 1 | <= UNIT_CIRCLE_TOL`` are treated as marginal.
UNIT_CIRCLE_TOL = 1e-10


@dataclass(frozen=True)
class StateSpaceModel:
    """Linear time-invariant Gaussian source.

    Parameters
    ----------
    A : array-like of shape (p, p)
        State transition matrix.
    B : array-like of shape (p, q)
        Noise gain; ``w[t]`` is i.i.d. ``N(0, I_q)``.
    sigma_x0 : array-like of shape (p, p), optional
        Covariance of ``x[0]``. When omitted it is the stationary covariance
        (solution of ``S = A S A' + B B'``) if ``A`` is strictly stable and the
        identity otherwise.
    """

    A: np.ndarray
    B: np.ndarray
    sigma_x0: np.ndarray | None = None

    def __post_init__(self):
        A = check_square(as_matrix(self.A, "A"), "A")
        p = A.shape[0]
        B = as_matrix(self.B, "B")
        if B.shape[0] != p:
            raise DimensionMismatch(f"B must have {p} rows, got shape {B.shape}")
        if self.sigma_x0 is None:
            sigma = _default_initial_covariance(A, B)
        else:
            sigma = as_matrix(self.sigma_x0, "sigma_x0")
            if sigma.shape != (p, p):
                raise DimensionMismatch(f"sigma_x0 must have shape {(p, p)}, got {sigma.shape}")
            sigma = check_symmetric_psd(sigma, "sigma_x0")
        object.__setattr__(self, "A", readonly(A))
        object.__setattr__(self, "B", readonly(B))
        object.__setattr__(self, "sigma_x0", readonly(sigma))

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.B.shape[1]

    @property
    def W(self) -> np.ndarray:
        """Process noise covariance ``B B'``."""
        return self.B @ self.B.T

    def fingerprint(self) -> bytes:
        """8-byte digest of (A, B) used to tie bitstreams to a model."""
        h = hashlib.sha256()
        for arr in (self.A, self.B):
            h.update(np.asarray(arr.shape, dtype="<u4").tobytes())
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.digest()[:8]

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "sigma_x0": self.sigma_x0.tolist()}


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    unstable_log_sum: float
    is_stable: bool
    is_stabilizable: bool
    marginal: bool = False

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "unstable_log_sum": self.unstable_log_sum,
            "is_stable": self.is_stable,
            "is_stabilizable": self.is_stabilizable,
            "marginal": self.marginal,
        }


@dataclass(frozen=True)
class ValidatedModel:
    """A :class:`StateSpaceModel` that passed :func:`validate_model`."""

    model: StateSpaceModel
    spectrum: SpectrumReport

    # convenience passthroughs so solvers can take either type
    @property
    def A(self):
        return self.model.A

    @property
    def B(self):
        return self.model.B

    @property
    def W(self):
        return self.model.W

    @property
    def sigma_x0(self):
        return self.model.sigma_x0

    @property
    def p(self):
        return self.model.p

    @property
    def q(self):
        return self.model.q


@dataclass(frozen=True)
class ArCoefficients:
    """Coefficients of ``x[t+1] = sum_j A_j x[t-j+1] + B w[t]``."""

    A_list: tuple
    B: np.ndarray
    sigma_x0: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if len(self.A_list) < 1:
            raise ConfigError("an AR model needs at least one coefficient matrix")
        mats = [check_square(as_matrix(a, f"A_{j + 1}"), f"A_{j + 1}")
                for j, a in enumerate(self.A_list)]
        p = mats[0].shape[0]
        for j, a in enumerate(mats):
            if a.shape != (p, p):
                raise DimensionMismatch(f"A_{j + 1} has shape {a.shape}, expected {(p, p)}")
        B = as_matrix(self.B, "B")
        if B.shape[0] != p:
            raise DimensionMismatch(f"B must have {p} rows, got shape {B.shape}")
        object.__setattr__(self, "A_list", tuple(readonly(a) for a in mats))
        object.__setattr__(self, "B", readonly(B))

    @property
    def order(self) -> int:
        return len(self.A_list)

    @property
    def p(self) -> int:
        return self.A_list[0].shape[0]


def _default_initial_covariance(A, B):
    if np.max(np.abs(np.linalg.eigvals(A))) < 1 - UNIT_CIRCLE_TOL:
        S = solve_discrete_lyapunov(A, B @ B.T)
        return 0.5 * (S + S.T)
    return np.eye(A.shape[0])


def _rank(M):
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > M.shape[0] * np.finfo(float).eps * s[0]))


def spectrum(m) -> SpectrumReport:
    """Eigenvalues of ``A`` and the unstable log-sum ``sum log2|lambda|`` over ``|lambda| > 1``.

    The unstable log-sum is the minimum rate (bits per sample) any scheme
    needs to keep the reconstruction error bounded.
    """
    m = m.model if isinstance(m, ValidatedModel) else m
    A, B = m.A, m.B
    p = m.p
    eig = np.linalg.eigvals(A)
    mod = np.abs(eig)
    unstable = mod > 1 + UNIT_CIRCLE_TOL
    log_sum = float(np.sum(np.log2(mod[unstable]))) if unstable.any() else 0.0
    marginal = bool(np.any(np.abs(mod - 1) <= UNIT_CIRCLE_TOL))
    stabilizable = True
    for lam in eig[mod >= 1 - UNIT_CIRCLE_TOL]:
        pbh = np.hstack([A - lam * np.eye(p), B]).astype(complex)
        if _rank(pbh) < p:
            stabilizable = False
            break
    return SpectrumReport(
        eigenvalues=eig,
        unstable_log_sum=log_sum,
        is_stable=not unstable.any(),
        is_stabilizable=stabilizable,
        marginal=marginal,
    )


def validate_model(m) -> ValidatedModel:
    """Check a model and attach its :class:`SpectrumReport`.

    Raises
    ------
    NotStabilizable
        If some eigenvalue with ``|lambda| >= 1`` fails the test
        ``rank [A - lambda I, B] = p``. Such a source cannot be tracked with
        bounded error, so downstream solvers refuse it.
    """
    if isinstance(m, ValidatedModel):
        return m
    if not isinstance(m, StateSpaceModel):
        raise TypeError(f"expected a StateSpaceModel, got {type(m).__name__}")
    report = spectrum(m)
    if report.marginal:
        warnings.warn("A has eigenvalues on the unit circle; the source is marginally stable",
                      RuntimeWarning, stacklevel=2)
    if not report.is_stabilizable:
        raise NotStabilizable("the pair (A, B) is not stabilizable")
    return ValidatedModel(model=m, spectrum=report)


def augment_ar(c: ArCoefficients, sigma_x0=None) -> StateSpaceModel:
    """Rewrite an AR(s) source as an ``s*p``-dimensional AR(1) source.

    The augmented state stacks ``(x[t], x[t-1], ..., x[t-s+1])``. The
    transition is the block companion matrix with ``A_1 .. A_s`` on the first
    block row and identities on the sub-diagonal; the noise gain carries ``B``
    in its top-left block and zeros elsewhere (shape ``sp x sq``).
    """
    s, p = c.order, c.p
    q = c.B.shape[1]
    if s == 1:
        return StateSpaceModel(c.A_list[0], c.B, sigma_x0 if sigma_x0 is not None else c.sigma_x0)
    A = np.zeros((s * p, s * p))
    A[:p, :] = np.hstack(c.A_list)
    A[p:, :-p] = np.eye((s - 1) * p)
    B = np.zeros((s * p, s * q))
    B[:p, :q] = c.B
    sigma = sigma_x0 if sigma_x0 is not None else c.sigma_x0
    return StateSpaceModel(A, B, sigma)


def simulate_source(m, n: int, seed=None, *, x0=None, noise=None) -> np.ndarray:
    """Draw ``x[0..n]`` (``n + 1`` states) from the source.

    ``x[0] ~ N(0, sigma_x0)`` and ``w[t]`` are standard normals from numpy's
    PCG64 generator (ziggurat transform), so a fixed ``seed`` reproduces the
    trajectory bit for bit. ``x0`` and ``noise`` (shape ``(n, q)``) override
    the random draws.

    Returns
    -------
    ndarray of shape (n + 1, p)
    """
    m = m.model if isinstance(m, ValidatedModel) else m
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    p, q = m.p, m.q
    if x0 is None:
        w, V = np.linalg.eigh(m.sigma_x0)
        factor = V * np.sqrt(np.clip(w, 0, None))
        x0 = factor @ rng.standard_normal(p)
    x0 = np.asarray(x0, dtype=float).reshape(p)
    if noise is None:
        noise = rng.standard_normal((n, q))
    noise = np.asarray(noise, dtype=float).reshape(n, q)
    drive = noise @ m.B.T
    A = m.A
    X = np.empty((n + 1, p))
    X[0] = x0
    for t in range(n):
        X[t + 1] = A @ X[t] + drive[t]
    return X


# -- file formats ---------------------------------------------------------

def model_from_dict(cfg: dict):
    """Build a :class:`StateSpaceModel` or :class:`ArCoefficients` from a config dict."""
    try:
        if "A_list" in cfg or "ar_order" in cfg:
            A_list = cfg["A_list"]
            order = cfg.get("ar_order", len(A_list))
            if order != len(A_list):
                raise ConfigError(f"ar_order={order} but {len(A_list)} matrices in A_list")
            return ArCoefficients(tuple(A_list), cfg["B"], cfg.get("sigma_x0"))
        return StateSpaceModel(cfg["A"], cfg["B"], cfg.get("sigma_x0"))
    except KeyError as exc:
        raise ConfigError(f"model config is missing field {exc}") from None
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return model_from_dict(cfg.get("model", cfg))


def save_model(m: StateSpaceModel, path):
    Path(path).write_text(json.dumps(m.to_dict(), indent=2) + "\n", encoding="utf-8")


def write_trajectory_csv(X, path):
    X = np.asarray(X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x_{i + 1}" for i in range(X.shape[1])])
        for t, row in enumerate(X):
            writer.writerow([t] + [f"{v:.9g}" for v in row])
