"""scikit-learn style front ends."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import bitstream
from ._validation import check_trajectory
from .codec import CodecDesign, decode_stream, encode_trajectory, run_pipeline
from .exceptions import BitstreamCorrupt
from .model import StateSpaceModel, validate_model
from .nrdf import bounds, rate_distortion_sweep, solve_nrdf


class NrdfSolver(BaseEstimator):
    """Steady-state NRDF of the source ``x[t+1] = A x[t] + B w[t]`` at distortion ``D``.

    ``fit`` takes no data (``X`` is accepted and ignored so the estimator
    composes with scikit-learn tooling). Fitted attributes: ``model_``,
    ``spectrum_``, ``solution_``, ``rate_``, ``bounds_``.

    Examples
    --------
    >>> NrdfSolver(A=[[1.2]], B=[[1.0]], D=0.5).fit().rate_  # doctest: +ELLIPSIS
    0.89...
    """

    def __init__(self, A=None, B=None, D=1.0, *, method="barrier", tol=1e-10, max_iter=10_000,
                 damping=0.5, g_p=None):
        self.A = A
        self.B = B
        self.D = D
        self.method = method
        self.tol = tol
        self.max_iter = max_iter
        self.damping = damping
        self.g_p = g_p

    def _model(self):
        if self.A is None or self.B is None:
            raise ValueError("A and B must be set before fitting")
        return validate_model(StateSpaceModel(self.A, self.B))

    def _solver_opts(self):
        return dict(method=self.method, tol=self.tol, max_iter=self.max_iter,
                    damping=self.damping)

    def fit(self, X=None, y=None):
        vm = self._model()
        self.model_ = vm.model
        self.spectrum_ = vm.spectrum
        self.solution_ = solve_nrdf(vm, self.D, **self._solver_opts())
        self.rate_ = self.solution_.rate
        self.bounds_ = bounds(self.solution_, self.g_p)
        self.n_features_in_ = vm.p
        return self

    def rate_distortion(self, D_grid):
        """Rates (bits/sample) on an increasing distortion grid."""
        res = rate_distortion_sweep(self._model(), D_grid, **self._solver_opts())
        return np.array([sol.rate for _, sol in res])


class ZeroDelayCodec(TransformerMixin, BaseEstimator):
    """Zero-delay coder for the source ``(A, B)`` designed at distortion ``D``.

    ``transform(X)`` encodes a trajectory of shape ``(n, p)`` and returns the
    decoder's reconstructions; ``encode``/``decode`` expose the bits and
    ``to_bytes``/``from_bytes`` the container format. ``score`` is the
    negative mean squared error per step.
    """

    def __init__(self, A=None, B=None, D=1.0, *, seed=0, sigma_v=None, method="barrier"):
        self.A = A
        self.B = B
        self.D = D
        self.seed = seed
        self.sigma_v = sigma_v
        self.method = method

    def fit(self, X=None, y=None):
        if self.A is None or self.B is None:
            raise ValueError("A and B must be set before fitting")
        vm = validate_model(StateSpaceModel(self.A, self.B))
        if X is not None:
            check_trajectory(X, vm.p)
        self.model_ = vm.model
        self.solution_ = solve_nrdf(vm, self.D, method=self.method)
        self.design_ = CodecDesign.build(vm, self.solution_, self.seed, self.sigma_v)
        self.channel_ = self.design_.params
        self.quantizer_ = self.design_.quant
        self.rate_ = self.solution_.rate
        self.bounds_ = bounds(self.solution_)
        self.n_features_in_ = vm.p
        return self

    def encode(self, X):
        """Bits for each step: ``(payloads, nbits)``."""
        check_is_fitted(self, "design_")
        X = check_trajectory(X, self.n_features_in_)
        run = encode_trajectory(self.design_, X)
        return run.payloads, run.nbits

    def decode(self, payloads, nbits):
        check_is_fitted(self, "design_")
        return decode_stream(self.design_, payloads, nbits)[1]

    def transform(self, X):
        payloads, nbits = self.encode(X)
        return self.decode(payloads, nbits)

    def score(self, X, y=None):
        X = check_trajectory(X, getattr(self, "n_features_in_", X.shape[-1]))
        Y = self.transform(X)
        return -float(np.mean(np.sum((X - Y) ** 2, axis=1)))

    def to_bytes(self, X) -> bytes:
        payloads, nbits = self.encode(X)
        header = bitstream.StreamHeader(p=self.n_features_in_, seed=int(self.seed),
                                        D=float(self.D), fingerprint=self.model_.fingerprint(),
                                        n=len(payloads))
        return bitstream.dumps(header, payloads, nbits)

    def from_bytes(self, data: bytes):
        check_is_fitted(self, "design_")
        header, payloads, nbits = bitstream.loads(data)
        foreign = header.fingerprint != self.model_.fingerprint()
        if foreign or header.seed != int(self.seed) & (2**64 - 1):
            raise BitstreamCorrupt("stream does not belong to this codec (model or seed differ)")
        return self.decode(payloads, nbits)

    def simulate(self, n, seed=None):
        """Closed-loop Monte-Carlo run; returns a :class:`SimulationReport`."""
        check_is_fitted(self, "design_")
        seed = self.seed if seed is None else seed
        return run_pipeline(self.model_, self.D, n, seed, sol=self.solution_, sigma_v=self.sigma_v)
