"""Zero-delay encoder and decoder built on dithered quantization.

At each step the encoder forms the innovation ``k = x - A y_prev``, scales it
with the realization's precoder, quantizes every active component with
subtractive dither, entropy codes the indices given the dither and updates
its copy of the reconstruction exactly as the decoder will. Both ends derive
the dither from the shared seed, so a step's bits are decodable from
``(y_prev, t, bits)`` alone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bitstream
from .ecdq import DitherStream, QuantizerConfig, step_sizes
from .entropy import CoderLayout, decode_block, encode_block, make_layout
from .exceptions import BitstreamCorrupt, DimensionMismatch
from .model import StateSpaceModel, ValidatedModel, validate_model
from .nrdf import NrdfSolution, bounds, solve_nrdf
from .realization import RealizationParams, derive_channel

RATE_SLACK = 0.05
MSE_SLACK = 0.05


def dither_key(seed):
    """64-bit dither key derived from the shared seed."""
    return int(np.random.SeedSequence(seed).spawn(2)[1].generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CodecDesign:
    """Everything both ends must agree on."""

    A: np.ndarray
    params: RealizationParams
    quant: QuantizerConfig
    layout: CoderLayout
    active: np.ndarray       # indices of coded components
    seed: int

    @classmethod
    def build(cls, m, sol: NrdfSolution, seed, sigma_v=None):
        params = derive_channel(sol, sigma_v)
        quant = step_sizes(params.v)
        active = np.flatnonzero(params.active)
        sigma = np.sqrt(params.alpha_var[active])
        layout = make_layout(sigma, quant.steps[active])
        mm = getattr(m, "model", m)
        return cls(A=np.array(mm.A), params=params, quant=quant, layout=layout,
                   active=active, seed=int(seed))

    @property
    def p(self):
        return self.A.shape[0]

    @property
    def pre(self):
        return self.params.precoder[self.active]

    @property
    def post_cols(self):
        return [self.params.postcoder[:, i].copy() for i in self.active]

    @property
    def steps(self):
        return self.quant.steps[self.active]

    def dither(self):
        return DitherStream(dither_key(self.seed), self.quant.steps)

    def dither_block(self, t0, n):
        return self.dither().block(t0, n)[:, self.active]


def _correction(cols, beta):
    """``E^-1 Theta beta`` as a fixed sequence of elementwise operations.

    The sequential loops evaluate the same products and sums on Python
    floats, so encoder and decoder corrections agree bitwise.
    """
    beta = np.asarray(beta)
    acc = cols[0][None, :] * beta[:, 0:1]
    for c in range(1, len(cols)):
        acc = acc + cols[c][None, :] * beta[:, c:c + 1]
    return acc


def _matvec(rows, v):
    out = []
    for row in rows:
        acc = row[0] * v[0]
        for j in range(1, len(v)):
            acc += row[j] * v[j]
        out.append(acc)
    return out


def _round(u):
    q = math.floor(abs(u) + 0.5)
    return q if u >= 0 else -q


class _Kernel:
    """Per-step arithmetic on Python floats (small vectors make numpy slower)."""

    def __init__(self, design):
        self.A = design.A.tolist()
        self.pre = design.pre.tolist()
        self.steps = design.steps.tolist()
        self.colsT = [c.tolist() for c in design.post_cols]
        self.p = design.p
        self.a = design.active.size

    def quantize(self, k, r):
        """Indices and correction ``k_tilde`` for innovation ``k`` and dither row ``r``."""
        idx, kt = [], [0.0] * self.p
        first = True
        for c in range(self.a):
            u = (_matvec((self.pre[c],), k)[0] + r[c]) / self.steps[c]
            q = _round(u)
            idx.append(q)
            beta = q * self.steps[c] - r[c]
            col = self.colsT[c]
            if first:
                kt = [col[i] * beta for i in range(self.p)]
                first = False
            else:
                kt = [kt[i] + col[i] * beta for i in range(self.p)]
        return idx, kt

    def correction(self, idx, r):
        kt = [0.0] * self.p
        for c in range(self.a):
            beta = idx[c] * self.steps[c] - r[c]
            col = self.colsT[c]
            kt = ([col[i] * beta for i in range(self.p)] if c == 0
                  else [kt[i] + col[i] * beta for i in range(self.p)])
        return kt

    def predict(self, y):
        return _matvec(self.A, y)


class CodecState:
    """Sequential encoder or decoder state (``side`` is ``"encoder"`` or ``"decoder"``).

    ``y_prev`` is the shared reconstruction memory and ``t`` the step index.
    """

    def __init__(self, design: CodecDesign, side="encoder", y_prev=None, t=0):
        if side not in ("encoder", "decoder"):
            raise ValueError("side must be 'encoder' or 'decoder'")
        self.design = design
        self.side = side
        self.y_prev = np.zeros(design.p) if y_prev is None else np.array(y_prev, dtype=float)
        self.t = int(t)
        self._kernel = _Kernel(design)
        self._dither = design.dither()

    def _advance(self, kt, x_pred):
        y = np.array([kt[i] + x_pred[i] for i in range(self.design.p)])
        self.y_prev = y
        self.t += 1
        return y


def encode_step(state: CodecState, x_t):
    """Code one source sample; returns ``(payload, nbits, y_t)``."""
    if state.side != "encoder":
        raise ValueError("encode_step needs an encoder state")
    d = state.design
    ker = state._kernel
    x_t = np.asarray(x_t, dtype=float).reshape(d.p).tolist()
    x_pred = ker.predict(state.y_prev.tolist())
    k = [x_t[i] - x_pred[i] for i in range(d.p)]
    r = state._dither.at(state.t)[d.active]
    idx, kt = ker.quantize(k, r.tolist())
    if d.active.size == 0:
        return 0, 0, state._advance(kt, x_pred)
    payloads, nbits, _ = encode_block(d.layout, np.array([idx], dtype=np.int64), r[None, :])
    return payloads[0], int(nbits[0]), state._advance(kt, x_pred)


def decode_step(state: CodecState, payload, nbits):
    """Decode one step's bits; returns ``y_t``."""
    if state.side != "decoder":
        raise ValueError("decode_step needs a decoder state")
    d = state.design
    ker = state._kernel
    x_pred = ker.predict(state.y_prev.tolist())
    if d.active.size == 0:
        if nbits:
            raise BitstreamCorrupt("zero-rate steps must be empty")
        return state._advance([0.0] * d.p, x_pred)
    r = state._dither.at(state.t)[d.active]
    idx = decode_block(d.layout, [payload], [nbits], r[None, :])[0]
    return state._advance(ker.correction(idx.tolist(), r.tolist()), x_pred)


# -- batch operation -----------------------------------------------------------

@dataclass
class EncodedRun:
    payloads: list
    nbits: np.ndarray
    ideal_bits: np.ndarray
    indices: np.ndarray
    k_tilde: np.ndarray
    err: np.ndarray
    y: np.ndarray | None = None


def _finish(design, idx, kt, dither, err, y=None):
    idx = np.array(idx, dtype=np.int64).reshape(len(kt), design.active.size)
    payloads, nbits, ideal = encode_block(design.layout, idx, dither)
    return EncodedRun(payloads=payloads, nbits=nbits, ideal_bits=ideal, indices=idx,
                      k_tilde=np.array(kt).reshape(len(kt), design.p), err=err, y=y)


def encode_trajectory(design: CodecDesign, X) -> EncodedRun:
    """Encode a trajectory ``X`` of shape ``(n, p)`` starting from ``y = 0``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != design.p:
        raise DimensionMismatch(f"trajectory must have shape (n, {design.p})")
    n, p = X.shape
    ker = _Kernel(design)
    dither = design.dither_block(0, n)
    dl = dither.tolist()
    xs = X.tolist()
    y = [0.0] * p
    idx_all, kt_all, ys = [], [], []
    for t in range(n):
        pred = ker.predict(y)
        k = [xs[t][i] - pred[i] for i in range(p)]
        idx, kt = ker.quantize(k, dl[t])
        y = [kt[i] + pred[i] for i in range(p)]
        idx_all.append(idx)
        kt_all.append(kt)
        ys.append(y)
    Y = np.array(ys)
    return _finish(design, idx_all, kt_all, dither, X - Y, Y)


def encode_error_frame(design: CodecDesign, m, n, rng) -> EncodedRun:
    """Run encoder and source jointly through the error ``e = x - y``.

    The innovation obeys ``k[t+1] = A e[t] + B w[t]`` with ``e = k - k_tilde``,
    which is the same closed loop as coding ``x`` directly but stays finite for
    unstable sources. ``x[0] ~ N(0, sigma_x0)`` and the decoder starts at 0.
    """
    mm = getattr(m, "model", m)
    B = np.asarray(mm.B)
    p = design.p
    w_, V_ = np.linalg.eigh(mm.sigma_x0)
    k = ((V_ * np.sqrt(np.clip(w_, 0, None))) @ rng.standard_normal(p)).tolist()
    drive = (rng.standard_normal((n, B.shape[1])) @ B.T).tolist()
    ker = _Kernel(design)
    dither = design.dither_block(0, n)
    dl = dither.tolist()
    idx_all, kt_all, errs = [], [], []
    for t in range(n):
        idx, kt = ker.quantize(k, dl[t])
        e = [k[i] - kt[i] for i in range(p)]
        idx_all.append(idx)
        kt_all.append(kt)
        errs.append(e)
        ae = ker.predict(e)
        dr = drive[t]
        k = [ae[i] + dr[i] for i in range(p)]
    return _finish(design, idx_all, kt_all, dither, np.array(errs))


def decode_stream(design: CodecDesign, payloads, nbits, *, reconstruct=True):
    """Decode many steps. Returns ``(k_tilde, y)``; ``y`` is ``None`` unless ``reconstruct``."""
    n = len(payloads)
    dither = design.dither_block(0, n)
    idx = decode_block(design.layout, payloads, nbits, dither)
    if design.active.size:
        kt = _correction(design.post_cols, idx * design.steps - dither)
    else:
        kt = np.zeros((n, design.p))
    if not reconstruct:
        return kt, None
    ker = _Kernel(design)
    p = design.p
    y = [0.0] * p
    ys = []
    for row in kt.tolist():
        pred = ker.predict(y)
        y = [row[i] + pred[i] for i in range(p)]
        ys.append(y)
    return kt, np.array(ys).reshape(n, p)


# -- reports -------------------------------------------------------------------

@dataclass
class SimulationReport:
    n: int
    D: float
    seed: int
    p: int
    empirical_rate: float
    empirical_mse: float
    nrdf_rate: float
    upper_scalar: float
    ideal_rate: float
    escapes: int
    per_step_lengths: np.ndarray = field(repr=False)
    decoder_match: bool | None = None
    solution: dict = field(default_factory=dict, repr=False)
    violations: list = field(default_factory=list)

    @property
    def total_bits(self):
        return int(np.sum(self.per_step_lengths))

    @property
    def ok(self):
        return not self.violations

    def to_dict(self, *, lengths=True):
        d = asdict(self)
        d["per_step_lengths"] = (np.asarray(self.per_step_lengths).tolist() if lengths else None)
        d["total_bits"] = self.total_bits
        d["ok"] = self.ok
        return d

    def to_json(self, *, lengths=True):
        return json.dumps(self.to_dict(lengths=lengths), indent=2, default=json_default)

    CSV_FIELDS = ("D", "n", "seed", "empirical_rate", "empirical_mse", "nrdf_rate",
                  "upper_scalar", "ideal_rate", "escapes", "ok")

    def csv_row(self):
        vals = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            vals.append(f"{v:.9g}" if isinstance(v, float) else str(v))
        return vals


def json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(type(o).__name__)


def write_reports_csv(reports, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SimulationReport.CSV_FIELDS)
        for rep in reports:
            w.writerow(rep.csv_row())


def check_report(rep: SimulationReport, lower=None, upper=None):
    """Fill ``rep.violations`` with failed rate-sandwich or distortion checks."""
    lower = rep.nrdf_rate if lower is None else lower
    upper = rep.upper_scalar if upper is None else upper
    v = []
    if not (math.isfinite(rep.empirical_rate) and math.isfinite(rep.empirical_mse)):
        v.append("non-finite rate or distortion")
    if rep.empirical_rate < lower - RATE_SLACK:
        v.append(f"rate {rep.empirical_rate:.9g} below lower bound {lower:.9g} - {RATE_SLACK}")
    if rep.empirical_rate > upper + RATE_SLACK:
        v.append(f"rate {rep.empirical_rate:.9g} above upper bound {upper:.9g} + {RATE_SLACK}")
    if rep.empirical_mse > (1 + MSE_SLACK) * rep.D:
        v.append(f"mse {rep.empirical_mse:.9g} exceeds {(1 + MSE_SLACK):.2f} D")
    if rep.decoder_match is False:
        v.append("decoder reconstruction differs from encoder")
    rep.violations = v
    return rep


def simulate_coded(m, D, n, seed, *, sol=None, sigma_v=None, verify=True, method="barrier",
                   **solver_opts):
    """Like :func:`run_pipeline` but also returns the design and the coded run."""
    if n < 1000:
        raise ValueError("run_pipeline needs n >= 1000")
    vm = m if isinstance(m, ValidatedModel) else validate_model(m)
    if sol is None:
        sol = solve_nrdf(vm, D, method=method, **solver_opts)
    design = CodecDesign.build(vm, sol, seed, sigma_v)
    src_seed = np.random.SeedSequence(seed).spawn(2)[0]
    run = encode_error_frame(design, vm, n, np.random.default_rng(src_seed))
    match = None
    if verify:
        kt, _ = decode_stream(design, run.payloads, run.nbits, reconstruct=False)
        match = bool(np.array_equal(kt, run.k_tilde))
    lengths = np.asarray(run.nbits, dtype=np.int64)
    escapes = 0
    if design.active.size:
        escapes = int(np.sum(np.abs(run.indices) > design.layout.K[None, :]))
    rep = SimulationReport(
        n=int(n), D=float(D), seed=int(seed), p=design.p,
        empirical_rate=float(lengths.sum() / n),
        empirical_mse=float(np.mean(np.sum(run.err**2, axis=1))),
        nrdf_rate=sol.rate, upper_scalar=bounds(sol).upper_scalar,
        ideal_rate=float(run.ideal_bits.sum() / n), escapes=escapes,
        per_step_lengths=lengths, decoder_match=match, solution=sol.summary(),
    )
    return check_report(rep), design, run


def run_pipeline(m, D, n, seed, *, sol=None, sigma_v=None, verify=True, method="barrier",
                 **solver_opts) -> SimulationReport:
    """Solve, design and run the coded loop for ``n`` steps.

    The source is simulated inside the loop (error frame, see
    :func:`encode_error_frame`) so unstable models can run for any horizon.
    With ``verify`` the stream is decoded and the decoder's corrections are
    compared bitwise with the encoder's. ``empirical_rate`` counts payload
    bits only (container framing excluded).
    """
    return simulate_coded(m, D, n, seed, sol=sol, sigma_v=sigma_v, verify=verify, method=method,
                          **solver_opts)[0]


def write_stream(path, design: CodecDesign, m: StateSpaceModel, D, payloads, nbits):
    header = bitstream.StreamHeader(p=design.p, seed=design.seed, D=float(D),
                                    fingerprint=getattr(m, "model", m).fingerprint(),
                                    n=len(payloads))
    with open(path, "wb") as fh:
        fh.write(bitstream.dumps(header, payloads, nbits))


def read_stream(path, m: StateSpaceModel):
    with open(path, "rb") as fh:
        header, payloads, nbits = bitstream.loads(fh.read())
    if header.fingerprint != getattr(m, "model", m).fingerprint():
        raise BitstreamCorrupt("stream was produced for a different model")
    return header, payloads, nbits
