"""Dither-conditioned Shannon coding of quantizer indices.

Each active component ``i`` has a Gaussian model ``alpha_i ~ N(0, sigma_i^2)``
so, given its dither ``r``, index ``j`` has probability
``P(j | r) = F((j + 1/2) step - r) - F((j - 1/2) step - r)`` on the support
``|j| <= K_i`` (``K_i = ceil(8 sigma_i / step_i) + 1``) plus one escape
symbol. Probabilities are turned into integer frequencies out of ``2**20``
(escape gets exactly 1) so encoder and decoder agree bit for bit.

Components are coded jointly in small groups. A group's joint frequency is
the product of its members' frequencies, and the codeword length of a joint
symbol with frequency ``f`` is ``ceil(-log2(f / 2**(20 g)))``; codewords are
assigned canonically (shorter first, ties by symbol number), which makes the
code prefix-free with expected length below the joint entropy plus one bit.
An escaped component is followed by a sign bit and the order-0 Exp-Golomb
code of its overflow ``|j| - K_i - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import BitstreamCorrupt, ConfigError, IndexOutOfSupport, NonPositiveSigma

PRECISION = 20
TOTAL = 1 << PRECISION
SUPPORT_SIGMAS = 8.0
MAX_GROUP = 3
MAX_JOINT = 1 << 12
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class ConditionalPmf:
    """Integer-frequency model of one component's index given its dither."""

    i_min: int
    i_max: int
    freqs: np.ndarray      # length i_max - i_min + 2, escape last

    @property
    def probabilities(self):
        return self.freqs[:-1] / TOTAL

    @property
    def p_escape(self):
        return self.freqs[-1] / TOTAL

    @property
    def support(self):
        return np.arange(self.i_min, self.i_max + 1)

    def prob(self, j):
        if not self.i_min <= j <= self.i_max:
            raise IndexOutOfSupport(f"index {j} outside [{self.i_min}, {self.i_max}]")
        return float(self.freqs[j - self.i_min]) / TOTAL


def support_radius(sigma, step):
    return int(math.ceil(SUPPORT_SIGMAS * sigma / step)) + 1


def gaussian_cell_probs(r, sigma, step, K):
    """``P(j | r)`` for ``j = -K .. K``; ``r`` has shape ``(n,)``, result ``(n, 2K + 1)``."""
    j = np.arange(-K, K + 1, dtype=float)
    centre = j[None, :] * step - np.asarray(r, float)[:, None]
    hi = (centre + 0.5 * step) / sigma
    lo = (centre - 0.5 * step) / sigma
    # evaluate on the side of the mean where the CDF difference is well conditioned
    return np.where(centre > 0, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


def cell_freqs(r, sigma, step, K):
    """Integer frequencies, shape ``(n, 2K + 2)``, every row summing to ``2**20``."""
    P = gaussian_cell_probs(r, sigma, step, K)
    N = P.shape[1]
    f = np.empty((P.shape[0], N + 1), dtype=np.int64)
    f[:, :N] = np.floor(P * (TOTAL - 1 - N)).astype(np.int64) + 1
    f[:, N] = 1
    rest = TOTAL - f.sum(axis=1)
    f[np.arange(P.shape[0]), np.argmax(P, axis=1)] += rest
    return f


def conditional_pmf(r, sigma, step, K=None) -> ConditionalPmf:
    if not np.isfinite(sigma) or sigma <= 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma!r}")
    if K is None:
        K = support_radius(sigma, step)
    f = cell_freqs(np.array([float(r)]), float(sigma), float(step), K)[0]
    return ConditionalPmf(i_min=-K, i_max=K, freqs=f)


def exp_golomb_length(u):
    return 2 * (int(u) + 1).bit_length() - 1


def shannon_length_check(pmf: ConditionalPmf, index, *, allow_escape=False):
    """Ideal code length ``-log2 P(index)`` in bits.

    With ``allow_escape`` an out-of-support index is charged the escape
    symbol plus its sign bit and Exp-Golomb overflow code.
    """
    if pmf.i_min <= index <= pmf.i_max:
        return -math.log2(pmf.prob(index))
    if not allow_escape:
        raise IndexOutOfSupport(f"index {index} outside [{pmf.i_min}, {pmf.i_max}]")
    over = abs(index) - pmf.i_max - 1
    return -math.log2(pmf.p_escape) + 1 + exp_golomb_length(over)


def _bitlen(f):
    """Exact ``floor(log2 f) + 1`` for positive int64 arrays."""
    e = np.frexp(f.astype(np.float64))[1].astype(np.int64)
    # float conversion may round 2**k - 1 up to 2**k
    too_big = np.right_shift(f, e - 1) == 0
    return e - too_big


@dataclass(frozen=True)
class CoderLayout:
    """Which components are coded and how they are grouped."""

    sigma: np.ndarray
    steps: np.ndarray
    K: np.ndarray
    groups: tuple

    @property
    def n_active(self):
        return self.sigma.size

    def alphabet(self, i):
        return 2 * int(self.K[i]) + 2


def make_layout(sigma, steps) -> CoderLayout:
    sigma = np.asarray(sigma, float)
    steps = np.asarray(steps, float)
    if np.any(~np.isfinite(sigma)) or np.any(sigma <= 0):
        raise NonPositiveSigma("coded components need positive sigma")
    K = np.array([support_radius(s, d) for s, d in zip(sigma, steps)], dtype=np.int64)
    if np.any(2 * K + 2 > MAX_JOINT):
        raise ConfigError("quantizer resolution too fine for the entropy coder "
                          "(more than 4096 cells per component)")
    groups, cur, size = [], [], 1
    for i, k in enumerate(K):
        a = 2 * int(k) + 2
        if cur and (len(cur) == MAX_GROUP or size * a > MAX_JOINT):
            groups.append(tuple(cur))
            cur, size = [], 1
        cur.append(i)
        size *= a
    if cur:
        groups.append(tuple(cur))
    return CoderLayout(sigma=sigma, steps=steps, K=K, groups=tuple(groups))


class _GroupTables:
    """Canonical code of one group for a block of steps.

    Symbols are ordered by (length, symbol number). The code interval of a
    symbol of length ``l`` starts at ``C[l] + rank * 2**(lmax - l)``, where
    ``C[l]`` is the Kraft mass of all shorter symbols and ``rank`` counts
    lower-numbered symbols of the same length.
    """

    def __init__(self, layout, members, r):
        self.members = members
        self.lmax = PRECISION * len(members)
        n = r.shape[0]
        joint = np.ones((n, 1), dtype=np.int64)
        for i in members:
            f = cell_freqs(r[:, i], layout.sigma[i], layout.steps[i], int(layout.K[i]))
            joint = (joint[:, :, None] * f[:, None, :]).reshape(n, -1)
        self.freq = joint
        self.length = self.lmax - _bitlen(joint) + 1
        nb = self.lmax + 2
        flat = (np.arange(n, dtype=np.int64)[:, None] * nb + self.length).ravel()
        self.count = np.bincount(flat, minlength=n * nb).reshape(n, nb)
        width = np.left_shift(np.int64(1), np.maximum(self.lmax - np.arange(nb), 0))
        mass = self.count * width
        self.first = np.cumsum(mass, axis=1) - mass      # C[l]
        self.total = self.first[:, -1] + mass[:, -1]

    def encode(self, sym):
        rows = np.arange(sym.size)
        length = self.length[rows, sym]
        same = self.length == length[:, None]
        rank = (same & (np.arange(self.length.shape[1])[None, :] < sym[:, None])).sum(axis=1)
        start = self.first[rows, length] + np.left_shift(rank, self.lmax - length)
        return np.right_shift(start, self.lmax - length), length

    def decode(self, window):
        """Symbols whose code interval contains the ``lmax``-bit ``window``."""
        if np.any(window >= self.total):
            raise BitstreamCorrupt("bit pattern outside the code space")
        rows = np.arange(window.size)
        # largest length whose first code is <= window among lengths that occur
        occupied = self.count > 0
        ok = occupied & (self.first <= window[:, None])
        length = self.first.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1)
        rank = np.right_shift(window - self.first[rows, length], self.lmax - length)
        hits = np.cumsum(self.length == length[:, None], axis=1)
        sym = np.argmax(hits > rank[:, None], axis=1)
        return sym, length

    def ideal_bits(self, sym):
        f = self.freq[np.arange(sym.size), sym].astype(np.float64)
        return self.lmax - np.log2(f)


def _chunks(n, per_row):
    size = max(1, _CHUNK_ELEMS // max(per_row, 1))
    for a in range(0, n, size):
        yield a, min(n, a + size)


def _symbols(layout, members, idx):
    """Joint symbol numbers and escape flags for index rows ``idx[:, members]``."""
    sym = np.zeros(idx.shape[0], dtype=np.int64)
    esc = np.zeros((idx.shape[0], len(members)), dtype=bool)
    for c, i in enumerate(members):
        K = int(layout.K[i])
        j = idx[:, i]
        out = np.abs(j) > K
        esc[:, c] = out
        sub = np.where(out, 2 * K + 1, j + K)
        sym = sym * (2 * K + 2) + sub
    return sym, esc


def _put_escape(value, nbits, j, K):
    over = abs(int(j)) - K - 1
    value = (value << 1) | (1 if j < 0 else 0)
    x = over + 1
    nb = x.bit_length()
    value = (value << (2 * nb - 1)) | x
    return value, nbits + 1 + 2 * nb - 1


def encode_block(layout: CoderLayout, idx, r):
    """Code quantizer indices of consecutive steps.

    ``idx`` and ``r`` have shape ``(n, n_active)``. Returns
    ``(payloads, nbits, ideal)``: one Python int and one bit count per step
    (MSB first), plus the ideal length ``-log2 P`` of each step under the
    integer model.
    """
    idx = np.asarray(idx, dtype=np.int64)
    n = idx.shape[0]
    if layout.n_active == 0:
        return [0] * n, np.zeros(n, dtype=np.int64), np.zeros(n)
    codes, lens, escs = [], [], []
    ideal = np.zeros(n)
    for members in layout.groups:
        sym, esc = _symbols(layout, members, idx)
        code = np.empty(n, dtype=np.int64)
        ln = np.empty(n, dtype=np.int64)
        width = int(np.prod([layout.alphabet(i) for i in members]))
        for a, b in _chunks(n, width * 6):
            tab = _GroupTables(layout, members, r[a:b])
            code[a:b], ln[a:b] = tab.encode(sym[a:b])
            ideal[a:b] += tab.ideal_bits(sym[a:b])
        codes.append(code.tolist())
        lens.append(ln.tolist())
        escs.append(esc)
    any_esc = np.zeros(n, dtype=bool)
    for e in escs:
        any_esc |= e.any(axis=1)
    payloads = [0] * n
    nbits = np.zeros(n, dtype=np.int64)
    for t in range(n):
        value, nb = 0, 0
        for g, members in enumerate(layout.groups):
            l = lens[g][t]
            value = (value << l) | codes[g][t]
            nb += l
            if any_esc[t]:
                for c, i in enumerate(members):
                    if escs[g][t, c]:
                        value, nb = _put_escape(value, nb, idx[t, i], int(layout.K[i]))
        payloads[t] = value
        nbits[t] = nb
    if any_esc.any():
        for t in np.flatnonzero(any_esc):
            for g, members in enumerate(layout.groups):
                for c, i in enumerate(members):
                    if escs[g][t, c]:
                        ideal[t] += 1 + exp_golomb_length(abs(int(idx[t, i])) - int(layout.K[i]) - 1)
    return payloads, nbits, ideal


def _read_bits(value, nbits, offset, count):
    """``count`` bits of ``value`` starting ``offset`` bits from the MSB, zero padded."""
    rem = nbits - offset
    if rem >= count:
        return (value >> (rem - count)) & ((1 << count) - 1)
    return (value & ((1 << rem) - 1)) << (count - rem) if rem > 0 else 0


def _get_escape(value, nbits, offset, K):
    if offset >= nbits:
        raise BitstreamCorrupt("escape sign bit missing")
    neg = _read_bits(value, nbits, offset, 1)
    offset += 1
    zeros = 0
    while True:
        if offset >= nbits:
            raise BitstreamCorrupt("truncated Exp-Golomb code")
        if _read_bits(value, nbits, offset, 1):
            break
        zeros += 1
        offset += 1
    if offset + zeros + 1 > nbits:
        raise BitstreamCorrupt("truncated Exp-Golomb code")
    x = _read_bits(value, nbits, offset, zeros + 1)
    offset += zeros + 1
    mag = x - 1 + K + 1
    return (-mag if neg else mag), offset


def decode_block(layout: CoderLayout, payloads, nbits, r):
    """Inverse of :func:`encode_block`; returns indices of shape ``(n, n_active)``."""
    n = len(payloads)
    nbits = [int(b) for b in nbits]
    idx = np.zeros((n, layout.n_active), dtype=np.int64)
    if layout.n_active == 0:
        if any(nbits):
            raise BitstreamCorrupt("zero-rate steps must be empty")
        return idx
    offset = [0] * n
    for members in layout.groups:
        lmax = PRECISION * len(members)
        dims = [layout.alphabet(i) for i in members]
        width = int(np.prod(dims))
        sym = np.empty(n, dtype=np.int64)
        ln = np.empty(n, dtype=np.int64)
        for a, b in _chunks(n, width * 6):
            window = np.array([_read_bits(payloads[t], nbits[t], offset[t], lmax)
                               for t in range(a, b)], dtype=np.int64)
            tab = _GroupTables(layout, members, r[a:b])
            sym[a:b], ln[a:b] = tab.decode(window)
        subs = np.unravel_index(sym, dims)
        for c, i in enumerate(members):
            idx[:, i] = subs[c] - int(layout.K[i])
        esc_rows = np.zeros(n, dtype=bool)
        for c, i in enumerate(members):
            esc_rows |= subs[c] == dims[c] - 1
        ln_list = ln.tolist()
        for t in range(n):
            offset[t] += ln_list[t]
            if offset[t] > nbits[t]:
                raise BitstreamCorrupt(f"step {t}: codeword runs past the end of its chunk")
        for t in np.flatnonzero(esc_rows):
            for c, i in enumerate(members):
                if subs[c][t] == dims[c] - 1:
                    idx[t, i], offset[t] = _get_escape(payloads[t], nbits[t], offset[t],
                                                       int(layout.K[i]))
    for t in range(n):
        if offset[t] != nbits[t]:
            raise BitstreamCorrupt(f"step {t}: {nbits[t] - offset[t]} unread bits")
    return idx
