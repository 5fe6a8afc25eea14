import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zerodelay import (CodecDesign, CodecState, StateSpaceModel, decode_step, decode_stream,
                       encode_step, encode_trajectory, run_pipeline, simulate_source, solve_nrdf,
                       validate_model)
from zerodelay import bitstream
from zerodelay.codec import (check_report, read_stream, simulate_coded, write_reports_csv,
                             write_stream)
from zerodelay.exceptions import BitstreamCorrupt, DimensionMismatch

from .frozen import GAP_SCALAR


@pytest.fixture(scope="module")
def stable_model():
    return validate_model(StateSpaceModel([[0.7, 0.2], [-0.3, 0.5]], [[1.0, 0.0], [0.4, 0.6]]))


@pytest.fixture(scope="module")
def stable_run(stable_model):
    sol = solve_nrdf(stable_model, 0.3)
    design = CodecDesign.build(stable_model, sol, seed=21)
    X = simulate_source(stable_model, 2999, seed=4)
    return design, X, encode_trajectory(design, X)


def bits_equal(a, b):
    return np.array_equal(np.asarray(a).view(np.uint64), np.asarray(b).view(np.uint64))


def test_batch_round_trip_is_bitwise(stable_run):
    design, X, run = stable_run
    kt, y = decode_stream(design, run.payloads, run.nbits)
    assert bits_equal(kt, run.k_tilde) and bits_equal(y, run.y)


def test_step_api_matches_batch(stable_run):
    design, X, run = stable_run
    enc = CodecState(design, "encoder")
    dec = CodecState(design, "decoder")
    for t in range(300):
        payload, nb, y_enc = encode_step(enc, X[t])
        assert (payload, nb) == (run.payloads[t], run.nbits[t])
        y_dec = decode_step(dec, payload, nb)
        assert bits_equal(y_enc, y_dec) and bits_equal(y_dec, run.y[t])


def test_fresh_decoder_per_step(stable_run):
    design, X, run = stable_run
    for t in range(0, 3000, 97):
        state = CodecState(design, "decoder", y_prev=run.y[t - 1] if t else None, t=t)
        assert bits_equal(decode_step(state, run.payloads[t], run.nbits[t]), run.y[t])


def test_state_sides_are_enforced(stable_run):
    design, X, _ = stable_run
    with pytest.raises(ValueError):
        decode_step(CodecState(design, "encoder"), 0, 0)
    with pytest.raises(ValueError):
        encode_step(CodecState(design, "decoder"), X[0])
    with pytest.raises(ValueError):
        CodecState(design, "relay")
    with pytest.raises(DimensionMismatch):
        encode_trajectory(design, X[:, :1])


def test_seed_changes_the_stream(stable_model, stable_run):
    design, X, run = stable_run
    other = CodecDesign.build(stable_model, solve_nrdf(stable_model, 0.3), seed=22)
    assert encode_trajectory(other, X).payloads != run.payloads


def test_bit_flip_is_detected_or_diverges(stable_run):
    design, X, run = stable_run
    payloads = list(run.payloads)
    t = 1500
    payloads[t] ^= 1 << (int(run.nbits[t]) - 1)
    try:
        _, y = decode_stream(design, payloads, run.nbits)
    except BitstreamCorrupt:
        return
    assert not bits_equal(y[t], run.y[t])
    assert bits_equal(y[:t], run.y[:t])


def test_zero_rate_model_emits_nothing():
    m = validate_model(StateSpaceModel([[0.5]], [[1.0]]))
    sol = solve_nrdf(m, 2.0)
    design = CodecDesign.build(m, sol, seed=0)
    enc = CodecState(design, "encoder", y_prev=[0.8])
    payload, nb, y = encode_step(enc, [3.0])
    assert (payload, nb) == (0, 0) and y[0] == 0.5 * 0.8
    dec = CodecState(design, "decoder", y_prev=[0.8])
    assert decode_step(dec, 0, 0)[0] == 0.4
    rep = run_pipeline(m, 2.0, 2000, seed=1, sol=sol)
    assert rep.empirical_rate == 0 and rep.ok


def test_pipeline_sandwich_unstable(example_model):
    rep = run_pipeline(example_model, 1.0, 100_000, seed=7)
    assert rep.decoder_match
    assert rep.nrdf_rate - 0.05 <= rep.empirical_rate <= rep.nrdf_rate + GAP_SCALAR[2] + 0.05
    assert rep.empirical_mse <= 1.05
    assert rep.ok


def test_pipeline_scalar():
    m = validate_model(StateSpaceModel([[0.9]], [[1.0]]))
    rep = run_pipeline(m, 0.3, 100_000, seed=3)
    assert rep.nrdf_rate - 0.05 <= rep.empirical_rate <= rep.nrdf_rate + GAP_SCALAR[1] + 0.05
    assert rep.empirical_mse == pytest.approx(0.3, rel=0.05)


def test_realized_length_tracks_ideal(example_model):
    rep, design, run = simulate_coded(example_model, 1.0, 20_000, seed=2)
    groups = len(design.layout.groups)
    assert np.all(run.nbits >= run.ideal_bits - 1e-9)
    assert np.all(run.nbits < run.ideal_bits + groups)
    assert rep.empirical_rate - rep.ideal_rate < groups


def test_pipeline_is_deterministic(example_model):
    a = run_pipeline(example_model, 2.0, 5000, seed=11).to_json()
    b = run_pipeline(example_model, 2.0, 5000, seed=11).to_json()
    assert a == b


def test_pipeline_requires_enough_steps(example_model):
    with pytest.raises(ValueError):
        run_pipeline(example_model, 1.0, 999, seed=0)


def test_check_report_flags_violations(example_model):
    rep = run_pipeline(example_model, 1.0, 2000, seed=0)
    rep.empirical_mse = 2.0
    rep.decoder_match = False
    check_report(rep)
    assert len(rep.violations) == 2 and not rep.ok


def test_report_exports(tmp_path, example_model):
    rep = run_pipeline(example_model, 1.0, 2000, seed=0)
    d = json.loads(rep.to_json(lengths=False))
    assert d["per_step_lengths"] is None and d["total_bits"] == rep.total_bits
    assert d["solution"]["rate_bits"] == rep.nrdf_rate
    path = tmp_path / "r.csv"
    write_reports_csv([rep], path)
    header, row = path.read_text().splitlines()
    assert header.split(",")[0] == "D" and row.split(",")[-1] == "True"


# -- container format --------------------------------------------------------------

def test_stream_file_round_trip(tmp_path, stable_model, stable_run):
    design, X, run = stable_run
    path = tmp_path / "s.zdrd"
    write_stream(path, design, stable_model, 0.3, run.payloads, run.nbits)
    header, payloads, nbits = read_stream(path, stable_model)
    assert header.seed == 21 and header.n == len(X) and header.p == 2
    assert payloads == run.payloads and list(nbits) == list(run.nbits)
    with pytest.raises(BitstreamCorrupt):
        read_stream(path, validate_model(StateSpaceModel(np.eye(2) * 0.5, np.eye(2))))


def test_container_layout():
    h = bitstream.StreamHeader(p=3, seed=2**64 - 1, D=0.5, fingerprint=b"\x01" * 8, n=2)
    data = bitstream.dumps(h, [0b101, 0], [3, 0])
    assert data[:4] == b"ZDRD" and data[4] == bitstream.FORMAT_VERSION
    # varint 3, one byte 0b1010_0000, varint 0
    assert data[-3:] == bytes([3, 0b10100000, 0])
    assert bitstream.loads(data) == (h, [5, 0], [3, 0])


def test_container_rejects_damage():
    h = bitstream.StreamHeader(p=1, seed=1, D=1.0, fingerprint=b"\x00" * 8, n=1)
    data = bitstream.dumps(h, [300], [9])
    for bad in (b"XXXX" + data[4:], data[:4] + b"\x09" + data[5:], data[:-1], data + b"\x00",
                data[:10]):
        with pytest.raises(BitstreamCorrupt):
            bitstream.loads(bad)


@given(st.lists(st.integers(0, 300), max_size=30), st.integers(0, 2**32))
@settings(max_examples=60)
def test_container_round_trip(lengths, seed):
    rng = np.random.default_rng(seed)
    payloads = [int(rng.integers(0, 2**min(b, 62))) if b else 0 for b in lengths]
    payloads = [p | (1 << (b - 1)) if b > 62 else p for p, b in zip(payloads, lengths)]
    h = bitstream.StreamHeader(p=2, seed=seed, D=0.25, fingerprint=b"abcdefgh", n=len(lengths))
    assert bitstream.loads(bitstream.dumps(h, payloads, lengths)) == (h, payloads, lengths)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=8)
def test_synchronization_random_models(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (2, 2))
    A *= rng.uniform(0.2, 0.95) / np.max(np.abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((2, 2)) + 2 * np.eye(2)
    m = validate_model(StateSpaceModel(A, B))
    D = rng.uniform(0.1, 0.8) * np.trace(m.sigma_x0)
    design = CodecDesign.build(m, solve_nrdf(m, D), seed=seed)
    X = simulate_source(m, 1999, seed=seed)
    run = encode_trajectory(design, X)
    _, y = decode_stream(design, run.payloads, run.nbits)
    assert bits_equal(y, run.y)
