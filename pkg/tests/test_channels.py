import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qevorec.channels import (
    KINDS,
    ChannelPair,
    apply_channel_pair,
    apply_channel_pair_array,
    identity_channel,
    make_channel,
    random_channel_pair,
)
from qevorec.correlations import discord
from qevorec.errors import ArgumentError
from qevorec.numkern import SIGMA_X, SIGMA_Y, SIGMA_Z
from qevorec.qsys import DensityMatrix, bell_phi_plus, random_mixed_state_bures, random_pure_state
from qevorec.rng import Rng

from .util import random_density

kinds = st.sampled_from(KINDS)
probs = st.floats(0.0, 1.0)


@given(kinds, probs)
def test_completeness(kind, p):
    assert make_channel(kind, p).completeness_error() <= 1e-12


def test_probability_domain():
    with pytest.raises(ArgumentError):
        make_channel("X", 1.5)
    with pytest.raises(ArgumentError):
        make_channel("X", -0.1)
    with pytest.raises(ArgumentError):
        make_channel("Q", 0.5)


def test_bit_flip_one_is_identity(nprng):
    ch = make_channel("X", 1.0)
    assert np.all(ch.kraus[1] == 0)
    rho = random_density(nprng, 2)
    assert np.allclose(ch.apply(rho), rho, atol=1e-15)


def test_amplitude_damping_full_decay():
    out = make_channel("A", 1.0).apply(np.diag([0.0, 1.0]).astype(complex))
    assert np.allclose(out, np.diag([1.0, 0.0]), atol=1e-15)


def test_depolarizing_full(nprng):
    for _ in range(5):
        rho = random_density(nprng, 2)
        assert np.allclose(make_channel("D", 1.0).apply(rho), np.eye(2) / 2, atol=1e-14)


def test_depolarizing_matches_pauli_twirl(nprng):
    rho = random_density(nprng, 2)
    twirl = (rho + SIGMA_X @ rho @ SIGMA_X + SIGMA_Y @ rho @ SIGMA_Y + SIGMA_Z @ rho @ SIGMA_Z) / 4
    assert np.allclose(make_channel("D", 1.0).apply(rho), twirl, atol=1e-14)


def test_pair_identity_leaves_state(nprng):
    rho = DensityMatrix(random_density(nprng, 4), 2)
    pair = ChannelPair(identity_channel(), make_channel("Z", 1.0))
    for mode in ("mixture", "tensor"):
        assert np.allclose(apply_channel_pair(rho, pair, mode).mat, rho.mat, atol=1e-14)


def test_pair_is_half_half_mixture(nprng):
    rho = random_density(nprng, 4)
    a, b = make_channel("A", 0.3), make_channel("Y", 0.6)
    i2 = np.eye(2)
    ea = sum(np.kron(m, i2) @ rho @ np.kron(m, i2).conj().T for m in a.kraus)
    eb = sum(np.kron(i2, m) @ rho @ np.kron(i2, m).conj().T for m in b.kraus)
    out = apply_channel_pair_array(rho, ChannelPair(a, b))
    assert np.allclose(out, 0.5 * (ea + eb), atol=1e-14)


def test_pair_tensor_mode(nprng):
    rho = random_density(nprng, 4)
    a, b = make_channel("D", 0.4), make_channel("X", 0.2)
    ref = sum(
        np.kron(ma, mb) @ rho @ np.kron(ma, mb).conj().T for ma in a.kraus for mb in b.kraus
    )
    assert np.allclose(apply_channel_pair_array(rho, ChannelPair(a, b), "tensor"), ref, atol=1e-14)


def test_pair_bad_mode_and_dimension():
    pair = ChannelPair(identity_channel(), identity_channel())
    with pytest.raises(ArgumentError):
        apply_channel_pair_array(np.eye(4) / 4, pair, "serial")
    with pytest.raises(ArgumentError):
        apply_channel_pair(DensityMatrix(np.eye(8) / 8, 3), pair)


def test_bell_under_phase_flip():
    pair = ChannelPair(make_channel("Z", 0.5), identity_channel())
    out = apply_channel_pair(bell_phi_plus(), pair)
    # A side: dephased Bell state with coherence 0; mixed half/half with Bell
    ref = np.zeros((4, 4))
    ref[0, 0] = ref[3, 3] = 0.5
    ref[0, 3] = ref[3, 0] = 0.25
    assert np.allclose(out.mat, ref, atol=1e-14)
    assert 0 < discord(out) < 1


def test_cptp_on_random_draws():
    rng = Rng(41)
    for k in range(100):
        rho = random_mixed_state_bures(2, rng.child(k, 0))
        pair = random_channel_pair(rng.child(k, 1))
        for mode in ("mixture", "tensor"):
            out = apply_channel_pair_array(rho.mat, pair, mode)
            assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(out)[0] >= -1e-10


def test_unital_pair_fixes_maximally_mixed():
    rng = Rng(43)
    for k in range(20):
        a = make_channel(KINDS[k % 4], rng.uniform())
        b = make_channel(KINDS[(k // 4) % 4], rng.uniform())
        out = apply_channel_pair_array(np.eye(4) / 4, ChannelPair(a, b))
        assert np.allclose(out, np.eye(4) / 4, atol=1e-15)


def test_random_pair_determinism():
    a = random_channel_pair(Rng(7, (6,)))
    b = random_channel_pair(Rng(7, (6,)))
    assert a.to_json() == b.to_json()


def test_random_pair_kind_frequencies():
    counts = {}
    rng = Rng(47)
    for k in range(10_000):
        p = random_channel_pair(rng.child(k))
        key = (p.ch_a.kind, p.ch_b.kind)
        counts[key] = counts.get(key, 0) + 1
        assert p.ch_a.completeness_error() <= 1e-12 and p.ch_b.completeness_error() <= 1e-12
    assert len(counts) == 25
    freqs = np.array(list(counts.values())) / 10_000
    assert np.all(np.abs(freqs - 0.04) <= 0.01)


def test_pair_json_round_trip():
    p = random_channel_pair(Rng(3))
    q = ChannelPair.from_json(p.to_json())
    assert q.to_json() == p.to_json()


def test_pure_input_stays_valid():
    rho = random_pure_state(2, Rng(53))
    out = apply_channel_pair(rho, random_channel_pair(Rng(54)))
    assert out.purity() <= 1 + 1e-12
