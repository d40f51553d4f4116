import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from keylength.core import InvalidParameterError, Message, Observation, SecretKey, make_params
from keylength.rng import substream
from keylength.schemes import (ImprovedSpreadSpectrum, IssParams, SpreadSpectrum,
                               attacker_estimate, attacker_estimate_batch, awgn,
                               channel_from_sigma, channel_from_wnr, decode, gen_host, gen_key,
                               gen_keys, gen_observations, iss_embed, iss_from_rejection,
                               make_scheme, ser_mc, ss_embed, watermarked_contents)
from keylength.special import std_normal_cdf

P300 = make_params(300, 1.0, 10.0)


def e1(n=4):
    v = np.zeros(n)
    v[0] = 1.0
    return SecretKey(v)


# --- generation -------------------------------------------------------------------

def test_host_moments():
    p = make_params(10**6, 2.0, 10.0)
    x = gen_host(p, np.random.default_rng(1))
    assert abs(x.mean()) < 4 * 2.0 / 1000
    assert x.var() == pytest.approx(4.0, rel=0.01)


def test_host_deterministic():
    a = gen_host(P300, substream(3, "host"))
    b = gen_host(P300, substream(3, "host"))
    assert np.array_equal(a, b)


@given(st.integers(2, 500), st.integers(0, 2**32))
def test_key_unit_norm(n_v, seed):
    k = gen_key(n_v, np.random.default_rng(seed))
    assert abs(np.linalg.norm(np.asarray(k)) - 1.0) < 1e-12


def test_key_uniform_in_3d():
    keys = gen_keys(3, 10**5, np.random.default_rng(7))
    p = np.mean(keys[:, 0] > 0.5)
    se = math.sqrt(0.25 * 0.75 / 10**5)
    assert abs(p - 0.25) < 3 * se


def test_independent_keys_nearly_orthogonal():
    rng = np.random.default_rng(11)
    a, b = np.asarray(gen_key(10**4, rng)), np.asarray(gen_key(10**4, rng))
    assert abs(a @ b) < 5 / math.sqrt(10**4)


def test_gen_key_rejects_small_dimension():
    with pytest.raises(InvalidParameterError):
        gen_key(1, np.random.default_rng(0))


# --- embedding and decoding -----------------------------------------------------------

def test_ss_embed_examples():
    assert np.array_equal(ss_embed(np.zeros(4), Message(0), e1(), 1.0), np.asarray(e1()))
    assert np.array_equal(ss_embed(np.zeros(4), Message(1), e1(), 2.0), -2 * np.asarray(e1()))


@given(st.integers(0, 2**32), st.integers(0, 1), st.floats(0.01, 50))
def test_ss_distortion(seed, m, alpha):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(50)
    k = gen_key(50, rng)
    y = ss_embed(x, Message(m), k, alpha)
    assert np.linalg.norm(y - x) == pytest.approx(alpha, abs=1e-12 * max(1, alpha))


def test_dimension_mismatch():
    with pytest.raises(InvalidParameterError):
        ss_embed(np.zeros(3), Message(0), e1(4), 1.0)
    with pytest.raises(InvalidParameterError):
        decode(np.zeros(3), e1(4))


def test_iss_reduces_to_ss():
    rng = np.random.default_rng(5)
    iss = iss_from_rejection(P300, 0.0)
    for _ in range(100):
        x = rng.standard_normal(300)
        k = gen_key(300, rng)
        m = Message(int(rng.integers(2)))
        assert np.array_equal(iss_embed(x, m, k, iss), ss_embed(x, m, k, P300.alpha))


def test_iss_batch_reduces_to_ss():
    rng = np.random.default_rng(6)
    k = np.asarray(gen_key(300, rng))
    x = rng.standard_normal((1000, 300))
    m = rng.integers(0, 2, 1000)
    a = SpreadSpectrum(P300).embed(x, m, k)
    b = make_scheme(P300, "iss", 0.0).embed(x, m, k)
    assert np.array_equal(a, b)


def test_iss_host_rejection_fixed_point():
    iss = iss_from_rejection(P300, 0.5)
    k = e1(300)
    x = np.random.default_rng(2).standard_normal(300)
    x[0] = iss.beta / iss.gamma
    assert np.allclose(iss_embed(x, Message(0), k, iss), x, atol=1e-12)


def test_iss_expected_distortion():
    iss = iss_from_rejection(P300, 1.2)
    scheme = ImprovedSpreadSpectrum(P300, iss)
    rng = np.random.default_rng(8)
    k = np.asarray(gen_key(300, rng))
    x = gen_host(P300, rng, 10**5)
    y = scheme.embed(x, rng.integers(0, 2, 10**5), k)
    assert np.mean(np.sum((y - x) ** 2, axis=1)) == pytest.approx(P300.alpha**2, rel=0.01)


def test_iss_message_symmetry():
    # the sign-corrected correlation has the same law for both messages
    scheme = make_scheme(P300, "iss", 0.7)
    rng = np.random.default_rng(9)
    k = np.asarray(gen_key(300, rng))
    x = gen_host(P300, rng, 20000)
    z0 = scheme.embed(x[:10000], np.zeros(10000, int), k) @ k
    z1 = -(scheme.embed(x[10000:], np.ones(10000, int), k) @ k)
    assert stats.ks_2samp(z0, z1).pvalue > 1e-3


def test_decode_examples():
    k = e1()
    assert decode(np.asarray(k), k).bit == 0
    assert decode(-np.asarray(k), k).bit == 1
    assert decode(np.zeros(4), k).bit == 1


@given(arrays(np.float64, 20, elements=st.floats(-5, 5)), st.integers(0, 1),
       st.floats(0.1, 10))
def test_decode_after_embed(x, m, alpha):
    k = e1(20)
    y = ss_embed(x, Message(m), k, alpha)
    if (-1) ** m * x[0] > -alpha:
        assert decode(y, k).bit == m


def test_awgn():
    y = np.arange(5.0)
    assert awgn(y, 0.0, np.random.default_rng(0)) is not None
    assert np.array_equal(awgn(y, 0.0, np.random.default_rng(0)), y)
    z = awgn(np.zeros(10**6), 0.7, np.random.default_rng(1))
    assert z.var() == pytest.approx(0.49, rel=0.01)
    a = awgn(y, 1.0, substream(1, "n"))
    b = awgn(y, 1.0, substream(1, "n"))
    assert np.array_equal(a, b)
    with pytest.raises(InvalidParameterError):
        awgn(y, -1.0, np.random.default_rng(0))


# --- observations and the attacker -------------------------------------------------------

def test_no_observations():
    assert gen_observations(P300, SpreadSpectrum(P300), 0, gen_key(300, np.random.default_rng(0)),
                            np.random.default_rng(1)) == []


def test_observations_decode_and_messages():
    rng = np.random.default_rng(3)
    p = make_params(30, 1.0, 10.0)
    k = gen_key(30, rng)
    obs = gen_observations(p, SpreadSpectrum(p), 10**4, k, rng)
    eta0 = std_normal_cdf(-p.alpha)
    correct = np.mean([decode(o.signal, k).bit == o.message.bit for o in obs])
    assert correct >= 1 - eta0 - 3 * math.sqrt(eta0 * (1 - eta0) / 10**4)
    ones = sum(o.message.bit for o in obs)
    assert stats.chisquare([ones, 10**4 - ones]).pvalue > 1e-3


def test_attacker_single_observation():
    y = np.array([3.0, 4.0])
    assert np.allclose(np.asarray(attacker_estimate([Observation(y, Message(0))])), [0.6, 0.8])
    assert np.allclose(np.asarray(attacker_estimate([Observation(y, Message(1))])), [-0.6, -0.8])
    with pytest.raises(InvalidParameterError):
        attacker_estimate([])


@pytest.mark.parametrize("n_o", [1, 10])
def test_attacker_alignment(n_o):
    # oracle: k_hat.k = (a + g) / sqrt((a + g)^2 + chi2_{n_v-1} / n_o) sampled directly,
    # with a = alpha, g ~ N(0, 1/n_o); it concentrates near sqrt(lam / (lam + n_v))
    trials = 10**4
    rng = np.random.default_rng(21)
    k = np.asarray(gen_key(300, rng))
    x = gen_host(P300, rng, (trials, n_o))
    m = rng.integers(0, 2, (trials, n_o))
    khat = attacker_estimate_batch(SpreadSpectrum(P300).embed(x, m, k), m)
    got = float(np.mean(khat @ k))
    r2 = np.random.default_rng(22)
    g = P300.alpha + r2.standard_normal(10**6) / math.sqrt(n_o)
    oracle = float(np.mean(g / np.sqrt(g**2 + r2.chisquare(299, 10**6) / n_o)))
    lam = 300 * n_o / 10.0
    assert got == pytest.approx(oracle, rel=0.05)
    assert got == pytest.approx(math.sqrt(lam / (lam + 300)), rel=0.05)


def test_attacker_batch_matches_scalar():
    rng = np.random.default_rng(4)
    y = rng.standard_normal((3, 5, 7))
    m = rng.integers(0, 2, (3, 5))
    batch = attacker_estimate_batch(y, m)
    for t in range(3):
        obs = [Observation(y[t, i], Message(int(m[t, i]))) for i in range(5)]
        assert np.allclose(batch[t], np.asarray(attacker_estimate(obs)), atol=1e-14)


def test_projection_reconstructs_statistic():
    rng = np.random.default_rng(13)
    k, kp = np.asarray(gen_key(40, rng)), np.asarray(gen_key(40, rng))
    u = kp - (kp @ k) * k
    u /= np.linalg.norm(u)
    y, _ = watermarked_contents(SpreadSpectrum(make_params(40)), k, 500, rng)
    recon = (y @ k) * (k @ kp) + (y @ u) * (u @ kp)
    assert np.allclose(recon, y @ kp, atol=1e-12)


# --- robustness and ISS parameters -----------------------------------------------------------

def test_ser_noiseless_matches_formula():
    est = ser_mc(SpreadSpectrum(P300), channel_from_sigma(P300, 0.0), 10**6, seed=1)
    p = std_normal_cdf(-P300.alpha)
    assert abs(est.ser - p) <= 3 * math.sqrt(p * (1 - p) / 10**6)


def test_ser_with_noise_matches_formula():
    p60 = make_params(60, 1.0, 10.0)
    est = ser_mc(SpreadSpectrum(p60), channel_from_sigma(p60, 1.0), 2 * 10**5, seed=2)
    p = std_normal_cdf(-p60.alpha / math.sqrt(2.0))
    assert abs(est.ser - p) <= 3 * math.sqrt(p * (1 - p) / est.trials)


def test_ser_iss_gamma_zero_equals_ss():
    p80 = make_params(80, 1.0, 10.0)
    ch = channel_from_wnr(p80, -10.0)
    a = ser_mc(SpreadSpectrum(p80), ch, 50000, seed=3)
    b = ser_mc(make_scheme(p80, "iss", 0.0), ch, 50000, seed=3)
    assert a == b


def test_ser_thread_independent():
    p80 = make_params(80, 1.0, 10.0)
    ch = channel_from_wnr(p80, -10.0)
    assert ser_mc(SpreadSpectrum(p80), ch, 70000, 4, workers=1) == \
        ser_mc(SpreadSpectrum(p80), ch, 70000, 4, workers=3)


def test_channel_wnr_round_trip():
    ch = channel_from_wnr(P300, -10.0)
    assert ch.sigma_n**2 == pytest.approx(P300.alpha**2 / 300 * 10.0)
    assert channel_from_sigma(P300, ch.sigma_n).wnr_db == pytest.approx(-10.0)
    assert channel_from_wnr(P300, math.inf).sigma_n == 0.0


def test_iss_from_rejection_examples():
    a = P300.alpha
    assert iss_from_rejection(P300, 0.0).beta == a
    assert iss_from_rejection(P300, a).beta == 0.0
    assert iss_from_rejection(P300, a / math.sqrt(2)).beta == pytest.approx(a / math.sqrt(2))
    for g in (-0.1, a * 1.01):
        with pytest.raises(InvalidParameterError):
            iss_from_rejection(P300, g)


@given(st.floats(0, 1))
def test_iss_distortion_constraint(frac):
    iss = iss_from_rejection(P300, frac * P300.alpha)
    iss.check(P300)
    assert iss.beta**2 + iss.gamma**2 == pytest.approx(P300.alpha**2, abs=1e-9)


def test_iss_params_reject_bad_constraint():
    with pytest.raises(InvalidParameterError):
        ImprovedSpreadSpectrum(P300, IssParams(beta=1.0, gamma=1.0))
