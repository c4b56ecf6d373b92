import math
from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

from lenslink.ber import (ber_bound, bound_batch, hamming_distance,
                          monte_carlo_ber, pair_structure, pep, q_function,
                          wilson_halfwidth)
from lenslink.gsm import GsmConfig, build_codebook, sigma_for_snr


def table_cfg(**kw):
    return GsmConfig(**{"N_t": 16, "N_a": 2, "M": 2, "I_P": 1.0,
                        "alpha": 1.0, "sigma": 1e-6, **kw})


def test_q_function_reference_values():
    npt.assert_allclose(q_function(0.0), 0.5, rtol=1e-15)
    npt.assert_allclose(q_function(1.0), 0.15865525393145707, rtol=1e-12)
    assert q_function(10.0) < 1e-20
    x = np.linspace(-3, 3, 25)
    assert np.all(np.diff(q_function(x)) < 0)


def test_hamming_distance():
    assert hamming_distance(0, 0) == 0
    assert hamming_distance(0b1011, 0b0010) == 2
    assert hamming_distance(255, 0) == 8


def test_pep_identical_raises():
    cfg = table_cfg()
    cb = build_codebook(cfg)
    H = np.eye(16)
    with pytest.raises(ValueError):
        pep(H, cb.vectors[3], cb.vectors[3], cfg, 0.75)


def test_pep_closed_form():
    cfg = table_cfg(sigma=0.5)
    cb = build_codebook(cfg)
    rng = np.random.default_rng(4)
    H = rng.uniform(0, 1, (16, 16))
    xm, xn = cb.vectors[10], cb.vectors[99]
    want = q_function(cfg.alpha * 0.75
                      * np.linalg.norm(H @ (xm - xn)) / (2 * 0.5))
    npt.assert_allclose(pep(H, xm, xn, cfg, 0.75), want, rtol=1e-12)


def test_zero_channel_bound_closed_form():
    """With H = 0 every PEP is Q(0) = 1/2 and the weighted double sum
    collapses to 2^eta / 4."""
    cfg4 = GsmConfig(N_t=4, N_a=1, M=2, I_P=1.0, alpha=1.0, sigma=1e-6)
    cb4 = build_codebook(cfg4)
    npt.assert_allclose(ber_bound(np.zeros((4, 4)), cb4, cfg4, 0.75), 2.0,
                        rtol=1e-12)
    cfg = table_cfg()
    cb = build_codebook(cfg)
    npt.assert_allclose(ber_bound(np.zeros((16, 16)), cb, cfg, 0.75), 64.0,
                        rtol=1e-12)


def test_two_codeword_bound_closed_form():
    """N_t = N_a = 1, M = 2: exactly two codewords one bit apart, so the
    bound equals the single PEP."""
    cfg = GsmConfig(N_t=1, N_a=1, M=2, I_P=1.0, alpha=1.0, sigma=0.2)
    cb = build_codebook(cfg)
    assert cb.eta_gsm == 1 and len(cb) == 2
    H = np.array([[0.9]])
    delta = abs(cb.vectors[1, 0] - cb.vectors[0, 0])
    want = q_function(cfg.alpha * 0.75 * 0.9 * delta / (2 * 0.2))
    npt.assert_allclose(ber_bound(H, cb, cfg, 0.75), want, rtol=1e-12)


def test_bound_brute_force_small_codebook():
    """Direct double-sum evaluation must match the pair-structure path."""
    cfg = GsmConfig(N_t=4, N_a=2, M=2, I_P=1.0, alpha=1.0, sigma=0.05)
    cb = build_codebook(cfg)
    rng = np.random.default_rng(5)
    H = rng.uniform(0, 1, (4, 4)) * 0.1
    K = len(cb)
    total = 0.0
    for m in range(K):
        for n in range(K):
            if m == n:
                continue
            total += hamming_distance(m, n) * pep(H, cb.vectors[m],
                                                  cb.vectors[n], cfg, 0.75)
    want = total / (cb.eta_gsm * K)
    npt.assert_allclose(ber_bound(H, cb, cfg, 0.75), want, rtol=1e-10)


def test_pair_structure_table_size():
    cb = build_codebook(table_cfg())
    ps = pair_structure(cb)
    assert ps.coeffs.shape[0] == 27184
    assert ps.coeffs.shape[1] == 16 * 17 // 2
    assert ps.weights.shape == (27184,)
    # weights aggregate 2*d_H over 256*255/2 unordered pairs
    assert ps.weights.sum() == 2 * sum(
        bin(m ^ n).count("1") for m in range(256) for n in range(m + 1, 256))


def test_bound_monotone_in_sigma():
    cfg = table_cfg(sigma=1e-7)
    cb = build_codebook(cfg)
    rng = np.random.default_rng(6)
    H = rng.uniform(0, 1, (16, 16)) * 1e-6
    b1 = ber_bound(H, cb, cfg, 0.75)
    b2 = ber_bound(H, cb, replace(cfg, sigma=2e-7), 0.75)
    b3 = ber_bound(H, cb, replace(cfg, sigma=4e-7), 0.75)
    assert b1 < b2 < b3


def test_bound_batch_matches_scalar():
    cfg = table_cfg(sigma=2e-7)
    cb = build_codebook(cfg)
    rng = np.random.default_rng(7)
    Hb = rng.uniform(0, 1, (24, 16, 16)) * 1e-6
    batch = bound_batch(Hb, cb, cfg, 0.75)
    exact = np.array([ber_bound(Hb[k], cb, cfg, 0.75) for k in range(24)])
    npt.assert_allclose(batch, exact, rtol=2e-4)


def test_bound_batch_accepts_sigma_array():
    cfg = table_cfg()
    cb = build_codebook(cfg)
    rng = np.random.default_rng(17)
    Hb = rng.uniform(0, 1, (5, 16, 16)) * 1e-6
    sigmas = np.array([1e-7, 2e-7, 5e-7, 1e-6, 2e-6])
    batch = bound_batch(Hb, cb, cfg, 0.75, sigma=sigmas)
    for k in range(5):
        want = ber_bound(Hb[k], cb, replace(cfg, sigma=sigmas[k]), 0.75)
        npt.assert_allclose(batch[k], want, rtol=2e-4)


def test_wilson_halfwidth_sanity():
    w = wilson_halfwidth(50, 1000)
    assert 0 < w < 0.02
    assert wilson_halfwidth(0, 1000) > 0.0
    assert math.isnan(wilson_halfwidth(0, 0))


def test_monte_carlo_noiseless_is_error_free():
    cfg = table_cfg(sigma=1e-12)
    cb = build_codebook(cfg)
    rng = np.random.default_rng(8)
    H = rng.uniform(0, 1, (16, 16)) * 1e-3
    rep = monte_carlo_ber(H, cb, cfg, 0.75, trials=2000, seed=1)
    assert rep.simulated == 0.0
    assert rep.bit_errors == 0
    assert rep.trials == 2000


def test_monte_carlo_trials_zero_skips_simulation():
    cfg = table_cfg(sigma=0.5)
    cb = build_codebook(cfg)
    H = np.eye(16)
    rep = monte_carlo_ber(H, cb, cfg, 0.75, trials=0, seed=None)
    assert rep.simulated is None
    assert rep.trials == 0
    assert rep.bound > 0


def test_pair_structure_survives_codebook_turnover():
    """Structures cached for dead codebooks must never be served to new
    ones (id reuse after garbage collection)."""
    import gc

    for n_t in (4, 16, 5, 16, 4):
        cfg = GsmConfig(N_t=n_t, N_a=2, M=2, I_P=1.0, alpha=1.0, sigma=0.1)
        cb = build_codebook(cfg)
        st = pair_structure(cb)
        assert st.coeffs.shape[1] == n_t * (n_t + 1) // 2
        b = ber_bound(np.eye(n_t) * 0.1, cb, cfg, 0.75)
        assert np.isfinite(b)
        del cb, st
        gc.collect()


def test_monte_carlo_reproducible():
    cfg = table_cfg(sigma=1e-7)
    cb = build_codebook(cfg)
    rng = np.random.default_rng(9)
    H = rng.uniform(0, 1, (16, 16)) * 1e-6
    r1 = monte_carlo_ber(H, cb, cfg, 0.75, trials=5000, seed=77)
    r2 = monte_carlo_ber(H, cb, cfg, 0.75, trials=5000, seed=77)
    assert r1.simulated == r2.simulated
    assert r1.bit_errors == r2.bit_errors


def test_union_bound_dominates_simulation():
    """In the union bound's valid regime the simulated BER stays below
    bound + 3 CI half-widths."""
    rng = np.random.default_rng(10)
    cfg = table_cfg()
    cb = build_codebook(cfg)
    for snr_db in (15.0, 25.0):
        for _ in range(3):
            H = rng.uniform(0, 1, (16, 16)) * 1e-6
            sig = sigma_for_snr(H, cb, cfg, 0.75, snr_db)
            c = replace(cfg, sigma=sig)
            rep = monte_carlo_ber(H, cb, c, 0.75, trials=20000, seed=3)
            assert rep.simulated <= rep.bound + 3 * rep.ci_halfwidth


def test_bound_nonnegative_and_finite():
    rng = np.random.default_rng(11)
    cfg = table_cfg()
    cb = build_codebook(cfg)
    for scale in (1e-9, 1e-6, 1e-3):
        H = rng.uniform(0, 1, (16, 16)) * scale
        b = ber_bound(H, cb, cfg, 0.75)
        assert np.isfinite(b) and b >= 0
