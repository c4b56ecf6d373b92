"""Generalized spatial modulation: codebook construction, the received-signal
model y = alpha*r*H*x + n, average SNR, and maximum-likelihood detection.

A codeword activates exactly N_a of the N_t LEDs and assigns each active LED
one of M intensity levels I_m = 2*I_P*m/(M+1).  The spectral efficiency is

    eta_gsm = floor(log2 C(N_t, N_a)) + N_a * floor(log2 M)   [bits/use]

and the codeword at index k IS the bit label k: the high bits select the
activation pattern (lexicographic order over index sets), the low bits the
intensity symbols, most-significant chunk on the lowest-numbered active LED.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np


@dataclass(frozen=True)
class GsmConfig:
    N_t: int = 16
    N_a: int = 2
    M: int = 2
    I_P: float = 1.0
    alpha: float = 1.0
    sigma: float = 1e-6

    def __post_init__(self):
        if not 1 <= self.N_a <= self.N_t:
            raise ValueError("need 1 <= N_a <= N_t")
        if self.M < 2 or self.M & (self.M - 1):
            raise ValueError("M must be a power of two >= 2")
        if self.I_P <= 0:
            raise ValueError("I_P must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def intensity_levels(M: int, I_P: float) -> list[float]:
    """I_m = 2*I_P*m/(M+1), m = 1..M (strictly increasing, mean I_P)."""
    if M < 1 or I_P <= 0:
        raise ValueError("need M >= 1 and I_P > 0")
    return [2.0 * I_P * m / (M + 1) for m in range(1, M + 1)]


@dataclass(frozen=True)
class GsmCodebook:
    vectors: np.ndarray          # (2^eta, N_t)
    eta_gsm: int
    patterns: tuple = field(default=(), repr=False)

    def __len__(self):
        return self.vectors.shape[0]


def build_codebook(cfg: GsmConfig) -> GsmCodebook:
    """Enumerate all 2^eta_gsm legal transmit vectors in bit-label order."""
    n_pat_bits = math.floor(math.log2(math.comb(cfg.N_t, cfg.N_a)))
    sym_bits = math.floor(math.log2(cfg.M))
    eta = n_pat_bits + cfg.N_a * sym_bits
    pats = list(combinations(range(cfg.N_t), cfg.N_a))[: 2 ** n_pat_bits]
    levels = intensity_levels(cfg.M, cfg.I_P)[: 2 ** sym_bits]
    n_sym = 2 ** sym_bits
    vectors = np.zeros((2 ** eta, cfg.N_t))
    for p_idx, pat in enumerate(pats):
        for s in range(n_sym ** cfg.N_a):
            k = (p_idx << (cfg.N_a * sym_bits)) | s
            # most-significant symbol chunk drives the lowest active LED
            for slot, led in enumerate(pat):
                shift = (cfg.N_a - 1 - slot) * sym_bits
                vectors[k, led] = levels[(s >> shift) & (n_sym - 1)]
    return GsmCodebook(vectors=vectors, eta_gsm=eta, patterns=tuple(pats))


def transmit(H: np.ndarray, x: np.ndarray, cfg: GsmConfig, r: float,
             noise_seed=None) -> np.ndarray:
    """y = alpha*r*H*x + n, n ~ N(0, sigma^2 I).  Deterministic per seed;
    noise_seed=None means noiseless (the RNG is never constructed)."""
    H = np.asarray(H, dtype=float)
    x = np.asarray(x, dtype=float)
    if H.shape[1] != x.shape[0]:
        raise ValueError("H / x dimension mismatch")
    y = cfg.alpha * r * (H @ x)
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        y = y + cfg.sigma * rng.standard_normal(H.shape[0])
    return y


def mean_signal_power(H: np.ndarray, codebook: GsmCodebook,
                      cfg: GsmConfig, r: float) -> float:
    """K0 = (alpha^2 r^2 / N_r) * E_x ||H x||^2 over the uniform codebook."""
    P = np.asarray(H) @ codebook.vectors.T      # (N_r, 2^eta)
    return (cfg.alpha * r) ** 2 * float(np.mean(np.sum(P * P, axis=0)))


def average_snr(H: np.ndarray, codebook: GsmCodebook, cfg: GsmConfig,
                r: float):
    """Average electrical SNR in dB:
    gamma = alpha^2 r^2 / (sigma^2 N_r) * sum_j E{(h_j x)^2}.
    Returns None for an all-zero channel."""
    H = np.asarray(H)
    k0 = mean_signal_power(H, codebook, cfg, r)
    if k0 <= 0.0:
        return None
    gamma = k0 / (cfg.sigma ** 2 * H.shape[0])
    return 10.0 * math.log10(gamma)


def sigma_for_snr(H: np.ndarray, codebook: GsmCodebook, cfg: GsmConfig,
                  r: float, snr_db: float) -> float:
    """Noise std that puts average_snr(H, ...) exactly at snr_db."""
    k0 = mean_signal_power(np.asarray(H), codebook, cfg, r)
    if k0 <= 0.0:
        raise ValueError("zero channel has no finite SNR")
    gamma = 10.0 ** (snr_db / 10.0)
    return math.sqrt(k0 / (np.asarray(H).shape[0] * gamma))


def detect_indices(Y: np.ndarray, H: np.ndarray, codebook: GsmCodebook,
                   cfg: GsmConfig, r: float) -> np.ndarray:
    """Vectorized ML detection: argmin_k ||y - alpha*r*H*x_k||^2 for each row
    of Y; ties resolve to the lowest codeword index (argmin convention)."""
    A = cfg.alpha * r * (np.asarray(H) @ codebook.vectors.T)   # (N_r, K)
    scores = -2.0 * (np.asarray(Y) @ A) + np.sum(A * A, axis=0)
    return np.argmin(scores, axis=1)


def ml_detect(y: np.ndarray, H: np.ndarray, codebook: GsmCodebook,
              cfg: GsmConfig, r: float) -> np.ndarray:
    """ML detection of a single received vector; returns the codeword."""
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    idx = detect_indices(np.asarray(y, dtype=float)[None, :], H, codebook,
                         cfg, r)[0]
    return codebook.vectors[idx]
