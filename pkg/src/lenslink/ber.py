"""Pairwise error probability, the union-bound BER objective, and a seeded
Monte Carlo BER estimator.

    PEP(m, n) = Q(alpha * r * ||H (x_m - x_n)|| / (2 sigma))
    bound     = 1/(eta 2^eta) * sum_{m} sum_{n != m} d_H(m, n) * PEP(m, n)

with d_H the Hamming distance between the bit labels (= codeword indices).
Because ||H d|| = ||H (-d)|| the double sum collapses onto unique sign-fixed
difference vectors with aggregated Hamming weights; each unique difference
contributes through the quadratic form d^T (H^T H) d, which makes evaluating
the bound for many candidate lens states a single matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .gsm import GsmCodebook, GsmConfig, detect_indices


def q_function(x):
    """Gaussian tail Q(x) = 0.5 * erfc(x / sqrt(2))."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def hamming_distance(a: int, b: int) -> int:
    return int(bin(a ^ b).count("1"))


def pep(H: np.ndarray, x_m: np.ndarray, x_n: np.ndarray, cfg: GsmConfig,
        r: float) -> float:
    """Pairwise error probability of confusing x_m with x_n."""
    x_m = np.asarray(x_m, dtype=float)
    x_n = np.asarray(x_n, dtype=float)
    if x_m.shape == x_n.shape and np.array_equal(x_m, x_n):
        raise ValueError("PEP undefined for identical codewords")
    arg = cfg.alpha * r * np.linalg.norm(np.asarray(H) @ (x_m - x_n))
    return float(q_function(arg / (2.0 * cfg.sigma)))


# ---------------------------------------------------------------------------
# precomputed pair structure
# ---------------------------------------------------------------------------

@dataclass
class PairStructure:
    """Sign-collapsed codeword differences with aggregated Hamming weights.

    coeffs is (P, T): row p holds the upper-triangle coefficients of the
    outer product d_p d_p^T (off-diagonal entries doubled), so that
    ||H d_p||^2 = coeffs[p] . tri(H^T H).  tri_rows/tri_cols map triangle
    slots back to matrix indices.
    """

    coeffs: np.ndarray
    coeffs32: np.ndarray
    weights: np.ndarray
    tri_rows: np.ndarray
    tri_cols: np.ndarray
    eta: int
    n_codewords: int


# keyed by id() with a strong reference to the codebook alongside, so a
# collected codebook can never hand its id (and cache slot) to a new one
_structure_cache: dict[int, tuple[GsmCodebook, PairStructure]] = {}


def pair_structure(codebook: GsmCodebook) -> PairStructure:
    """Build (and cache) the difference structure of a codebook."""
    key = id(codebook)
    hit = _structure_cache.get(key)
    if hit is not None:
        return hit[1]
    X = codebook.vectors
    n, n_t = X.shape
    eta = codebook.eta_gsm
    mi, ni = np.triu_indices(n, k=1)
    D = X[mi] - X[ni]
    # Hamming weights of the bit labels; each unordered pair counts twice.
    w = np.bitwise_count(np.uint64(mi ^ ni)).astype(float) * 2.0
    # canonical sign: first nonzero entry positive
    first = np.argmax(D != 0.0, axis=1)
    signs = np.sign(D[np.arange(len(D)), first])
    signs[signs == 0.0] = 1.0
    D = D * signs[:, None]
    uniq, inv = np.unique(np.round(D, 12), axis=0, return_inverse=True)
    weights = np.zeros(len(uniq))
    np.add.at(weights, inv, w)
    tri_rows, tri_cols = np.triu_indices(n_t)
    outer = uniq[:, :, None] * uniq[:, None, :]
    coeffs = outer[:, tri_rows, tri_cols]
    off = tri_rows != tri_cols
    coeffs[:, off] *= 2.0
    st = PairStructure(coeffs=coeffs, coeffs32=coeffs.astype(np.float32),
                       weights=weights, tri_rows=tri_rows, tri_cols=tri_cols,
                       eta=eta, n_codewords=n)
    _structure_cache[key] = (codebook, st)
    return st


def ber_bound(H: np.ndarray, codebook: GsmCodebook, cfg: GsmConfig,
              r: float) -> float:
    """Union-bound BER (exact float64 path)."""
    st = pair_structure(codebook)
    G = np.asarray(H, dtype=float).T @ np.asarray(H, dtype=float)
    gvec = G[st.tri_rows, st.tri_cols]
    quad = st.coeffs @ gvec
    np.maximum(quad, 0.0, out=quad)
    z = (cfg.alpha * r / (2.0 * cfg.sigma)) * np.sqrt(quad)
    return float(st.weights @ q_function(z)) / (st.eta * st.n_codewords)


def bound_batch(H_batch: np.ndarray, codebook: GsmCodebook, cfg: GsmConfig,
                r: float, dtype=np.float32, sigma=None) -> np.ndarray:
    """Union bound for a (B, N_r, N_t) stack of channel matrices.

    The float32 path trades ~1e-7 relative landscape error for a large
    speedup; use the float64 ber_bound for reported values.  `sigma` may be
    a length-B array overriding cfg.sigma per matrix (SNR sweeps).
    """
    st = pair_structure(codebook)
    Hb = np.asarray(H_batch)
    G = np.einsum("bji,bjk->bik", Hb, Hb)
    gvecs = G[:, st.tri_rows, st.tri_cols].astype(dtype)    # (B, T)
    coeffs = st.coeffs32 if dtype == np.float32 else st.coeffs
    quad = coeffs @ gvecs.T                                  # (P, B)
    np.maximum(quad, 0, out=quad)
    if sigma is None:
        c = dtype(cfg.alpha * r / (2.0 * cfg.sigma) / math.sqrt(2.0))
    else:
        c = (cfg.alpha * r / (2.0 * np.asarray(sigma, dtype=dtype))
             / dtype(math.sqrt(2.0)))                        # (B,)
    z = np.sqrt(quad, out=quad)
    z *= c
    tail = erfc(z)
    out = (st.weights.astype(dtype) @ tail) * 0.5
    return out.astype(float) / (st.eta * st.n_codewords)


# ---------------------------------------------------------------------------
# Monte Carlo validation
# ---------------------------------------------------------------------------

@dataclass
class BerReport:
    bound: float
    simulated: float | None
    trials: int
    bit_errors: int
    snr_db: float | None
    ci_halfwidth: float | None = None


def wilson_halfwidth(errors: int, n: int, z: float = 1.959964) -> float:
    """Half-width of the 95% Wilson score interval for a proportion."""
    if n == 0:
        return float("nan")
    p = errors / n
    denom = 1.0 + z * z / n
    return z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom


def monte_carlo_ber(H: np.ndarray, codebook: GsmCodebook, cfg: GsmConfig,
                    r: float, trials: int, seed=0,
                    chunk: int = 20000) -> BerReport:
    """Simulate uniform codeword transmission with ML detection.

    Bit errors are counted on the label XOR (same labeling the bound uses).
    trials = 0 skips simulation entirely -- no noise RNG is ever created.
    """
    from .gsm import average_snr  # local import keeps module load cheap

    H = np.asarray(H, dtype=float)
    bnd = ber_bound(H, codebook, cfg, r)
    snr = average_snr(H, codebook, cfg, r)
    if trials <= 0:
        return BerReport(bound=bnd, simulated=None, trials=0, bit_errors=0,
                         snr_db=snr)
    rng = np.random.default_rng(seed)
    eta = codebook.eta_gsm
    A = cfg.alpha * r * (H @ codebook.vectors.T)             # (N_r, K)
    errors = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        tx = rng.integers(0, len(codebook), size=m)
        Y = A[:, tx].T + cfg.sigma * rng.standard_normal((m, H.shape[0]))
        det = detect_indices(Y, H, codebook, cfg, r)
        errors += int(np.bitwise_count(np.uint64(tx ^ det)).sum())
        done += m
    nbits = trials * eta
    return BerReport(bound=bnd, simulated=errors / nbits, trials=trials,
                     bit_errors=errors, snr_db=snr,
                     ci_halfwidth=wilson_halfwidth(errors, nbits))
