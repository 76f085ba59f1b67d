"""Synthetic generators with known scaling behavior, used as oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SynthError(ValueError):
    pass


def _fgn_autocov(n: int, hurst: float) -> np.ndarray:
    k = np.arange(n, dtype=np.float64)
    two_h = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** two_h - 2.0 * k ** two_h + np.abs(k - 1) ** two_h)


def fgn(n: int, hurst: float, seed: int) -> np.ndarray:
    """Stationary fractional Gaussian noise with unit variance.

    Exact circulant-embedding synthesis; if the embedding produces a
    materially negative eigenvalue the generator falls back to a direct
    Cholesky construction for n <= 4096 and errors beyond that.
    """
    if n < 16:
        raise SynthError(f"need n >= 16, got {n}")
    if not (0.0 < hurst < 1.0):
        raise SynthError(f"hurst must lie in (0,1), got {hurst}")
    gamma = _fgn_autocov(n, hurst)
    rng = np.random.default_rng(seed)
    # first row of the 2n circulant extension
    row = np.concatenate([gamma, [0.0], gamma[:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-8 * lam.max():
        return _fgn_cholesky(n, gamma, rng)
    lam = np.maximum(lam, 0.0)
    m = 2 * n
    z = rng.standard_normal(m)
    w = np.empty(m, dtype=np.complex128)
    w[0] = math.sqrt(lam[0] / m) * z[0]
    w[n] = math.sqrt(lam[n] / m) * z[n]
    half = np.sqrt(lam[1:n] / (2.0 * m))
    w[1:n] = half * (z[1:n] + 1j * z[n + 1 :])
    w[n + 1 :] = np.conj(w[1:n][::-1])
    return np.fft.fft(w).real[:n]


def _fgn_cholesky(n: int, gamma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if n > 4096:
        raise SynthError(
            f"circulant embedding failed and n={n} is too large for the dense fallback"
        )
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    cov = gamma[idx]
    chol = np.linalg.cholesky(cov)
    return chol @ rng.standard_normal(n)


@dataclass(frozen=True)
class CascadeSpec:
    """Multiplicative binomial measure parameters.

    p = 0.5 degenerates to the uniform (monofractal) measure; the seed
    matters only when shuffle is on.
    """

    levels: int
    p: float
    seed: int = 0
    shuffle: bool = False

    def __post_init__(self):
        if self.levels < 4:
            raise SynthError(f"need levels >= 4, got {self.levels}")
        if not (0.0 < self.p < 1.0):
            raise SynthError(f"p must lie in (0,1), got {self.p}")


def binomial_cascade(spec: CascadeSpec) -> np.ndarray:
    """Binomial measure over 2^levels cells; total mass exactly 1.

    Without shuffling, each refinement sends fraction p of a cell's mass
    to its left child; with shuffling the branch order is randomized
    independently per node.
    """
    if not spec.shuffle:
        # closed form: mass depends only on the number of right turns
        idx = np.arange(2 ** spec.levels, dtype=np.uint64)
        ones = np.bitwise_count(idx).astype(np.float64)
        return spec.p ** (spec.levels - ones) * (1.0 - spec.p) ** ones
    rng = np.random.default_rng(spec.seed)
    mass = np.array([1.0])
    for level in range(spec.levels):
        swap = rng.random(mass.size) < 0.5
        left = np.where(swap, 1.0 - spec.p, spec.p)
        nxt = np.empty(2 * mass.size)
        nxt[0::2] = mass * left
        nxt[1::2] = mass * (1.0 - left)
        mass = nxt
    return mass


def analytic_cascade_tau(q, p: float):
    """Closed-form mass exponents of the binomial measure."""
    if not (0.0 < p < 1.0):
        raise SynthError(f"p must lie in (0,1), got {p}")
    q = np.asarray(q, dtype=np.float64)
    out = -np.log2(p ** q + (1.0 - p) ** q)
    return float(out) if out.ndim == 0 else out
