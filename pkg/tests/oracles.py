"""Brute-force reference computations used by several test modules.

Each oracle works from definitions only (explicit matrices, full
enumeration) and shares no code path with the routine it checks.
"""

import itertools

import numpy as np


def explicit_objective(samples, swaps):
    """Tr(H U Q U^T) from dense matrices built from scratch."""
    x = np.array(samples, dtype=float)
    n = x.shape[1]
    q = x.T @ x / len(x)
    u = np.eye(n)
    for i, j in swaps:
        p = np.eye(n)
        p[[i, j]] = p[[j, i]]
        u = p @ u
    c = np.zeros((n, n))
    for i in range(n):
        c[i, (i - 1) % n] = 1.0
    h = 0.5 * (c + c.T)
    return float(np.trace(h @ u @ q @ u.T))


def exhaustive_trajectory_optimum(samples, max_len):
    """Best objective over every swap schedule of length <= max_len."""
    n = len(samples[0])
    pairs = list(itertools.combinations(range(n), 2))
    x = np.array(samples, dtype=float)
    best = -np.inf
    seen = set()
    for length in range(max_len + 1):
        for seq in itertools.product(pairs, repeat=length):
            perm = list(range(n))
            for i, j in seq:
                perm[i], perm[j] = perm[j], perm[i]
            key = tuple(perm)
            if key in seen:
                continue
            seen.add(key)
            y = x[:, perm]
            f = float(np.mean(np.sum(y * np.roll(y, 1, axis=1), axis=1)))
            best = max(best, f)
    return best


def band_tape(rng, n_cells, mean_len, noise=0.0, start=0):
    """Bands with geometric lengths of the given mean, optionally bit-flipped."""
    out = np.empty(n_cells, dtype=np.int8)
    pos, sym = 0, start
    while pos < n_cells:
        length = int(rng.geometric(1.0 / mean_len))
        out[pos : pos + length] = sym
        pos += length
        sym ^= 1
    if noise:
        out ^= (rng.random(n_cells) < noise).astype(np.int8)
    return out
