"""Shared fixtures-in-code: synthetic spectra and endmember alignment."""

import itertools

import numpy as np

from funmix.metrics import prune_library, spectral_angle


def synth_library(p, m, seed, floor=0.05):
    """Smooth nonnegative reflectance-like spectra (sums of Gaussian bumps),
    normalized to peak 1, one atom per column."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, p)
    D = np.empty((p, m))
    for j in range(m):
        k = rng.integers(2, 6)
        centers = rng.uniform(0.0, 1.0, k)
        widths = rng.uniform(0.05, 0.3, k)
        amps = rng.uniform(0.2, 1.0, k)
        bumps = amps[None, :] * np.exp(
            -0.5 * ((grid[:, None] - centers[None, :]) / widths[None, :]) ** 2
        )
        D[:, j] = bumps.sum(axis=1) + floor
    return D / D.max(axis=0, keepdims=True)


def pruned_library(p, m, seed, min_angle_deg=4.44):
    """A library of exactly m atoms whose pairwise angles all clear the floor."""
    D = synth_library(p, m + 8, seed)
    kept = prune_library(D, min_angle_deg).D_pruned
    if kept.shape[1] < m:
        raise RuntimeError(f"seed {seed} yields only {kept.shape[1]} separated atoms")
    return np.asfortranarray(kept[:, :m])


def align_endmembers(E_ref, E_hat):
    """Slot permutation matching estimated endmembers to reference ones.

    The joint factorization recovers endmember slots in arbitrary order, so
    abundance comparisons must first fix the correspondence.  Minimizes the
    total spectral angle over all permutations (r is small); the choice uses
    only the spectra, never the abundances being scored.
    """
    r = E_ref.shape[1]
    best_total, best_perm = np.inf, None
    for perm in itertools.permutations(range(r)):
        total = sum(spectral_angle(E_ref[:, k], E_hat[:, perm[k]]) for k in range(r))
        if total < best_total:
            best_total, best_perm = total, perm
    return list(best_perm)
