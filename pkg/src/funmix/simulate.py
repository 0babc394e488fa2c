"""Seeded synthetic scenes: Dirichlet mixing with tunable pixel purity,
patch-structured scenes with pure pixels, and exact-SNR Gaussian noise.

Reproducibility contract: all randomness flows from a PCG64 bit generator
seeded through ``numpy.random.SeedSequence``, Gaussian variates are produced
by an explicit Box-Muller transform over PCG64 uniform doubles, and
Dirichlet columns are normalized gamma draws (numpy's documented
Marsaglia-Tsang gamma sampler).  Identical seeds therefore reproduce
identical datasets bit for bit, and the draw pipeline is simple enough to
restate in another language.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import as_matrix

__all__ = [
    "SimulationConfig",
    "DatasetBundle",
    "AcceptanceStallError",
    "sample_purity_abundances",
    "generate_dc1",
    "add_noise_snr",
    "generate_dataset",
]

SeedLike = "int | np.random.SeedSequence | np.random.Generator"


class AcceptanceStallError(RuntimeError):
    """Rejection sampling failed to collect enough columns within the draw budget."""


@dataclass(frozen=True)
class SimulationConfig:
    """Recipe for one synthetic dataset.

    ``kind`` selects the generator: "purity" draws n unstructured pixels at
    a controlled purity level ``rho``; "dc1" lays out a square scene of
    ``n`` pixels per side with pure patches on a mixed background.  ``rho``
    bounds the l2 norm of abundance columns (only meaningful for "purity");
    ``alpha`` is the Dirichlet concentration, defaulting to 1/r.
    ``library_indices`` pins which library atoms act as the true endmembers;
    when None they are drawn from the seeded stream.
    """

    kind: str
    n: int
    r: int
    rho: Optional[float] = None
    alpha: Optional[float] = None
    snr_db: Optional[float] = None
    seed: int = 0
    library_indices: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.kind not in ("purity", "dc1"):
            raise ValueError(f"kind must be 'purity' or 'dc1', got {self.kind!r}")
        if self.n < 1 or self.r < 1:
            raise ValueError(f"n and r must be >= 1, got n={self.n}, r={self.r}")
        if self.kind == "purity":
            if self.rho is None:
                raise ValueError("purity datasets require rho")
            purity_window(self.r, self.rho)  # raises when infeasible
        if self.alpha is not None and not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")


@dataclass
class DatasetBundle:
    """A generated dataset plus its provenance.

    ``Y`` is the (possibly noisy) scene, ``D`` the full library; ``A_true``
    and ``E_true`` are the generating abundances and endmember spectra when
    known.  ``meta`` records dims, SNR, purity, seed, kind, and the chosen
    atom indices.
    """

    Y: np.ndarray
    D: np.ndarray
    A_true: Optional[np.ndarray] = None
    E_true: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller standard normals over PCG64 uniforms.

    Uses u1, u2 ~ U[0, 1) and returns sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2);
    the 1 - u1 form keeps the log argument in (0, 1].  Chosen over numpy's
    ziggurat so the transform is trivially restatable elsewhere.
    """
    total = int(np.prod(shape))
    half = (total + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[:total].reshape(shape)


def purity_window(r: int, rho: float) -> tuple[float, float]:
    """Feasible l2-norm acceptance window (lo, hi] for purity level rho.

    Simplex vectors have l2 norm at least 1/sqrt(r) (uniform column) and at
    most 1 (pure pixel), so the nominal window (rho - 0.1, rho] is clipped
    from below at 1/sqrt(r).  Raises when the window is empty.
    """
    floor = 1.0 / np.sqrt(r)
    if not floor < rho <= 1.0:
        raise ValueError(
            f"rho = {rho} infeasible for r = {r}: simplex columns have "
            f"l2 norm in [{floor:.6f}, 1], so rho must lie in ({floor:.6f}, 1]"
        )
    return max(rho - 0.1, floor), rho


def sample_purity_abundances(r: int, n: int, rho: float,
                             alpha: Optional[float] = None, seed=0,
                             max_draws: int = 10**7) -> np.ndarray:
    """Draw n abundance columns of purity level rho by rejection sampling.

    Candidates are symmetric Dirichlet(alpha, ..., alpha) draws (default
    alpha = 1/r); a candidate is accepted iff its l2 norm falls in the
    clipped window (max(rho - 0.1, 1/sqrt(r)), rho].  Batches are drawn
    until n columns are accepted.

    Raises
    ------
    ValueError
        If the acceptance window is empty (rho <= 1/sqrt(r) or rho > 1).
    AcceptanceStallError
        If more than ``max_draws`` candidates are consumed; the message
        reports the observed acceptance rate.
    """
    if n < 1 or r < 1:
        raise ValueError(f"n and r must be >= 1, got n={n}, r={r}")
    lo, hi = purity_window(r, rho)
    alpha = 1.0 / r if alpha is None else float(alpha)
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    rng = _rng(seed)
    collected: list[np.ndarray] = []
    accepted = 0
    drawn = 0
    while accepted < n:
        batch = min(max(4 * (n - accepted), 1000), 200_000)
        if drawn + batch > max_draws:
            batch = max_draws - drawn
            if batch <= 0:
                rate = accepted / max(drawn, 1)
                raise AcceptanceStallError(
                    f"accepted {accepted}/{n} columns after {drawn} draws "
                    f"(acceptance rate {rate:.2e}); widen the window or raise max_draws"
                )
        g = rng.standard_gamma(alpha, size=(r, batch))
        totals = g.sum(axis=0)
        good = totals > 0.0
        cols = g[:, good] / totals[good]
        norms = np.linalg.norm(cols, axis=0)
        keep = (norms > lo) & (norms <= hi)
        cols = cols[:, keep]
        drawn += batch
        if cols.shape[1]:
            collected.append(cols)
            accepted += cols.shape[1]
    A = np.concatenate(collected, axis=1)[:, :n]
    return np.asfortranarray(A)


def generate_dc1(side: int, r: int, D, atom_indices: Optional[Sequence[int]] = None,
                 seed=0) -> DatasetBundle:
    """Square scene with r rows of pure patches on a uniformly mixed background.

    The side x side grid is divided into r horizontal bands; band k holds a
    row of square patches, evenly spaced, whose pixels are pure in endmember
    k (one-hot abundance).  All remaining pixels are uniform mixtures (1/r
    each), so the scene contains pure pixels for every endmember plus a
    heavily mixed background.  Pixels are flattened row-major: grid cell
    (i, j) becomes column i * side + j.

    The r true endmembers are ``D[:, atom_indices]``; when ``atom_indices``
    is None, r distinct atoms are drawn from the seeded stream.  The
    returned bundle holds the noiseless scene (``Y = E_true @ A_true``); add
    noise separately with :func:`add_noise_snr`.
    """
    D = as_matrix(D, "D")
    m = D.shape[1]
    if not 1 <= r <= m:
        raise ValueError(f"r must satisfy 1 <= r <= m = {m}, got {r}")
    band = side // r
    if band < 2:
        raise ValueError(
            f"side = {side} too small to place {r} patch rows (needs side >= {2 * r})"
        )
    rng = _rng(seed)
    if atom_indices is None:
        atoms = rng.choice(m, size=r, replace=False)
    else:
        atoms = np.asarray(list(atom_indices), dtype=int)
        if atoms.shape != (r,) or len(set(atoms.tolist())) != r:
            raise ValueError(f"atom_indices must be {r} distinct indices, got {atom_indices!r}")
        if atoms.min() < 0 or atoms.max() >= m:
            raise ValueError(f"atom_indices out of range [0, {m}): {atom_indices!r}")

    patch = max(1, band // 2)
    count = max(1, side // (2 * patch))
    gap = (side - count * patch) // (count + 1)
    xs = [gap + i * (patch + gap) for i in range(count)]

    n = side * side
    A = np.full((r, n), 1.0 / r, order="F")
    for k in range(r):
        y0 = k * band + (band - patch) // 2
        for x0 in xs:
            for i in range(y0, y0 + patch):
                cols = i * side + np.arange(x0, x0 + patch)
                A[:, cols] = 0.0
                A[k, cols] = 1.0

    E_true = np.asfortranarray(D[:, atoms])
    Y = E_true @ A
    meta = {
        "kind": "dc1", "p": D.shape[0], "n": n, "m": m, "r": r,
        "snr_db": None, "rho": None, "seed": _seed_repr(seed),
        "atom_indices": [int(a) for a in atoms],
    }
    return DatasetBundle(Y=np.asfortranarray(Y), D=D, A_true=A,
                         E_true=E_true, meta=meta)


def add_noise_snr(Y_clean, snr_db: float, seed=0) -> np.ndarray:
    """Add white Gaussian noise scaled so the realized SNR is exact.

    The noise draw is rescaled so that
    ``10 log10(||Y_clean||_F^2 / ||noise||_F^2)`` equals ``snr_db`` for the
    realized draw (not merely in expectation), which keeps seeded datasets
    exactly at their nominal noise level.
    """
    Y_clean = as_matrix(Y_clean, "Y_clean")
    snr_db = float(snr_db)
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    signal_norm = np.linalg.norm(Y_clean)
    if signal_norm == 0.0:
        raise ValueError("Y_clean is identically zero; SNR is undefined")
    noise = _standard_normal(_rng(seed), Y_clean.shape)
    noise_norm = np.linalg.norm(noise)
    if noise_norm == 0.0:  # zero-measure draw; only conceivable for tiny shapes
        raise RuntimeError("degenerate all-zero noise draw")
    sigma = signal_norm / (noise_norm * 10.0 ** (snr_db / 20.0))
    return np.asfortranarray(Y_clean + sigma * noise)


def generate_dataset(config: SimulationConfig, D) -> DatasetBundle:
    """Produce a full dataset bundle from a config and a library.

    Splits the seed into independent substreams for atom selection, mixing,
    and noise, so e.g. changing the SNR never perturbs the scene itself.
    """
    D = as_matrix(D, "D")
    m = D.shape[1]
    root = np.random.SeedSequence(config.seed)
    seed_atoms, seed_mix, seed_noise = root.spawn(3)

    if config.kind == "dc1":
        bundle = generate_dc1(config.n, config.r, D,
                              atom_indices=config.library_indices, seed=seed_atoms)
    else:
        if config.library_indices is None:
            atoms = _rng(seed_atoms).choice(m, size=config.r, replace=False)
        else:
            atoms = np.asarray(list(config.library_indices), dtype=int)
        A = sample_purity_abundances(config.r, config.n, config.rho,
                                     alpha=config.alpha, seed=seed_mix)
        E_true = np.asfortranarray(D[:, atoms])
        bundle = DatasetBundle(
            Y=np.asfortranarray(E_true @ A), D=D, A_true=A, E_true=E_true,
            meta={"kind": "purity", "p": D.shape[0], "n": config.n, "m": m,
                  "r": config.r, "snr_db": None, "rho": config.rho,
                  "seed": config.seed, "atom_indices": [int(a) for a in atoms]},
        )
    bundle.meta["seed"] = config.seed
    if config.snr_db is not None:
        bundle.Y = add_noise_snr(bundle.Y, config.snr_db, seed=seed_noise)
        bundle.meta["snr_db"] = float(config.snr_db)
    return bundle


def _seed_repr(seed):
    return seed if isinstance(seed, int) else None
