"""Density matrices, probability vectors, and seeded random generation.

States are plain complex ndarrays and probability vectors are plain float
ndarrays; the validators below are the type gates, applied at construction
boundaries (file loads, user input) rather than inside hot loops. Generators
are deterministic functions of a `numpy.random.Generator`, and per-trial
substreams come from `SeedSequence` spawn keys so a master seed reproduces
every draw regardless of execution order.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .linalg import (
    HERMITICITY_TOL,
    as_square_matrix,
    clamped_eigenvalues,
    max_asymmetry,
)

TRACE_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-12
PROB_SUM_TOL = 1e-12
RANK_TOL = 1e-10


class BadRankError(ValueError):
    """Requested rank outside 1..dim."""


def validate_density(rho, name: str = "state") -> np.ndarray:
    """Check the density-matrix invariants and return the coerced array.

    Invariants, each reported by name on failure: square and finite,
    Hermitian within 1e-10, eigenvalues >= -1e-12, trace within 1e-10 of 1.
    """
    mat = as_square_matrix(rho, name=name)
    asym = max_asymmetry(mat)
    if asym > HERMITICITY_TOL:
        raise ValueError(f"{name}: hermiticity violated, max |M - M^dag| = {asym:.3e}")
    eigenvalues = np.linalg.eigvalsh(mat)
    if eigenvalues[0] < EIGENVALUE_FLOOR:
        raise ValueError(f"{name}: positivity violated, lowest eigenvalue {eigenvalues[0]:.3e}")
    trace = mat.trace()
    if abs(trace - 1.0) > TRACE_TOL:
        raise ValueError(f"{name}: trace violated, Tr = {trace:.12g}")
    return mat


def validate_probability_vector(p, name: str = "distribution") -> np.ndarray:
    """Check nonnegativity and unit sum (within 1e-12); returns the coerced array."""
    vec = np.asarray(p, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"{name}: expected a nonempty 1-D vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name}: entries must be finite")
    if vec.min() < 0.0:
        raise ValueError(f"{name}: nonnegativity violated, min entry {vec.min():.3e}")
    total = vec.sum()
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"{name}: normalization violated, sum = {total:.15g}")
    return vec


def embed_diagonal(probs) -> np.ndarray:
    """Diagonal density matrix carrying the given probability vector."""
    vec = validate_probability_vector(probs)
    return np.diag(vec).astype(complex)


def dephase(rho) -> np.ndarray:
    """Diagonal of a state in the fixed basis, as a probability vector.

    Tiny negatives are clamped to 0 and the vector is renormalized, so
    round-off on a valid input state never leaks past the 1e-12 sum gate.
    """
    mat = np.asarray(rho, dtype=complex)
    diag = np.clip(np.diag(mat).real, 0.0, None)
    return diag / diag.sum()


def maximally_coherent(d: int, phases=None) -> np.ndarray:
    """Pure state with all basis populations 1/d and free phases.

    Parameters
    ----------
    d : int
        Dimension, >= 1.
    phases : array_like of float, optional
        One phase per amplitude; defaults to all zeros.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if phases is None:
        phases = np.zeros(d)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (d,):
        raise ValueError(f"expected {d} phases, got shape {phases.shape}")
    amplitudes = np.exp(1j * phases) / np.sqrt(d)
    return np.outer(amplitudes, amplitudes.conj())


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent child stream for (master seed, key...).

    SeedSequence spawn keys give the splittable-stream behavior the
    reproducibility contract needs: the stream for a given key is the same
    no matter how many other streams were opened or in what order.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def random_density(d: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Random density matrix of the given rank (normalized Ginibre product G G†).

    Exactly `d - rank` eigenvalues are zero up to round-off.
    """
    if not 1 <= rank <= d:
        raise BadRankError(f"rank must lie in 1..{d}, got {rank}")
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    mat = g @ g.conj().T
    return mat / mat.trace().real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state (normalized complex Gaussian amplitudes)."""
    amps = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    amps /= np.linalg.norm(amps)
    return np.outer(amps, amps.conj())


def random_incoherent(d: int, rng: np.random.Generator) -> np.ndarray:
    """Random diagonal state with flat-Dirichlet populations."""
    return np.diag(rng.dirichlet(np.ones(d))).astype(complex)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix.

    The R diagonal phases are divided out; without that fix the QR
    convention skews the distribution away from Haar.
    """
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def rank_of(rho, tol: float = RANK_TOL) -> int:
    """Number of eigenvalues above `tol`."""
    return int(np.sum(np.linalg.eigvalsh(np.asarray(rho, dtype=complex)) > tol))


def save_state(path: str | os.PathLike, rho) -> None:
    """Write a state file: {"dim": d, "entries": [[re, im], ...]} in row-major order."""
    mat = np.asarray(rho, dtype=complex)
    d = mat.shape[0]
    entries = [[float(z.real), float(z.imag)] for z in mat.reshape(-1)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"dim": d, "entries": entries}, fh)
        fh.write("\n")


def load_state(path: str | os.PathLike) -> np.ndarray:
    """Read and validate a state file written by save_state."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or "dim" not in payload or "entries" not in payload:
        raise ValueError(f"{path}: state file needs 'dim' and 'entries' keys")
    d = int(payload["dim"])
    entries = payload["entries"]
    if d < 1 or len(entries) != d * d:
        raise ValueError(f"{path}: expected {d * d} entries for dim {d}, got {len(entries)}")
    flat = np.array([complex(re, im) for re, im in entries])
    return validate_density(flat.reshape(d, d), name=str(path))
