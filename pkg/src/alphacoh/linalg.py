"""Dense Hermitian linear algebra: spectral decompositions and fractional powers.

Everything here works on plain complex ndarrays and is sized for the small
dense matrices this package cares about (dimension <= 16 or so). Fractional
powers follow the conventions needed by the divergence layer: eigenvalues
within the clamp window are treated as exact zeros, 0**p = 0 for p >= 0, and
a negative power of a singular matrix is reported through the `DIVERGENT`
sentinel rather than an exception, so minimizers can treat it as a valid
worst-case candidate.
"""

from __future__ import annotations

from typing import NamedTuple, Union

import numpy as np

HERMITICITY_TOL = 1e-10
EIGENVALUE_CLAMP = 1e-12


class DimMismatchError(ValueError):
    """Operands do not share the required square shape."""


class NotHermitianError(ValueError):
    """Matrix is not Hermitian within tolerance."""


class NegativeEigenvalueError(ValueError):
    """Matrix has an eigenvalue below the negativity clamp."""


class _DivergentType:
    """Singleton marker for a divergent matrix power (negative power of a singular matrix)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Divergent"

    def __bool__(self) -> bool:
        return False


DIVERGENT = _DivergentType()

MatrixPower = Union[np.ndarray, _DivergentType]


class Spectrum(NamedTuple):
    """Eigendecomposition of a Hermitian matrix: ascending eigenvalues, eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_square_matrix(mat, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D square complex array with finite entries."""
    arr = np.asarray(mat, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimMismatchError(f"{name}: expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(float))):
        raise ValueError(f"{name}: entries must be finite")
    return arr


def max_asymmetry(mat: np.ndarray) -> float:
    """Largest entrywise deviation from Hermiticity, max |M - M†|."""
    return float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0


def spectral_decompose(h, hermiticity_tol: float = HERMITICITY_TOL) -> Spectrum:
    """Eigendecompose a Hermitian matrix.

    Eigenvalues come back ascending (LAPACK order); any eigenvalue with
    |lam| < 1e-12 is clamped to exactly 0 so that downstream power and
    support logic never sees denormal noise as rank.

    Raises NotHermitianError when max |H - H†| exceeds `hermiticity_tol`,
    reporting the offending deviation.
    """
    mat = as_square_matrix(h)
    asym = max_asymmetry(mat)
    if asym > hermiticity_tol:
        raise NotHermitianError(
            f"not Hermitian: max |H - H^dag| = {asym:.3e} exceeds {hermiticity_tol:.1e}"
        )
    eigenvalues, eigenvectors = np.linalg.eigh(mat)
    eigenvalues = eigenvalues.copy()
    eigenvalues[np.abs(eigenvalues) < EIGENVALUE_CLAMP] = 0.0
    return Spectrum(eigenvalues, eigenvectors)


def clamped_eigenvalues(h, hermiticity_tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Ascending eigenvalues with the same zero clamp as spectral_decompose."""
    mat = as_square_matrix(h)
    asym = max_asymmetry(mat)
    if asym > hermiticity_tol:
        raise NotHermitianError(
            f"not Hermitian: max |H - H^dag| = {asym:.3e} exceeds {hermiticity_tol:.1e}"
        )
    eigenvalues = np.linalg.eigvalsh(mat)
    eigenvalues[np.abs(eigenvalues) < EIGENVALUE_CLAMP] = 0.0
    return eigenvalues


def powered_eigenvalues(eigenvalues: np.ndarray, p: float) -> np.ndarray:
    """Elementwise lam**p with the 0**p = 0 convention (also at p = 0, keeping rank)."""
    out = np.zeros_like(eigenvalues)
    positive = eigenvalues > 0
    out[positive] = eigenvalues[positive] ** p
    return out


def matrix_power(h, p: float) -> MatrixPower:
    """Fractional power of a positive semidefinite Hermitian matrix.

    Parameters
    ----------
    h : array_like
        Hermitian PSD matrix (eigenvalues >= -1e-12; small negatives are clamped to 0).
    p : float
        Exponent. 0**p = 0 for p >= 0, so H**0 is the support projector.

    Returns
    -------
    ndarray, or DIVERGENT when p < 0 and a clamped-zero eigenvalue is present.
    """
    eigenvalues, eigenvectors = spectral_decompose(h)
    if eigenvalues[0] < 0.0:
        raise NegativeEigenvalueError(
            f"eigenvalue {eigenvalues[0]:.3e} below -{EIGENVALUE_CLAMP:.0e}; matrix is not PSD"
        )
    if p < 0 and np.any(eigenvalues == 0.0):
        return DIVERGENT
    powered = powered_eigenvalues(eigenvalues, p)
    return (eigenvectors * powered) @ eigenvectors.conj().T


def trace_product(a, b) -> complex:
    """Tr(A B) without forming the product matrix: sum_ij A_ij B_ji."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatchError(f"trace_product: incompatible shapes {a.shape} and {b.shape}")
    return complex(np.einsum("ij,ji->", a, b))
