"""Kraus channels, selective measurements, and incoherent-operation checks."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

COMPLETENESS_TOL = 1e-9
INCOHERENCE_TOL = 1e-10
P_MIN = 1e-12


class NotIncoherentChannelError(ValueError):
    """Channel fails the incoherent-operation structure test."""


@dataclass(frozen=True)
class KrausChannel:
    """Trace-preserving channel given by square Kraus operators on one dimension.

    The completeness sum of the operators must be the identity within 1e-9;
    construction fails otherwise. Operators are stored read-only.
    """

    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        d = ops[0].shape[0] if ops[0].ndim == 2 else -1
        for k in ops:
            if k.ndim != 2 or k.shape != (d, d):
                raise ValueError(f"Kraus operators must share one square shape, got {k.shape}")
            if not np.all(np.isfinite(k.view(float))):
                raise ValueError("Kraus entries must be finite")
            k.setflags(write=False)
        complete = sum(k.conj().T @ k for k in ops)
        deviation = float(np.max(np.abs(complete - np.eye(d))))
        if deviation > COMPLETENESS_TOL:
            raise ValueError(
                f"completeness violated: max |sum K^dag K - I| = {deviation:.3e}"
            )
        object.__setattr__(self, "kraus", ops)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def n_kraus(self) -> int:
        return len(self.kraus)


@dataclass(frozen=True)
class SelectiveOutcome:
    """One post-selected measurement branch: index, probability, normalized state."""

    index: int
    prob: float
    post_state: np.ndarray = field(repr=False)


def apply_channel(ch: KrausChannel, rho) -> np.ndarray:
    """Deterministic (non-selective) action sum_n K_n rho K_n†."""
    mat = np.asarray(rho, dtype=complex)
    out = np.zeros_like(mat)
    for k in ch.kraus:
        out += k @ mat @ k.conj().T
    return out


def select(
    ch: KrausChannel, rho, p_min: float = P_MIN
) -> tuple[list[SelectiveOutcome], float]:
    """Selective measurement outcomes (prob, normalized post-state) plus dropped mass.

    Outcomes with probability below `p_min` are dropped, never normalized
    (dividing by a vanishing probability only amplifies noise); their total
    probability is returned so callers can account for it.
    """
    mat = np.asarray(rho, dtype=complex)
    outcomes: list[SelectiveOutcome] = []
    dropped = 0.0
    for index, k in enumerate(ch.kraus):
        unnormalized = k @ mat @ k.conj().T
        prob = float(unnormalized.trace().real)
        if prob < p_min:
            dropped += max(prob, 0.0)
            continue
        outcomes.append(SelectiveOutcome(index, prob, unnormalized / prob))
    return outcomes, dropped


def is_incoherent(ch: KrausChannel, tol: float = INCOHERENCE_TOL) -> bool:
    """True when every Kraus operator has at most one entry per column above `tol`.

    That column structure maps diagonal states to diagonal states branch by
    branch, which is the defining property of an incoherent operation.
    """
    for k in ch.kraus:
        if np.any((np.abs(k) > tol).sum(axis=0) > 1):
            return False
    return True


def dephasing_channel(d: int) -> KrausChannel:
    """Projective measurement in the fixed basis: K_i = |i><i|."""
    eye = np.eye(d, dtype=complex)
    return KrausChannel(tuple(np.outer(eye[i], eye[i]) for i in range(d)))


def random_incoherent_channel(d: int, n_kraus: int, rng: np.random.Generator) -> KrausChannel:
    """Random incoherent channel, complete by construction.

    For each input column j: Dirichlet weights w_nj over the operators,
    uniform phases, and a target row f_n(j) drawn independently per (n, j),
    so one operator may merge several columns into one row. Each merge makes
    sum_n K_n^dag K_n pick up an off-diagonal cross term, so the amplitude
    vector of every column is projected against the merge-masked vectors of
    the earlier columns before use; the cross terms then cancel exactly and
    the unit column norms give completeness with no repair step.

    A projection can annihilate a column (the constraints admit no solution
    for that row draw, certain with one operator and a merge); such draws
    are rejected and redrawn. One operator therefore always comes out as a
    permutation with phases.
    """
    if d < 1 or n_kraus < 1:
        raise ValueError(f"need d >= 1 and n_kraus >= 1, got d={d}, n_kraus={n_kraus}")
    for _ in range(128):
        rows = rng.integers(0, d, size=(n_kraus, d))
        weights = rng.dirichlet(np.ones(n_kraus), size=d).T  # (n_kraus, d), columns sum to 1
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_kraus, d))
        amplitudes = np.sqrt(weights) * np.exp(1j * phases)
        columns = _cancel_merge_terms(rows, amplitudes)
        if columns is None:
            continue
        ops = np.zeros((n_kraus, d, d), dtype=complex)
        for j in range(d):
            ops[np.arange(n_kraus), rows[:, j], j] = columns[j]
        return KrausChannel(tuple(ops))
    raise ValueError(
        f"no complete incoherent channel found for d={d}, n_kraus={n_kraus} after 128 draws"
    )


def _cancel_merge_terms(rows: np.ndarray, amplitudes: np.ndarray):
    """Orthogonalize column amplitude vectors against merge-masked predecessors.

    Returns the list of unit column vectors, or None when a projection wipes
    a column out (norm below 1e-6; the row draw is infeasible).
    """
    n_kraus, d = rows.shape
    columns: list[np.ndarray] = []
    for j in range(d):
        vec = amplitudes[:, j].copy()
        constraints = []
        for k in range(j):
            mask = rows[:, k] == rows[:, j]
            if mask.any():
                constraints.append(np.where(mask, columns[k], 0.0))
        if constraints:
            # cross term (k, j) is vdot(masked column k, column j); project onto
            # the orthogonal complement of the span of those masked vectors
            basis, _ = np.linalg.qr(np.array(constraints).T)
            vec = vec - basis @ (basis.conj().T @ vec)
        norm = np.linalg.norm(vec)
        if norm < 1e-6:
            return None
        columns.append(vec / norm)
    return columns


def random_channel(d: int, n_kraus: int, rng: np.random.Generator) -> KrausChannel:
    """Arbitrary random channel: d-column blocks of a Haar unitary on d * n_kraus.

    The stacked blocks form an isometry, so completeness is inherited from
    unitarity rather than repaired after the fact.
    """
    if d < 1 or n_kraus < 1:
        raise ValueError(f"need d >= 1 and n_kraus >= 1, got d={d}, n_kraus={n_kraus}")
    from .states import haar_unitary

    big = haar_unitary(d * n_kraus, rng)
    isometry = big[:, :d]
    return KrausChannel(tuple(isometry[i * d : (i + 1) * d, :] for i in range(n_kraus)))


def save_channel(path: str | os.PathLike, ch: KrausChannel) -> None:
    """Write a channel file: {"d": d, "kraus": [[[re, im], ...], ...]} row-major."""
    payload = {
        "d": ch.dim,
        "kraus": [
            [[float(z.real), float(z.imag)] for z in k.reshape(-1)] for k in ch.kraus
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_channel(path: str | os.PathLike) -> KrausChannel:
    """Read a channel file; completeness is enforced by the KrausChannel constructor."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or "d" not in payload or "kraus" not in payload:
        raise ValueError(f"{path}: channel file needs 'd' and 'kraus' keys")
    d = int(payload["d"])
    ops = []
    for i, flat in enumerate(payload["kraus"]):
        if len(flat) != d * d:
            raise ValueError(
                f"{path}: operator {i} has {len(flat)} entries, expected {d * d}"
            )
        ops.append(np.array([complex(re, im) for re, im in flat]).reshape(d, d))
    try:
        return KrausChannel(tuple(ops))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
