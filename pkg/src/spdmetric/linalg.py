"""Dense symmetric linear algebra on SPD matrices.

Matrices are plain ``numpy.ndarray`` objects. :func:`as_sym` and
:func:`as_spd` are the admission gates: every public operation routes its
inputs through one of them, so downstream code can assume symmetry (exact,
after ``(A + A.T) / 2``) and strict positive definiteness.

The ``vec`` embedding lists the upper triangle row by row and scales the
off-diagonal entries by ``sqrt(2)`` so that ``||vec(S)||_2 == ||S||_F``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from ._errors import FormatError, NumericalError, RangeError, ShapeError

__all__ = [
    "SPD_RTOL",
    "VEC_CONVENTION",
    "EigDecomp",
    "as_sym",
    "as_spd",
    "is_spd",
    "spd_tol",
    "sym_eig",
    "spd_log",
    "sym_exp",
    "spd_power",
    "cholesky",
    "logdet",
    "vec",
    "unvec",
    "vec_dim",
    "order_from_dim",
    "lie_product",
    "write_matrix",
    "read_matrix",
    "format_matrix",
    "parse_matrix",
]

SPD_RTOL = 1e-10

# Recorded in every model / descriptor file that carries vec() coordinates.
VEC_CONVENTION = {"ordering": "row-major-upper", "offdiag_weight": "sqrt2"}

_LOG_MAX = math.log(np.finfo(np.float64).max)


@dataclass(frozen=True)
class EigDecomp:
    """Eigenvalues in ascending order and orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.T


def _square(A, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ShapeError(f"{name}: expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"{name}: matrix has non-finite entries")
    return A


def as_sym(A, name: str = "matrix") -> np.ndarray:
    """Return the symmetric part ``(A + A.T) / 2`` as a new float array."""
    A = _square(A, name)
    return 0.5 * (A + A.T)


def spd_tol(largest_eig: float, rtol: float = SPD_RTOL) -> float:
    """Admission threshold for the smallest eigenvalue."""
    return rtol * max(1.0, float(largest_eig))


def as_spd(P, name: str = "matrix", rtol: float = SPD_RTOL) -> np.ndarray:
    """Symmetrize ``P`` and check strict positive definiteness.

    Raises
    ------
    NumericalError
        If the smallest eigenvalue does not exceed
        ``rtol * max(1, largest eigenvalue)``.
    """
    S = as_sym(P, name)
    lam = np.linalg.eigvalsh(S)
    if not lam[0] > spd_tol(lam[-1], rtol):
        raise NumericalError(
            f"{name}: not positive definite (min eigenvalue {lam[0]:.3e}, "
            f"max eigenvalue {lam[-1]:.3e})"
        )
    return S


def is_spd(P, rtol: float = SPD_RTOL) -> bool:
    try:
        as_spd(P, rtol=rtol)
    except (NumericalError, ShapeError):
        return False
    return True


def sym_eig(S, name: str = "matrix") -> EigDecomp:
    """Eigendecomposition of a symmetric matrix (LAPACK ``syevd``)."""
    S = as_sym(S, name)
    try:
        lam, U = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{name}: eigendecomposition did not converge") from exc
    return EigDecomp(lam, U)


def _spectral(S, fn, name: str) -> np.ndarray:
    e = sym_eig(S, name)
    U = e.eigenvectors
    out = (U * fn(e.eigenvalues)) @ U.T
    return 0.5 * (out + out.T)


def spd_log(P, name: str = "matrix") -> np.ndarray:
    """Principal matrix logarithm of an SPD matrix."""
    P = as_spd(P, name)
    return _spectral(P, np.log, name)


def sym_exp(S, name: str = "matrix") -> np.ndarray:
    """Matrix exponential of a symmetric matrix; the result is SPD."""
    e = sym_eig(S, name)
    if e.eigenvalues[-1] > _LOG_MAX:
        raise RangeError(f"{name}: exponential overflows (eigenvalue {e.eigenvalues[-1]:.6g})")
    U = e.eigenvectors
    out = (U * np.exp(e.eigenvalues)) @ U.T
    return 0.5 * (out + out.T)


def spd_power(P, p: float, name: str = "matrix") -> np.ndarray:
    """``P**p`` through the eigendecomposition, e.g. ``p=-0.5`` for the inverse square root."""
    P = as_spd(P, name)
    return _spectral(P, lambda lam: lam ** p, name)


def cholesky(P, name: str = "matrix") -> np.ndarray:
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T == P``."""
    P = as_spd(P, name)
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{name}: non-positive pivot in Cholesky factorization") from exc


def logdet(P, name: str = "matrix") -> float:
    """``ln det P`` from the Cholesky diagonal."""
    L = cholesky(P, name)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def vec_dim(n: int) -> int:
    return n * (n + 1) // 2


def order_from_dim(d: int) -> int:
    """Inverse of :func:`vec_dim`; raises if ``d`` is not triangular."""
    n = (math.isqrt(8 * d + 1) - 1) // 2
    if d <= 0 or vec_dim(n) != d:
        raise ShapeError(f"length {d} is not n(n+1)/2 for any order n")
    return n


def _weights(n: int) -> tuple[tuple[np.ndarray, np.ndarray], np.ndarray]:
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return iu, w


def vec(S) -> np.ndarray:
    """Row-major upper triangle of ``S`` with off-diagonals scaled by sqrt(2)."""
    S = as_sym(S)
    iu, w = _weights(S.shape[0])
    return S[iu] * w


def unvec(v, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got shape {v.shape}")
    d = v.shape[0]
    if n is None:
        n = order_from_dim(d)
    elif vec_dim(n) != d:
        raise ShapeError(f"vector of length {d} does not match order {n} (needs {vec_dim(n)})")
    iu, w = _weights(n)
    S = np.zeros((n, n))
    S[iu] = v / w
    S.T[iu] = v / w
    return S


def lie_product(P1, P2) -> np.ndarray:
    """``exp(log P1 + log P2)``: the commutative group product on SPD matrices."""
    P1 = as_spd(P1, "P1")
    P2 = as_spd(P2, "P2")
    if P1.shape != P2.shape:
        raise ShapeError(f"order mismatch: {P1.shape[0]} vs {P2.shape[0]}")
    return sym_exp(spd_log(P1) + spd_log(P2))


# -- matrix text format -----------------------------------------------------

def format_matrix(A) -> str:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    lines = [str(A.shape[0])]
    lines.extend(" ".join(format(float(x), ".17g") for x in row) for row in A)
    return "\n".join(lines) + "\n"


def write_matrix(A, fh: TextIO) -> None:
    fh.write(format_matrix(A))


def _read_rows(lines: Iterable[str], what: str) -> np.ndarray:
    it = iter(lines)
    try:
        header = next(it).strip()
    except StopIteration:
        raise FormatError(f"{what}: empty input") from None
    try:
        n = int(header)
    except ValueError:
        raise FormatError(f"{what}: expected the order n on the first line, got {header!r}") from None
    if n <= 0:
        raise FormatError(f"{what}: order must be positive, got {n}")
    rows = []
    for r in range(n):
        try:
            line = next(it)
        except StopIteration:
            raise FormatError(f"{what}: expected {n} rows, got {r}") from None
        try:
            vals = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise FormatError(f"{what}: row {r}: {exc}") from None
        if len(vals) != n:
            raise FormatError(f"{what}: row {r} has {len(vals)} values, expected {n}")
        rows.append(vals)
    return np.array(rows, dtype=np.float64)


def read_matrix(fh: TextIO, what: str = "matrix") -> np.ndarray:
    """Read one matrix in the text format written by :func:`write_matrix`."""
    lines = (ln for ln in fh if ln.strip())
    return _read_rows(lines, what)


def parse_matrix(text: str, what: str = "matrix") -> np.ndarray:
    return read_matrix(io.StringIO(text), what)
