"""Dense complex linear algebra kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128`` with shape
``(n, n)``; :func:`as_matrix` is the single gate that enforces the square and
finite invariants.  Everything here is a pure function of its inputs.
"""

from dataclasses import dataclass
import math
import os

import numpy as np

from .errors import (
    Defective,
    MatrixFileMissing,
    MatrixOverflow,
    NoConvergence,
    SingularMatrix,
)

TOL_SOLVE = 1e-12
PIVOT_RTOL = 1e-14
EXP_SCALE_TARGET = 0.5
EXP_TERMS = 18
DEFECTIVE_COND = 1e12


def as_matrix(a, name="matrix"):
    """Coerce ``a`` to a finite square complex matrix (copying only if needed)."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise ValueError(f"{name} must have positive dimension")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def identity(n):
    return np.eye(n, dtype=np.complex128)


def opnorm(a):
    """Operator (spectral) 2-norm."""
    a = np.asarray(a)
    if a.shape == (1, 1):
        return float(abs(a[0, 0]))
    return float(np.linalg.svd(a, compute_uv=False)[0])


def frobenius(a):
    return float(np.linalg.norm(a, "fro"))


def commutator(a, b):
    return a @ b - b @ a


def commutes(a, b, rtol=1e-10):
    """True when ``||[a, b]|| <= rtol * ||a|| * ||b||``."""
    bound = rtol * opnorm(a) * opnorm(b)
    return opnorm(commutator(a, b)) <= bound


def matrices_close(a, b, tol):
    """Elementwise comparison within an absolute tolerance."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= tol))


# --------------------------------------------------------------------------
# LU with partial pivoting, batched over leading axes
# --------------------------------------------------------------------------

def lu_factor(a):
    """Factor ``P a = L U`` for a stack of square matrices.

    Returns ``(lu, perm)`` with ``lu`` of shape ``(m, n, n)`` holding the unit
    lower factor below the diagonal and ``U`` on and above it, and ``perm`` the
    row permutation for each of the ``m`` stacked matrices.

    Raises SingularMatrix when any pivot magnitude is at or below
    ``PIVOT_RTOL * ||a||_F`` of its own matrix.
    """
    a = np.array(a, dtype=np.complex128)
    n = a.shape[-1]
    lu = a.reshape(-1, n, n)
    m = lu.shape[0]
    rows = np.arange(m)
    perm = np.tile(np.arange(n), (m, 1))
    threshold = PIVOT_RTOL * np.linalg.norm(lu, axis=(1, 2))

    for k in range(n):
        p = k + np.argmax(np.abs(lu[:, k:, k]), axis=1)
        swap = p != k
        if np.any(swap):
            r = rows[swap]
            pk = p[swap]
            row_k = lu[r, k, :].copy()
            lu[r, k, :] = lu[r, pk, :]
            lu[r, pk, :] = row_k
            perm_k = perm[r, k].copy()
            perm[r, k] = perm[r, pk]
            perm[r, pk] = perm_k
        pivot = lu[:, k, k]
        bad = np.abs(pivot) <= threshold
        if np.any(bad):
            raise SingularMatrix(
                f"pivot {np.abs(pivot[bad]).min():.3e} below threshold at column {k}"
            )
        if k + 1 < n:
            lu[:, k + 1:, k] /= pivot[:, None]
            lu[:, k + 1:, k + 1:] -= lu[:, k + 1:, k, None] * lu[:, k, None, k + 1:]
    return lu, perm


def lu_solve(factors, b):
    """Solve with factors from :func:`lu_factor`; ``b`` is ``(n, r)`` (shared)
    or ``(m, n, r)`` (one right-hand side block per stacked matrix)."""
    lu, perm = factors
    m, n, _ = lu.shape
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim == 2:
        b = np.broadcast_to(b, (m,) + b.shape)
    rows = np.arange(m)[:, None]
    y = b[rows, perm, :].copy()
    for i in range(1, n):
        y[:, i, :] -= (lu[:, i:i + 1, :i] @ y[:, :i, :])[:, 0, :]
    x = y
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            x[:, i, :] -= (lu[:, i:i + 1, i + 1:] @ x[:, i + 1:, :])[:, 0, :]
        x[:, i, :] /= lu[:, i, i, None]
    return x


def solve_linear(a, b):
    """Solve ``a X = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a matrix or a vector.  Raises SingularMatrix on a tiny pivot.
    """
    a = as_matrix(a, "A")
    b = np.asarray(b, dtype=np.complex128)
    vector = b.ndim == 1
    rhs = b[:, None] if vector else b
    if rhs.shape[0] != a.shape[0]:
        raise ValueError(f"dimension mismatch: A is {a.shape}, B is {b.shape}")
    x = lu_solve(lu_factor(a), rhs)[0]
    return x[:, 0] if vector else x


def inverse(a):
    a = as_matrix(a)
    return solve_linear(a, identity(a.shape[0]))


# --------------------------------------------------------------------------
# Matrix exponential
# --------------------------------------------------------------------------

def matrix_exp(a):
    """``e^a`` by scaling and squaring of a truncated Taylor series.

    The matrix is scaled by ``2**-s`` until its Frobenius norm is at most 0.5,
    the 18-term series is summed in Horner form, then squared ``s`` times.
    """
    a = as_matrix(a)
    n = a.shape[0]
    eye = identity(n)
    nrm = frobenius(a)
    s = 0
    if nrm > EXP_SCALE_TARGET:
        s = int(math.ceil(math.log2(nrm / EXP_SCALE_TARGET)))
    x = a / (2.0 ** s)
    e = eye.copy()
    for k in range(EXP_TERMS, 0, -1):
        e = eye + (x @ e) / k
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            e = e @ e
            if not np.all(np.isfinite(e)):
                raise MatrixOverflow(f"exp overflows for ||A||_F = {nrm:.3e}")
    return e


# --------------------------------------------------------------------------
# Eigendecomposition oracle
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray
    condition: float

    def apply(self, f):
        """``V f(diag(values)) V^-1``, the spectral-oracle matrix function."""
        fv = np.asarray(f(self.values), dtype=np.complex128)
        # V diag(fv) V^-1 == solve(V^T, (V diag(fv))^T)^T
        return np.linalg.solve(self.vectors.T, (self.vectors * fv).T).T


def eig_oracle(a, allow_defective=False):
    """Full complex eigendecomposition via LAPACK (shifted QR).

    Raises Defective when the eigenvector matrix condition number exceeds
    ``DEFECTIVE_COND`` (unless ``allow_defective``) and NoConvergence when
    the QR iteration fails.
    """
    a = as_matrix(a)
    try:
        values, vectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    cond = float(np.linalg.cond(vectors))
    if not np.isfinite(cond):
        cond = math.inf
    if cond > DEFECTIVE_COND and not allow_defective:
        raise Defective(f"eigenvector matrix condition {cond:.3e}")
    return EigenDecomposition(values.astype(np.complex128), vectors, cond)


def eigenvalues(a):
    """Eigenvalues only; never raises Defective."""
    try:
        return np.linalg.eigvals(as_matrix(a)).astype(np.complex128)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc


# --------------------------------------------------------------------------
# Text format: "n" then n rows of n "re,im" pairs
# --------------------------------------------------------------------------

def format_matrix(a):
    a = as_matrix(a)
    lines = [str(a.shape[0])]
    for row in a:
        lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    n = int(lines[0])
    if len(lines) != n + 1:
        raise ValueError(f"expected {n} rows, found {len(lines) - 1}")
    out = np.empty((n, n), dtype=np.complex128)
    for i, line in enumerate(lines[1:]):
        pairs = line.split()
        if len(pairs) != n:
            raise ValueError(f"row {i} has {len(pairs)} entries, expected {n}")
        for j, pair in enumerate(pairs):
            re, im = pair.split(",")
            out[i, j] = complex(float(re), float(im))
    return as_matrix(out)


def write_matrix(path, a):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_matrix(a))


def read_matrix(path):
    if not os.path.exists(path):
        raise MatrixFileMissing(path)
    with open(path, encoding="utf-8") as fh:
        return parse_matrix(fh.read())
