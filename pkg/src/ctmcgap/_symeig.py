"""Extremal eigenvalues of symmetric matrices after removing one known
eigenvector.

Both the continuous-time gap (second-smallest eigenvalue of a weighted
negative generator) and the discrete-time gap (second-largest eigenvalue of
a weighted kernel) reduce to this: the known vector is the square-root
weight vector, whose eigenvalue is trivial, and the quantity of interest
is the extremal eigenvalue of the orthogonal complement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalFailureError

# Deterministic entropy for the Lanczos start vector.
_START_SEED = 0x5CE17A


@dataclass
class DeflatedEigenResult:
    value: float
    vector: np.ndarray          # unit eigenvector of the full matrix
    residual: float             # ||A v - value v||_2
    iterations: int             # matrix-vector products (0 for direct solves)
    trivial_residual: float     # ||A v0||_2 for smallest mode, see callers
    eigenvalues: np.ndarray | None = None  # full spectrum (dense path only)


def _infnorm(A):
    if sp.issparse(A):
        return float(np.max(np.abs(A).sum(axis=1))) if A.nnz else 0.0
    return float(np.max(np.abs(A).sum(axis=1)))


def _dense(A, v0, largest):
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    w, V = np.linalg.eigh(Ad)
    overlaps = np.abs(V.T @ v0)
    trivial = int(np.argmax(overlaps))
    keep = np.ones(w.size, dtype=bool)
    keep[trivial] = False
    idx = np.nonzero(keep)[0]
    pick = idx[np.argmax(w[idx])] if largest else idx[np.argmin(w[idx])]
    return float(w[pick]), V[:, pick].copy(), w


def _lanczos(A, v0, largest, maxiter, arpack_tol):
    n = v0.size
    # push the known eigenvalue out of the way with a rank-one shift
    shift = 1.1 * _infnorm(A) + 1.0
    sign = -1.0 if largest else 1.0
    counter = {"mv": 0}

    def matvec(x):
        counter["mv"] += 1
        return A @ x + sign * shift * (v0 @ x) * v0

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(_START_SEED)))
    start = rng.standard_normal(n)
    start -= (v0 @ start) * v0
    norm = np.linalg.norm(start)
    if norm < 1e-12:  # essentially impossible; keep a deterministic fallback
        start = np.zeros(n)
        start[0] = 1.0
        start -= (v0 @ start) * v0
        norm = np.linalg.norm(start)
    start /= norm
    try:
        w, V = spla.eigsh(op, k=1, which="LA" if largest else "SA",
                          v0=start, maxiter=maxiter, tol=arpack_tol)
    except spla.ArpackNoConvergence as exc:
        raise NumericalFailureError(
            f"eigensolver did not converge within {maxiter} iterations",
            residual=None) from exc
    return float(w[0]), V[:, 0].copy(), counter["mv"]


def deflated_extremal(A, known_vector, largest, method="auto",
                      dense_cutoff=500, maxiter=None, arpack_tol=0.0):
    """Extremal eigenvalue of symmetric `A` ignoring one known eigenvector.

    Parameters
    ----------
    A : ndarray or sparse matrix, symmetric
    known_vector : ndarray
        Unit vector spanning the eigenspace to exclude.
    largest : bool
        Seek the largest remaining eigenvalue (else the smallest).
    method : {"auto", "dense", "lanczos"}
        "dense" takes the full spectrum and drops the eigenvector with the
        largest overlap with `known_vector`; "lanczos" applies a rank-one
        shift to the known direction and asks an iterative solver for the
        extremal mode of the rest.

    Returns
    -------
    DeflatedEigenResult
    """
    n = known_vector.size
    if method == "auto":
        method = "dense" if n <= dense_cutoff else "lanczos"
    if method not in ("dense", "lanczos"):
        raise ValueError(f"unknown eigensolver method {method!r}")
    v0 = known_vector / np.linalg.norm(known_vector)
    eigenvalues = None
    if method == "dense" or n < 4:  # ARPACK needs k < n-1; tiny n goes dense
        value, vector, eigenvalues = _dense(A, v0, largest)
        iterations = 0
        method = "dense"
    else:
        if maxiter is None:
            maxiter = max(1000, 50 * n)
        value, vector, iterations = _lanczos(A, v0, largest, maxiter, arpack_tol)
    Av = A @ vector
    residual = float(np.linalg.norm(Av - value * vector))
    trivial_residual = float(np.linalg.norm(A @ v0))
    return DeflatedEigenResult(value=value, vector=vector, residual=residual,
                               iterations=iterations,
                               trivial_residual=trivial_residual,
                               eigenvalues=eigenvalues), method
