"""Spectral gaps of continuous-time chains, Dirichlet forms, and
complementary lower bounds (birth-death weights, drift certificates).

The gap of a chain with generator `Q` and stationary law `pi` is the
smallest nonzero eigenvalue of the negative additive reversibilization
``-(Q + Qhat)/2``, computed through the similarity transform that makes it
symmetric: ``S[i, j] = sqrt(pi[i]/pi[j]) * Qbar[i, j]``.  The square-root
weight vector is the eigenvector of the trivial zero mode and is deflated
explicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._symeig import deflated_extremal
from .errors import InvalidInputError, NumericalFailureError
from .generator import (GeneratorMatrix, StationaryDistribution, _as_probs,
                        additive_symmetrization, stationary_distribution)

DENSE_EIG_CUTOFF = 500


@dataclass
class SpectralReport:
    """Result of a spectral-gap computation.

    Attributes
    ----------
    gap : float
        Smallest nonzero eigenvalue of the negative reversibilized generator.
    method : str
        "dense", "lanczos", or "closed_form".
    residual : float
        Eigenpair residual ``||(-S) v - gap * v||_2`` (0 for closed form).
    iterations : int
        Matrix-vector products spent by the iterative solver (0 for direct).
    eigenvector : ndarray or None
        Gap-achieving function `f` on states, normalized to unit pi-norm
        with ``pi(f) = 0``; its Rayleigh quotient equals `gap`.
    trivial_residual : float
        ``||(-S) sqrt(pi)||_2``, a stationarity cross-check on the inputs.
    eigenvalues : ndarray or None
        Full spectrum of ``-S`` in ascending order (dense method only).
    degenerate : bool
        True for a single-state chain, where the gap is vacuous (+inf).
    """

    gap: float
    method: str
    residual: float
    iterations: int
    eigenvector: np.ndarray | None = None
    trivial_residual: float = 0.0
    eigenvalues: np.ndarray | None = None
    degenerate: bool = False

    def to_dict(self):
        return {"gap": float(self.gap), "method": self.method,
                "residual": float(self.residual),
                "iterations": int(self.iterations)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def symmetrized_form(Q, pi):
    """Symmetric matrix ``S = D Qbar D^-1`` with ``D = diag(sqrt(pi))``.

    `Qbar` is the additive reversibilization; the result is symmetrized to
    working precision and returned dense (or sparse when `Q` is large),
    together with the unit vector ``sqrt(pi)``.
    """
    p = _as_probs(pi, Q.n)
    if np.any(p <= 0):
        raise InvalidInputError("weights must be strictly positive")
    Qbar = additive_symmetrization(Q, p)
    sq = np.sqrt(p)
    if Q.n <= DENSE_EIG_CUTOFF:
        S = Qbar.to_dense() * (sq[:, None] / sq[None, :])
        S = 0.5 * (S + S.T)
    else:
        S = Qbar.matrix.multiply(sq[:, None]).multiply(1.0 / sq[None, :]).tocsr()
        S = ((S + S.T) * 0.5).tocsr()
    return S, sq


def spectral_gap(Q, pi=None, method="auto", residual_rtol=1e-10,
                 maxiter=None):
    """Spectral gap of a continuous-time chain.

    Parameters
    ----------
    Q : GeneratorMatrix
        Admissible generator.
    pi : StationaryDistribution or array, optional
        Stationary law; solved from `Q` when omitted.
    method : {"auto", "dense", "lanczos"}
        "auto" is dense up to 500 states, iterative beyond.
    residual_rtol : float
        The eigenpair residual must not exceed this times the infinity norm
        of the symmetrized matrix.

    Returns
    -------
    SpectralReport

    Raises
    ------
    NumericalFailureError
        On eigensolver non-convergence or an out-of-tolerance residual.
    """
    if Q.n == 1:
        return SpectralReport(gap=math.inf, method="dense", residual=0.0,
                              iterations=0, eigenvector=None,
                              trivial_residual=0.0, degenerate=True)
    p = _as_probs(pi, Q.n) if pi is not None else \
        stationary_distribution(Q).probs
    S, sq = symmetrized_form(Q, p)
    negS = -S
    result, used = deflated_extremal(negS, sq, largest=False, method=method,
                                     dense_cutoff=DENSE_EIG_CUTOFF,
                                     maxiter=maxiter)
    scale = max(float(np.max(np.abs(negS.data))) if sp.issparse(negS)
                else float(np.max(np.abs(negS))), 1.0)
    if result.residual > residual_rtol * scale:
        raise NumericalFailureError(
            f"gap eigenpair residual {result.residual:.3e} exceeds "
            f"{residual_rtol:.1e} relative to scale {scale:.3e}",
            residual=result.residual)
    # map the symmetric-space eigenvector back to a function on states
    f = result.vector / sq
    if f[np.argmax(np.abs(f))] < 0:
        f = -f
    return SpectralReport(gap=result.value, method=used,
                          residual=result.residual,
                          iterations=result.iterations, eigenvector=f,
                          trivial_residual=result.trivial_residual,
                          eigenvalues=result.eigenvalues)


def dirichlet_form(Q, pi, f):
    """Energy ``(1/2) sum_ij pi[i] Q[i, j] (f[j] - f[i])^2``.

    Unchanged if `Q` is replaced by its additive reversibilization; zero
    exactly for constant `f`.
    """
    p = _as_probs(pi, Q.n)
    f = np.asarray(f, dtype=float)
    if f.size != Q.n:
        raise InvalidInputError(f"function has {f.size} entries, chain has {Q.n}")
    rows, cols, vals = Q.off_diagonal()
    if rows.size == 0:
        return 0.0
    return float(0.5 * np.sum(p[rows] * vals * (f[cols] - f[rows]) ** 2))


def rayleigh_quotient(Q, pi, f):
    """Dirichlet energy of `f` over its pi-variance, after centering.

    Always at least the spectral gap; equals it when `f` is a gap-achieving
    eigenfunction.

    Raises
    ------
    InvalidInputError
        If `f` is constant (zero variance).
    """
    p = _as_probs(pi, Q.n)
    f = np.asarray(f, dtype=float)
    if f.size != Q.n:
        raise InvalidInputError(f"function has {f.size} entries, chain has {Q.n}")
    centered = f - float(p @ f)
    var = float(p @ centered ** 2)
    if var <= 1e-24 * max(1.0, float(np.max(np.abs(f))) ** 2):
        raise InvalidInputError("Rayleigh quotient undefined for constant f")
    return dirichlet_form(Q, p, centered) / var


def bd_closed_form_gap(alpha, beta, n_levels):
    """Gap of the constant-rate birth-death chain.

    Parameters
    ----------
    alpha : float
        Down rate (toward state 0), positive.
    beta : float
        Up rate, positive.
    n_levels : int or math.inf
        Top state; the chain lives on ``0..n_levels``.  Infinite chains
        require ``alpha > beta`` (positive recurrence), where the gap is
        ``(sqrt(alpha) - sqrt(beta))**2``.
    """
    alpha, beta = float(alpha), float(beta)
    if alpha <= 0 or beta <= 0:
        raise InvalidInputError("rates must be positive")
    if n_levels is math.inf or (isinstance(n_levels, float)
                                and math.isinf(n_levels)):
        if alpha <= beta:
            raise InvalidInputError(
                "infinite chain needs alpha > beta for a positive gap")
        return (math.sqrt(alpha) - math.sqrt(beta)) ** 2
    N = int(n_levels)
    if N < 1:
        raise InvalidInputError("n_levels must be >= 1 or infinity")
    return alpha + beta - 2.0 * math.sqrt(alpha * beta) * math.cos(
        math.pi / (N + 1))


@dataclass
class BirthDeathBoundReport:
    """Weighted-path lower bound on a birth-death gap.

    ``mu`` are the product-form weights with ``mu[0] = 1``; `delta` is the
    largest product of a head mass and a tail of reciprocal flow rates, and
    the certified bound is ``1 / (4 delta)``.
    """

    mu: np.ndarray
    delta: float
    lower_bound: float


def bd_lower_bound(death_rates, birth_rates):
    """Lower-bound the gap of a finite birth-death chain from its rates.

    Parameters
    ----------
    death_rates : sequence, length N
        Down rates ``a_1..a_N``.
    birth_rates : sequence, length N
        Up rates ``b_0..b_{N-1}``.

    Returns
    -------
    BirthDeathBoundReport
        With ``lower_bound = 1 / (4 delta) <= gap``.
    """
    a = np.asarray(death_rates, dtype=float)
    b = np.asarray(birth_rates, dtype=float)
    if a.ndim != 1 or a.size != b.size or a.size < 1:
        raise InvalidInputError(
            "death and birth rate lists must have equal length >= 1")
    if np.any(a <= 0) or np.any(b <= 0):
        raise InvalidInputError("rates must be positive")
    N = a.size
    mu = np.empty(N + 1)
    mu[0] = 1.0
    for k in range(1, N + 1):
        mu[k] = mu[k - 1] * b[k - 1] / a[k - 1]
    head = np.cumsum(mu[:N])              # sum of mu[0..n] for n in 0..N-1
    flow = 1.0 / (mu[:N] * b)             # 1 / (mu[k] b[k]) for k in 0..N-1
    tail = np.cumsum(flow[::-1])[::-1]    # sum over k in n..N-1
    delta = float(np.max(head * tail))
    return BirthDeathBoundReport(mu=mu, delta=delta,
                                 lower_bound=1.0 / (4.0 * delta))


@dataclass
class CertificateReport:
    """Outcome of a drift-condition check.

    `certified` means ``(Q V)(i) <= -beta V(i)`` held (within 1e-12) at
    every state except the excluded one, which certifies that the gap is
    at least `beta` for a reversible chain.
    """

    certified: bool
    beta: float
    excluded_state: int
    violations: list = field(default_factory=list)  # (state, excess)


def drift_certificate_check(Q, V, beta, excluded_state, slack=1e-12):
    """Check the drift inequality ``(Q V)(i) <= -beta V(i)`` for ``i != j``.

    Parameters
    ----------
    Q : GeneratorMatrix
    V : array
        Test function with ``V >= 1`` everywhere.
    beta : float
        Positive candidate rate.
    excluded_state : int
        The one state `j` where the inequality is not required.

    Returns
    -------
    CertificateReport
    """
    V = np.asarray(V, dtype=float)
    if V.size != Q.n:
        raise InvalidInputError(f"V has {V.size} entries, chain has {Q.n}")
    if np.any(V < 1.0):
        raise InvalidInputError("certificate requires V >= 1 everywhere")
    if not beta > 0:
        raise InvalidInputError("beta must be positive")
    j = int(excluded_state)
    if not 0 <= j < Q.n:
        raise InvalidInputError(f"excluded state {j} out of range")
    drift = Q.matrix @ V
    excess = drift + beta * V
    violations = [(int(i), float(excess[i]))
                  for i in range(Q.n)
                  if i != j and excess[i] > slack]
    return CertificateReport(certified=not violations, beta=float(beta),
                             excluded_state=j, violations=violations)
