"""Rate matrices of continuous-time Markov chains: construction, validation,
stationary distributions, time reversal, and additive reversibilization.

A rate matrix (generator) `Q` has nonnegative off-diagonal entries and zero
row sums; `Q[i, j]` is the jump rate from state `i` to state `j`.  Matrices
are stored sparsely with the diagonal kept explicit.  All objects here are
treated as immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, NumericalFailureError

# Above this size the stationary solve switches from elimination to power
# iteration on the uniformized kernel.
DENSE_SOLVE_CUTOFF = 2000


class GeneratorMatrix:
    """Rate matrix of a continuous-time Markov chain on `n` states.

    Parameters
    ----------
    matrix : array_like or scipy sparse matrix, shape (n, n)
        Entries of the generator, diagonal included.
    labels : sequence of str, optional
        Human-readable state names, length `n`.

    Notes
    -----
    Construction does not enforce admissibility (zero row sums, nonnegative
    off-diagonal, irreducibility); use :func:`validate_generator` to check.
    This keeps deliberately defective matrices constructible for diagnosis.
    """

    def __init__(self, matrix, labels=None):
        if sp.issparse(matrix):
            m = matrix.tocsr().astype(float)
        else:
            arr = np.asarray(matrix, dtype=float)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise InvalidInputError(
                    f"generator must be square, got shape {arr.shape}")
            m = sp.csr_matrix(arr)
        if m.shape[0] != m.shape[1]:
            raise InvalidInputError(
                f"generator must be square, got shape {m.shape}")
        if m.shape[0] < 1:
            raise InvalidInputError("generator needs at least one state")
        if not np.all(np.isfinite(m.data)):
            raise InvalidInputError("generator entries must be finite")
        if labels is not None:
            labels = [str(s) for s in labels]
            if len(labels) != m.shape[0]:
                raise InvalidInputError(
                    f"{len(labels)} labels for {m.shape[0]} states")
        self._matrix = m
        self._labels = labels
        self._dense = None

    @classmethod
    def from_rates(cls, n, rates, labels=None):
        """Build from triplets ``(i, j, rate)``.

        Off-diagonal triplets give jump rates.  Diagonal triplets, when
        present, are stored as given; for every row without an explicit
        diagonal entry the diagonal is set to minus the row's off-diagonal
        sum.  A repeated ``(i, j)`` pair is rejected.
        """
        if n < 1:
            raise InvalidInputError("n must be >= 1")
        seen = set()
        rows, cols, vals = [], [], []
        diag = {}
        for entry in rates:
            try:
                i, j, rate = entry
            except (TypeError, ValueError):
                raise InvalidInputError(f"rate entry {entry!r} is not (i, j, rate)")
            i, j = int(i), int(j)
            rate = float(rate)
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidInputError(
                    f"rate entry ({i}, {j}) out of range for n={n}")
            if not np.isfinite(rate):
                raise InvalidInputError(f"rate at ({i}, {j}) is not finite")
            if (i, j) in seen:
                raise InvalidInputError(f"duplicate rate entry for ({i}, {j})")
            seen.add((i, j))
            if i == j:
                diag[i] = rate
            else:
                rows.append(i)
                cols.append(j)
                vals.append(rate)
        off = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        row_sums = np.asarray(off.sum(axis=1)).ravel()
        d = -row_sums
        for i, v in diag.items():
            d[i] = v
        return cls(off + sp.diags(d, format="csr", shape=(n, n)), labels=labels)

    @property
    def n(self):
        return self._matrix.shape[0]

    @property
    def matrix(self):
        """The generator in CSR form.  Do not mutate."""
        return self._matrix

    @property
    def labels(self):
        return self._labels

    def to_dense(self):
        """Dense ndarray view of the generator (cached; do not mutate)."""
        if self._dense is None:
            self._dense = self._matrix.toarray()
        return self._dense

    def exit_rates(self):
        """Total jump rate out of each state, ``-Q[i, i]`` for admissible Q."""
        return -self._matrix.diagonal()

    def max_rate(self):
        """Largest exit rate; sets the scale for relative tolerances."""
        rates = self.exit_rates()
        return float(rates.max()) if rates.size else 0.0

    def off_diagonal(self):
        """Off-diagonal entries as arrays ``(rows, cols, values)``."""
        coo = self._matrix.tocoo()
        keep = coo.row != coo.col
        return coo.row[keep], coo.col[keep], coo.data[keep]

    def row_rates(self, i):
        """Jump targets and rates out of state `i` (strictly positive only)."""
        lo, hi = self._matrix.indptr[i], self._matrix.indptr[i + 1]
        cols = self._matrix.indices[lo:hi]
        vals = self._matrix.data[lo:hi]
        keep = (cols != i) & (vals > 0)
        return cols[keep], vals[keep]

    def __repr__(self):
        return f"GeneratorMatrix(n={self.n}, nnz={self._matrix.nnz})"


class StationaryDistribution:
    """Strictly positive probability vector, the stationary law of a chain.

    Raises
    ------
    InvalidInputError
        If any entry is not strictly positive or the sum deviates from 1
        by more than `sum_atol`.
    """

    def __init__(self, probs, sum_atol=1e-12):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise InvalidInputError("probability vector must be 1-D and nonempty")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("probabilities must be finite")
        if np.any(p <= 0):
            raise InvalidInputError("stationary distribution must be strictly positive")
        if abs(p.sum() - 1.0) > sum_atol:
            raise InvalidInputError(
                f"probabilities sum to {p.sum()!r}, not 1 within {sum_atol}")
        self.probs = p

    @property
    def n(self):
        return self.probs.size

    def as_array(self):
        return self.probs

    def __getitem__(self, i):
        return self.probs[i]

    def __repr__(self):
        return f"StationaryDistribution(n={self.n})"


class ObservableFunction:
    """Real function on the state space with a declared range ``[lower, upper]``.

    The declared range must contain every value; it is what tail bounds use
    for the span ``upper - lower``, so a loose range weakens bounds but is
    legal.
    """

    def __init__(self, values, lower, upper):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise InvalidInputError("function values must be 1-D and nonempty")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("function values must be finite")
        lower, upper = float(lower), float(upper)
        if not lower <= upper:
            raise InvalidInputError(f"empty range [{lower}, {upper}]")
        if v.min() < lower or v.max() > upper:
            raise InvalidInputError(
                f"values fall outside declared range [{lower}, {upper}]")
        self.values = v
        self.lower = lower
        self.upper = upper

    @property
    def span(self):
        return self.upper - self.lower

    def __repr__(self):
        return (f"ObservableFunction(n={self.values.size}, "
                f"range=[{self.lower}, {self.upper}])")


@dataclass
class ValidationReport:
    """Outcome of admissibility checks on a generator.

    `admissible` is true iff there are no row-sum defects, no negative
    off-diagonal entries, and the transition graph is strongly connected.
    """

    row_sum_defects: list = field(default_factory=list)   # (row, defect)
    negative_entries: list = field(default_factory=list)  # (i, j, value)
    strongly_connected: bool = True
    messages: list = field(default_factory=list)

    @property
    def admissible(self):
        return (not self.row_sum_defects and not self.negative_entries
                and self.strongly_connected)


def _strongly_connected(Q):
    # forward and reverse reachability from state 0 over positive rates
    n = Q.n
    if n == 1:
        return True

    def reaches_all(mat):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        stack = [0]
        indptr, indices, data = mat.indptr, mat.indices, mat.data
        while stack:
            u = stack.pop()
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if v != u and data[k] > 0 and not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return bool(seen.all())

    return reaches_all(Q.matrix) and reaches_all(Q.matrix.T.tocsr())


def validate_generator(Q, atol=1e-12):
    """Check admissibility of a rate matrix.

    Parameters
    ----------
    Q : GeneratorMatrix
    atol : float
        Row sums must vanish within `atol` (absolute); off-diagonal entries
        more negative than ``-atol`` are flagged.

    Returns
    -------
    ValidationReport
        Never raises for a defective matrix; defects are reported.
    """
    report = ValidationReport()
    row_sums = np.asarray(Q.matrix.sum(axis=1)).ravel()
    for i in np.nonzero(np.abs(row_sums) > atol)[0]:
        report.row_sum_defects.append((int(i), float(row_sums[i])))
        report.messages.append(f"row {i} sums to {row_sums[i]:.3e}")
    rows, cols, vals = Q.off_diagonal()
    for i, j, v in zip(rows, cols, vals):
        if v < -atol:
            report.negative_entries.append((int(i), int(j), float(v)))
            report.messages.append(f"negative rate {v:.3e} at ({i}, {j})")
    report.strongly_connected = _strongly_connected(Q)
    if not report.strongly_connected:
        report.messages.append("transition graph is not strongly connected")
    return report


def _gth_solve(A):
    """Stationary vector of a conservative rate matrix by state elimination.

    Subtraction-free, so every entry keeps full relative accuracy even when
    the distribution spans hundreds of orders of magnitude.
    """
    A = A.astype(float, copy=True)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0:
            raise NumericalFailureError(
                f"elimination pivot {s!r} at state {k}; "
                "generator is likely reducible")
        f = A[:k, k] / s
        A[:k, :k] += np.outer(f, A[k, :k])
    x = np.zeros(n)
    x[0] = 1.0
    for k in range(1, n):
        s = A[k, :k].sum()
        x[k] = (x[:k] @ A[:k, k]) / s
    return x / x.sum()


def _power_iteration_solve(Q, rtol, max_iterations):
    """Left fixed vector of the uniformized kernel, for large sparse chains."""
    n = Q.n
    q = 1.05 * Q.max_rate()
    if q <= 0:
        raise NumericalFailureError("all exit rates vanish")
    M = Q.matrix
    scale = max(Q.max_rate(), 1.0)
    pi = np.full(n, 1.0 / n)
    check_every = 50
    for it in range(1, max_iterations + 1):
        pi = pi + (pi @ M) / q
        pi = np.maximum(pi, 0.0)
        pi /= pi.sum()
        if it % check_every == 0:
            resid = float(np.max(np.abs(pi @ M)))
            if resid <= rtol * scale:
                return pi, it
    resid = float(np.max(np.abs(pi @ M)))
    raise NumericalFailureError(
        f"stationary iteration did not reach tolerance after "
        f"{max_iterations} steps", residual=resid)


def stationary_distribution(Q, rtol=1e-10, dense_cutoff=DENSE_SOLVE_CUTOFF,
                            max_iterations=200_000):
    """Solve ``pi Q = 0`` with ``pi > 0`` summing to 1.

    Parameters
    ----------
    Q : GeneratorMatrix
        Admissible generator (irreducible, conservative).
    rtol : float
        Accept when ``max|pi Q|`` is below `rtol` times the largest exit
        rate (floored at 1).
    dense_cutoff : int
        Up to this size, use subtraction-free elimination (componentwise
        relative accuracy); beyond it, power iteration on the uniformized
        kernel.

    Returns
    -------
    StationaryDistribution

    Raises
    ------
    NumericalFailureError
        If the residual test fails, carrying the achieved residual.
    """
    n = Q.n
    if n == 1:
        return StationaryDistribution([1.0])
    if n <= dense_cutoff:
        pi = _gth_solve(Q.to_dense())
    else:
        pi, _ = _power_iteration_solve(Q, rtol, max_iterations)
    scale = max(Q.max_rate(), 1.0)
    resid = float(np.max(np.abs(pi @ Q.matrix)))
    if resid > rtol * scale:
        raise NumericalFailureError(
            f"stationary residual {resid:.3e} exceeds {rtol:.1e} * {scale:.3e}",
            residual=resid)
    if np.any(pi <= 0):
        raise NumericalFailureError(
            "stationary solve produced non-positive entries")
    return StationaryDistribution(pi)


def _as_probs(pi, n=None):
    """Accept StationaryDistribution or array; return the ndarray."""
    p = pi.probs if isinstance(pi, StationaryDistribution) else \
        np.asarray(pi, dtype=float)
    if n is not None and p.size != n:
        raise InvalidInputError(f"distribution has {p.size} entries, chain has {n}")
    return p


def dual_generator(Q, pi):
    """Time-reversed generator ``Qhat[i, j] = pi[j] Q[j, i] / pi[i]``.

    The reversal has the same stationary distribution and the same exit
    rates; its diagonal is recomputed so rows sum to zero exactly.

    Raises
    ------
    InvalidInputError
        If `pi` has a zero (or negative) entry.
    NumericalFailureError
        If `pi` is not stationary for the result within 1e-10 relative to
        the largest exit rate.
    """
    p = _as_probs(pi, Q.n)
    if np.any(p <= 0):
        raise InvalidInputError("time reversal needs strictly positive pi")
    rows, cols, vals = Q.off_diagonal()
    # entry Q[j, i] = v contributes Qhat[i, j] = pi[j] v / pi[i]
    hat_rows, hat_cols = cols, rows
    hat_vals = vals * p[rows] / p[cols]
    off = sp.coo_matrix((hat_vals, (hat_rows, hat_cols)),
                        shape=(Q.n, Q.n)).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    Qhat = GeneratorMatrix(off + sp.diags(diag, format="csr", shape=(Q.n, Q.n)),
                           labels=Q.labels)
    scale = max(Q.max_rate(), 1.0)
    resid = float(np.max(np.abs(p @ Qhat.matrix)))
    if resid > 1e-10 * scale:
        raise NumericalFailureError(
            f"pi is not stationary for the reversal (residual {resid:.3e})",
            residual=resid)
    return Qhat


def additive_symmetrization(Q, pi):
    """Reversible generator ``(Q + Qhat) / 2`` with `Qhat` the time reversal.

    Detailed balance of the result with respect to `pi` is verified; the
    spectral gap of the original chain is by definition the gap of this
    reversibilization.
    """
    p = _as_probs(pi, Q.n)
    Qhat = dual_generator(Q, p)
    Qbar = GeneratorMatrix((Q.matrix + Qhat.matrix) * 0.5, labels=Q.labels)
    if not is_reversible(Qbar, p):
        raise NumericalFailureError(
            "additive symmetrization failed detailed balance")
    return Qbar


def is_reversible(Q, pi, rtol=1e-12):
    """Detailed balance test: ``pi[i] Q[i, j] == pi[j] Q[j, i]`` for all pairs.

    The comparison is relative to the largest exit rate.
    """
    p = _as_probs(pi, Q.n)
    F = Q.matrix.multiply(p[:, None])
    asym = (F - F.T).tocoo()
    worst = float(np.max(np.abs(asym.data))) if asym.nnz else 0.0
    return worst <= rtol * max(Q.max_rate(), 1.0)


def build_birth_death(death_rates, birth_rates, labels=None):
    """Tridiagonal generator on states ``0..N``.

    Parameters
    ----------
    death_rates : sequence of float, length N
        Down rates ``a_1..a_N``; ``Q[i, i-1] = a_i`` for ``i = 1..N``.
    birth_rates : sequence of float, length N
        Up rates ``b_0..b_{N-1}``; ``Q[i, i+1] = b_i`` for ``i = 0..N-1``.
    """
    a = np.asarray(death_rates, dtype=float)
    b = np.asarray(birth_rates, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.size != b.size or a.size < 1:
        raise InvalidInputError(
            "death and birth rate lists must be 1-D with equal length >= 1")
    if np.any(a <= 0) or np.any(b <= 0):
        raise InvalidInputError("birth and death rates must be positive")
    N = a.size
    rates = [(i, i + 1, b[i]) for i in range(N)]
    rates += [(i, i - 1, a[i - 1]) for i in range(1, N + 1)]
    return GeneratorMatrix.from_rates(N + 1, rates, labels=labels)


def build_three_state():
    """The bundled three-state demo chain (non-reversible, known gap)."""
    return GeneratorMatrix.from_rates(
        3,
        [(0, 1, 1.0), (0, 2, 1.0),
         (1, 0, 1.0), (1, 2, 2.0),
         (2, 0, 1.0)],
        labels=["s0", "s1", "s2"])


def parse_model(obj, source="<model>"):
    """Build a GeneratorMatrix from the model-file dictionary.

    Expected shape::

        {"n": int, "rates": [[i, j, rate], ...], "labels": [...]?}

    Off-diagonal rates must be nonnegative.  Diagonal entries are ignored
    and recomputed as minus the row sums.  Duplicate ``(i, j)`` pairs are
    rejected.
    """
    if not isinstance(obj, dict):
        raise InvalidInputError(f"{source}: top level must be an object")
    try:
        n = int(obj["n"])
    except (KeyError, TypeError, ValueError):
        raise InvalidInputError(f"{source}: missing or non-integer field 'n'")
    raw = obj.get("rates")
    if not isinstance(raw, list):
        raise InvalidInputError(f"{source}: field 'rates' must be a list")
    triplets = []
    seen = set()
    for k, entry in enumerate(raw):
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise InvalidInputError(
                f"{source}: rates[{k}] must be [i, j, rate]")
        i, j, rate = entry
        try:
            i, j, rate = int(i), int(j), float(rate)
        except (TypeError, ValueError):
            raise InvalidInputError(f"{source}: rates[{k}] has non-numeric fields")
        if not (0 <= i < n and 0 <= j < n):
            raise InvalidInputError(
                f"{source}: rates[{k}] index ({i}, {j}) out of range for n={n}")
        if (i, j) in seen:
            raise InvalidInputError(
                f"{source}: duplicate rate entry for ({i}, {j}) at rates[{k}]")
        seen.add((i, j))
        if i == j:
            continue  # diagonals are recomputed
        if rate < 0 or not np.isfinite(rate):
            raise InvalidInputError(
                f"{source}: rates[{k}] value {rate!r} must be a finite "
                "nonnegative number")
        triplets.append((i, j, rate))
    labels = obj.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or len(labels) != n:
            raise InvalidInputError(
                f"{source}: 'labels' must be a list of length n={n}")
    return GeneratorMatrix.from_rates(n, triplets, labels=labels)


def load_model(path):
    """Read a model JSON file; see :func:`parse_model` for the schema."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise InvalidInputError(f"model file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON at line {exc.lineno}, "
                                f"column {exc.colno}: {exc.msg}")
    return parse_model(obj, source=str(path))


def parse_observable(obj, source="<function>"):
    """Build an ObservableFunction from ``{"values": [...], "range": [a, b]}``."""
    if not isinstance(obj, dict):
        raise InvalidInputError(f"{source}: top level must be an object")
    values = obj.get("values")
    rng = obj.get("range")
    if not isinstance(values, list) or not values:
        raise InvalidInputError(f"{source}: 'values' must be a nonempty list")
    if not isinstance(rng, (list, tuple)) or len(rng) != 2:
        raise InvalidInputError(f"{source}: 'range' must be [a, b]")
    try:
        return ObservableFunction(values, rng[0], rng[1])
    except InvalidInputError as exc:
        raise InvalidInputError(f"{source}: {exc}")


def load_observable(path):
    """Read a function JSON file; see :func:`parse_observable`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise InvalidInputError(f"function file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON at line {exc.lineno}, "
                                f"column {exc.colno}: {exc.msg}")
    return parse_observable(obj, source=str(path))
