"""Finite approximations of countable-state chains by collapsing the
complement of a retained set into one absorbing-and-returning tail state.

The collapsed chain keeps every rate inside the retained set, routes all
outbound rate to the tail state `e`, and gives `e` the stationary-flow
averaged return rates.  Its stationary law restricts to the original one on
the set (with the tail mass at `e`), and its spectral gap converges to the
gap of the full chain as the retained set grows.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalFailureError
from .generator import (GeneratorMatrix, ObservableFunction,
                        StationaryDistribution, _as_probs)
from .spectral import spectral_gap

_TAIL_SUM_RELTOL = 1e-17
_TAIL_SUM_MAX_TERMS = 10_000_000


class CountableModel:
    """Countable-state chain described by callbacks.

    Parameters
    ----------
    row : callable
        ``row(i)`` returns the finitely many ``(j, rate)`` pairs out of
        state `i` (off-diagonal, positive rates only).
    weight : callable
        ``weight(k)`` is an unnormalized stationary weight of state `k`
        (any fixed positive multiple of the stationary law).
    tail_weight : callable
        ``tail_weight(n)`` is the total weight of states ``n, n+1, ...``
        (finite for positive-recurrent chains).
    in_reach : callable, optional
        ``in_reach(n)`` lists the states ``>= n`` that have an edge into
        ``{0..n-1}``.  Required for infinite chains.
    finite_size : int, optional
        State count when the chain is actually finite.
    """

    def __init__(self, row, weight, tail_weight, in_reach=None,
                 finite_size=None):
        self.row = row
        self.weight = weight
        self.tail_weight = tail_weight
        self.in_reach = in_reach
        self.finite_size = finite_size

    @classmethod
    def birth_death(cls, death_rate, birth_rate):
        """Birth-death chain on ``0, 1, 2, ...``.

        Parameters
        ----------
        death_rate : float or callable
            Down rate; a callable receives the level ``k >= 1``.
        birth_rate : float or callable
            Up rate; a callable receives the level ``k >= 0``.

        For constant rates the chain is positive recurrent only when the
        death rate exceeds the birth rate; that is checked eagerly and the
        geometric tail is summed in closed form.
        """
        a = death_rate if callable(death_rate) else (lambda k, _v=float(death_rate): _v)
        b = birth_rate if callable(birth_rate) else (lambda k, _v=float(birth_rate): _v)
        constant = not callable(death_rate) and not callable(birth_rate)
        if constant:
            alpha, beta = float(death_rate), float(birth_rate)
            if alpha <= 0 or beta <= 0:
                raise InvalidInputError("rates must be positive")
            if beta >= alpha:
                raise InvalidInputError(
                    "constant-rate chain needs death rate > birth rate "
                    "for positive recurrence")
        weights = [1.0]  # product-form weights, grown on demand

        def weight(k):
            while len(weights) <= k:
                m = len(weights)
                up = b(m - 1)
                down = a(m)
                if up <= 0 or down <= 0:
                    raise InvalidInputError(f"non-positive rate at level {m}")
                weights.append(weights[-1] * up / down)
            return weights[k]

        if constant:
            r = beta / alpha

            def tail_weight(n):
                # geometric: sum_{k>=n} mu_n r^(k-n) = mu_n / (1 - r)
                return weight(n) / (1.0 - r)
        else:
            def tail_weight(n):
                total = 0.0
                k = n
                while True:
                    term = weight(k)
                    total += term
                    if term <= _TAIL_SUM_RELTOL * total:
                        return total
                    k += 1
                    if k - n > _TAIL_SUM_MAX_TERMS:
                        raise NumericalFailureError(
                            "tail weight sum did not converge; "
                            "is the chain positive recurrent?")

        def row(i):
            out = [(i + 1, b(i))]
            if i > 0:
                out.append((i - 1, a(i)))
            return out

        def in_reach(n):
            # only level n feeds back into {0..n-1}
            return (n,)

        return cls(row=row, weight=weight, tail_weight=tail_weight,
                   in_reach=in_reach, finite_size=None)

    @classmethod
    def from_generator(cls, Q, pi):
        """Wrap a finite chain so it can be collapsed like a countable one."""
        p = _as_probs(pi, Q.n)
        suffix = np.concatenate([np.cumsum(p[::-1])[::-1], [0.0]])

        def row(i):
            cols, vals = Q.row_rates(i)
            return list(zip(cols.tolist(), vals.tolist()))

        return cls(row=row, weight=lambda k: float(p[k]),
                   tail_weight=lambda n: float(suffix[n]),
                   in_reach=None, finite_size=Q.n)


@dataclass
class CollapsedModel:
    """Finite chain obtained by collapsing the complement of a state set.

    The final index (`tail_index`) is the collapsed tail state; `pi_tilde`
    places the exact tail mass there and the original stationary masses on
    the retained states.
    """

    generator: GeneratorMatrix
    pi_tilde: StationaryDistribution
    tail_index: int
    retained: tuple


def _collapse_finite(model, retained_states):
    nf = model.finite_size
    retained = sorted(set(int(s) for s in retained_states))
    if not retained:
        raise InvalidInputError("retained set is empty")
    if retained[0] < 0 or retained[-1] >= nf:
        raise InvalidInputError("retained states out of range")
    complement = sorted(set(range(nf)) - set(retained))
    if not complement:
        raise InvalidInputError(
            "retained set covers the whole chain; tail mass is zero")
    index = {s: k for k, s in enumerate(retained)}
    m = len(retained)
    tail_mass = sum(model.weight(k) for k in complement)
    entries = {}

    def add(i, j, v):
        entries[(i, j)] = entries.get((i, j), 0.0) + v

    for s in retained:
        for j, rate in model.row(s):
            if j in index:
                add(index[s], index[j], rate)
            else:
                add(index[s], m, rate)
    for k in complement:
        w = model.weight(k)
        for j, rate in model.row(k):
            if j in index:
                add(m, index[j], w * rate / tail_mass)
    total = sum(model.weight(s) for s in retained) + tail_mass
    pi_t = np.array([model.weight(s) for s in retained] + [tail_mass]) / total
    return retained, m, entries, pi_t


def _collapse_prefix(model, n):
    if model.in_reach is None:
        raise InvalidInputError(
            "infinite model needs an in_reach callback to collapse")
    if n < 1:
        raise InvalidInputError("prefix size must be >= 1")
    tail_mass = model.tail_weight(n)
    if not (tail_mass > 0 and math.isfinite(tail_mass)):
        raise InvalidInputError(f"tail weight {tail_mass!r} must be positive "
                                "and finite")
    entries = {}

    def add(i, j, v):
        entries[(i, j)] = entries.get((i, j), 0.0) + v

    for s in range(n):
        for j, rate in model.row(s):
            if j < n:
                add(s, j, rate)
            else:
                add(s, n, rate)
    for k in model.in_reach(n):
        w = model.weight(k)
        for j, rate in model.row(k):
            if j < n:
                add(n, j, w * rate / tail_mass)
    total = model.tail_weight(0)
    pi_t = np.array([model.weight(s) for s in range(n)] + [tail_mass]) / total
    return list(range(n)), n, entries, pi_t


def collapse(model, retained):
    """Collapse everything outside a retained set into one tail state.

    Parameters
    ----------
    model : CountableModel
    retained : int or sequence of int
        An int keeps the prefix ``{0..retained-1}``; a sequence keeps
        exactly those states (finite chains only).

    Returns
    -------
    CollapsedModel

    Raises
    ------
    InvalidInputError
        If the complement has zero stationary mass (nothing to collapse).
    NumericalFailureError
        If the collapsed stationary law fails its residual check.
    """
    if np.isscalar(retained):
        n = int(retained)
        if model.finite_size is not None:
            retained_list, m, entries, pi_t = _collapse_finite(
                model, range(min(n, model.finite_size)))
        else:
            retained_list, m, entries, pi_t = _collapse_prefix(model, n)
    else:
        if model.finite_size is None:
            raise InvalidInputError(
                "explicit retained sets require a finite chain; "
                "use a prefix size for infinite chains")
        retained_list, m, entries, pi_t = _collapse_finite(model, retained)
    rates = [(i, j, v) for (i, j), v in sorted(entries.items())]
    Qt = GeneratorMatrix.from_rates(m + 1, rates)
    pi_tilde = StationaryDistribution(pi_t)
    resid = float(np.max(np.abs(pi_t @ Qt.matrix)))
    scale = max(Qt.max_rate(), 1.0)
    if resid > 1e-10 * scale:
        raise NumericalFailureError(
            f"collapsed stationary residual {resid:.3e} exceeds tolerance",
            residual=resid)
    return CollapsedModel(generator=Qt, pi_tilde=pi_tilde, tail_index=m,
                          retained=tuple(retained_list))


def collapse_function(g, retained):
    """Restrict an observable to a retained set, putting 0 at the tail state.

    Parameters
    ----------
    g : ObservableFunction
        Values must cover every retained index.
    retained : int or sequence of int
        Same convention as :func:`collapse`.

    Returns
    -------
    (ObservableFunction, bool)
        The collapsed observable and a flag that is True when the declared
        range had to be widened to contain the 0 at the tail state.
    """
    if np.isscalar(retained):
        idx = list(range(int(retained)))
    else:
        idx = sorted(set(int(s) for s in retained))
    if not idx:
        raise InvalidInputError("retained set is empty")
    if idx[0] < 0 or idx[-1] >= g.values.size:
        raise InvalidInputError("observable does not cover the retained set")
    values = np.concatenate([g.values[idx], [0.0]])
    widened = not (g.lower <= 0.0 <= g.upper)
    lower = min(g.lower, 0.0)
    upper = max(g.upper, 0.0)
    return ObservableFunction(values, lower, upper), widened


@dataclass
class GapSweep:
    """Collapsed-chain gaps over a growing family of retained prefixes.

    ``diffs[k] = |gaps[k] - gaps[k-1]|`` with ``diffs[0] = nan``;
    `seconds` are wall-clock build-plus-solve times.
    """

    sizes: list
    gaps: list
    diffs: list
    seconds: list
    limit_hint: float | None = None

    def to_csv(self, destination=None):
        """Write columns size, gap, diff, seconds (first diff left empty)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["size", "gap", "diff", "seconds"])
        for k, size in enumerate(self.sizes):
            diff = "" if math.isnan(self.diffs[k]) else repr(float(self.diffs[k]))
            writer.writerow([int(size), repr(float(self.gaps[k])), diff,
                             f"{self.seconds[k]:.6f}"])
        text = buf.getvalue()
        if destination is None:
            return text
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            with open(destination, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def gap_convergence_sweep(model, sizes, method="auto", limit_hint=None):
    """Gap of the collapsed chain at each retained-prefix size.

    Parameters
    ----------
    model : CountableModel
    sizes : sequence of int
        Strictly increasing prefix sizes.
    limit_hint : float, optional
        Known limiting gap, stored on the result for reporting.

    Returns
    -------
    GapSweep
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise InvalidInputError("need at least one size")
    if any(s < 1 for s in sizes):
        raise InvalidInputError("sizes must be >= 1")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InvalidInputError("sizes must be strictly increasing")
    gaps, seconds = [], []
    for s in sizes:
        t0 = time.perf_counter()
        cm = collapse(model, s)
        gaps.append(spectral_gap(cm.generator, cm.pi_tilde, method=method).gap)
        seconds.append(time.perf_counter() - t0)
    diffs = [math.nan] + [abs(b - a) for a, b in zip(gaps, gaps[1:])]
    return GapSweep(sizes=sizes, gaps=gaps, diffs=diffs, seconds=seconds,
                    limit_hint=limit_hint)
