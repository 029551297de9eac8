"""Exact trajectory simulation and Monte Carlo estimation of time-average
tail probabilities.

Trajectories are sampled from the jump chain: exponential holding times at
the current state's exit rate, then a jump drawn proportionally to the
off-diagonal rates.  Every replication gets its own counter-based random
stream derived from ``(seed, replication_index)``, so results are
reproducible bit-for-bit regardless of scheduling or worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as _beta_dist

from .errors import ExplosionGuardError, InvalidInputError
from .generator import (GeneratorMatrix, ObservableFunction,
                        StationaryDistribution, _as_probs)

DEFAULT_MAX_JUMPS = 10_000_000
DEFAULT_CI_LEVEL = 0.999


def substream(seed, index):
    """Independent random stream for replication `index` under `seed`."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class TrajectorySample:
    """One simulated path up to a time horizon.

    `jump_times[k]` is when the chain entered `states[k]`; the first entry
    is time 0 at the initial state.  The path stays in its last state
    through the horizon.
    """

    jump_times: np.ndarray
    states: np.ndarray
    horizon: float
    time_average: float | None = None

    def average(self, values):
        """Time average of a state function along this path.

        A zero-length horizon returns the value at the initial state.
        """
        values = np.asarray(values, dtype=float)
        if self.horizon == 0.0:
            return float(values[self.states[0]])
        ends = np.append(self.jump_times[1:], self.horizon)
        sojourns = ends - self.jump_times
        return float(sojourns @ values[self.states] / self.horizon)


class _PreparedChain:
    """Row tables for fast repeated sampling."""

    def __init__(self, Q):
        self.n = Q.n
        self.exit = Q.exit_rates().astype(float)
        self.targets = []
        self.cum_probs = []
        for i in range(Q.n):
            cols, vals = Q.row_rates(i)
            self.targets.append(cols.astype(np.int64))
            total = vals.sum()
            self.cum_probs.append(np.cumsum(vals) / total if vals.size
                                  else np.empty(0))


def _walk(prep, x0, horizon, rng, values, max_jumps):
    """Simulate one path; returns (times, states, time_average_or_None)."""
    times = [0.0]
    states = [x0]
    x = x0
    now = 0.0
    weighted = 0.0
    while True:
        rate = prep.exit[x]
        if rate <= 0.0:
            # absorbing state: sits there forever
            if values is not None:
                weighted += (horizon - now) * values[x]
            break
        hold = rng.exponential(1.0 / rate)
        if now + hold >= horizon:
            if values is not None:
                weighted += (horizon - now) * values[x]
            break
        now += hold
        if values is not None:
            weighted += hold * values[x]
        u = rng.random()
        k = int(np.searchsorted(prep.cum_probs[x], u, side="right"))
        if k >= prep.targets[x].size:
            k = prep.targets[x].size - 1
        x = int(prep.targets[x][k])
        times.append(now)
        states.append(x)
        if len(times) > max_jumps:
            raise ExplosionGuardError(
                f"trajectory exceeded {max_jumps} jumps before time "
                f"{horizon}; explosion guard tripped")
    avg = None
    if values is not None:
        avg = float(values[x0]) if horizon == 0.0 else weighted / horizon
    return times, states, avg


def sample_path(Q, x0, horizon, rng, g=None, max_jumps=DEFAULT_MAX_JUMPS):
    """Simulate the chain exactly from `x0` up to `horizon`.

    Parameters
    ----------
    Q : GeneratorMatrix
    x0 : int
        Initial state.
    horizon : float
        Nonnegative time horizon; 0 yields a single-point path.
    rng : numpy.random.Generator
        Source of randomness (see :func:`substream`).
    g : ObservableFunction or array, optional
        When given, the path's time average of `g` is filled in
        (``g(x0)`` for a zero horizon).

    Returns
    -------
    TrajectorySample

    Raises
    ------
    ExplosionGuardError
        If the path needs more than `max_jumps` jumps.
    """
    x0 = int(x0)
    if not 0 <= x0 < Q.n:
        raise InvalidInputError(f"initial state {x0} out of range")
    horizon = float(horizon)
    if horizon < 0:
        raise InvalidInputError("horizon must be nonnegative")
    values = None
    if g is not None:
        values = g.values if isinstance(g, ObservableFunction) else \
            np.asarray(g, dtype=float)
        if values.size != Q.n:
            raise InvalidInputError(
                f"observable has {values.size} entries, chain has {Q.n}")
    prep = _PreparedChain(Q)
    times, states, avg = _walk(prep, x0, horizon, rng, values, max_jumps)
    return TrajectorySample(jump_times=np.asarray(times),
                            states=np.asarray(states, dtype=np.int64),
                            horizon=horizon, time_average=avg)


def clopper_pearson_upper(successes, trials, level=DEFAULT_CI_LEVEL):
    """One-sided upper confidence limit for a binomial proportion.

    Exact (beta-quantile) construction; returns 1 when every trial
    succeeded.
    """
    k, n = int(successes), int(trials)
    if not 0 <= k <= n or n < 1:
        raise InvalidInputError(f"invalid counts {k}/{n}")
    if k == n:
        return 1.0
    return float(_beta_dist.ppf(level, k + 1, n - k))


@dataclass
class TailEstimate:
    """Monte Carlo estimate of a one-sided tail probability.

    `p_hat` estimates the chance that the time average of the observable
    exceeds its stationary mean by at least `epsilon`; `ci_upper` is the
    exact one-sided upper confidence limit at `level`.
    """

    p_hat: float
    reps: int
    ci_upper: float
    seed: int
    epsilon: float
    t: float
    count: int = 0
    level: float = DEFAULT_CI_LEVEL

    def to_dict(self):
        return {"p_hat": float(self.p_hat), "reps": int(self.reps),
                "ci_upper": float(self.ci_upper), "seed": int(self.seed),
                "epsilon": float(self.epsilon), "t": float(self.t),
                "count": int(self.count), "level": float(self.level)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _initial_state(init_cum, rng):
    u = rng.random()
    k = int(np.searchsorted(init_cum, u, side="right"))
    return min(k, init_cum.size - 1)


def _count_chunk(prep, init_cum, values, horizon, threshold, seed, lo, hi,
                 max_jumps):
    count = 0
    for r in range(lo, hi):
        rng = substream(seed, r)
        x0 = _initial_state(init_cum, rng)
        _, _, avg = _walk(prep, x0, horizon, rng, values, max_jumps)
        if avg - threshold >= 0.0:
            count += 1
    return count


def _count_chunk_args(args):
    return _count_chunk(*args)


def tail_probability_mc(Q, g, init, horizon, eps, reps, seed,
                        mean=None, level=DEFAULT_CI_LEVEL,
                        max_jumps=DEFAULT_MAX_JUMPS, workers=1):
    """Estimate ``P(time average of g - mean >= eps)`` by simulation.

    Parameters
    ----------
    Q : GeneratorMatrix
    g : ObservableFunction or array
    init : StationaryDistribution or array
        Initial distribution; must sum to 1.
    horizon : float
        Averaging window, positive.
    eps : float
        Deviation threshold, positive.
    reps : int
        Number of independent replications, >= 1.
    seed : int
        Stream seed; replication `r` always uses the stream derived from
        ``(seed, r)``, so estimates are reproducible for any `workers`.
    mean : float, optional
        Stationary mean of `g`; computed from the stationary law of `Q`
        when omitted.
    workers : int
        Process count for parallel replication.

    Returns
    -------
    TailEstimate
    """
    values = g.values if isinstance(g, ObservableFunction) else \
        np.asarray(g, dtype=float)
    if values.size != Q.n:
        raise InvalidInputError(
            f"observable has {values.size} entries, chain has {Q.n}")
    init = _as_probs(init, Q.n)
    if np.any(init < 0):
        raise InvalidInputError("initial distribution has negative entries")
    if abs(init.sum() - 1.0) > 1e-9:
        raise InvalidInputError(
            f"initial distribution sums to {init.sum()!r}, not 1")
    if not horizon > 0:
        raise InvalidInputError("horizon must be positive")
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    reps = int(reps)
    if reps < 1:
        raise InvalidInputError("reps must be >= 1")
    if mean is None:
        from .generator import stationary_distribution
        pi = stationary_distribution(Q)
        mean = float(pi.probs @ values)
    threshold = float(mean) + float(eps)
    prep = _PreparedChain(Q)
    init_cum = np.cumsum(init)
    workers = max(1, int(workers))
    if workers == 1 or reps < 2 * workers:
        count = _count_chunk(prep, init_cum, values, float(horizon),
                             threshold, seed, 0, reps, max_jumps)
    else:
        edges = np.linspace(0, reps, workers + 1).astype(int)
        jobs = [(prep, init_cum, values, float(horizon), threshold, seed,
                 int(lo), int(hi), max_jumps)
                for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            count = sum(pool.map(_count_chunk_args, jobs))
    p_hat = count / reps
    return TailEstimate(p_hat=p_hat, reps=reps,
                        ci_upper=clopper_pearson_upper(count, reps, level),
                        seed=int(seed), epsilon=float(eps),
                        t=float(horizon), count=count, level=level)
