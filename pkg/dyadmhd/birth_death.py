"""
The explosive birth-death chain behind the expected-energy flow.

A chain in state ``j`` waits an exponential time with rate ``μ_j + ν_j`` and then moves up with probability ``ν_j/(μ_j + ν_j)`` or down otherwise. With geometric shell scales the rates grow so fast that the chain reaches infinity in finite time; the simulation replaces infinity by the level ``j_max``.

State 0 is handled according to :class:`Boundary`:

* ``absorbing`` -- the path stops at 0. Visit and occupation targets then follow from the gambler's-ruin scale function.
* ``reflecting`` -- the path returns to 1 instantly. The return is recorded as a zero-length visit to 0 followed by a new visit to 1, so recorded arrival times are nondecreasing rather than strictly increasing.

.. rubric:: Example

.. code-block::

    rates = make_rates(ModelParams(lam=2.0, theta=1.0, sigma=1.0))
    sample = sample_paths(rates, 10_000, master_seed=3, boundary="reflecting")
    visit_count_stats(sample, 2, rates).mean  # ~5/3
"""

import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

from dyadmhd import rng as rng_mdl
from dyadmhd import validation
from dyadmhd.parallelization import WorkerException, parallelizer
from dyadmhd.shells import ModelParams

LOGGER = logging.getLogger(__name__)

MIN_SAMPLES = 1000
EXPLODED_STATE = -1
""" Marks exploded paths in observed-state arrays. """


class DivergentSeriesError(ArithmeticError):
    pass


class InsufficientSamplesWarning(UserWarning):
    pass


class Boundary(str, Enum):
    ABSORBING = "absorbing"
    REFLECTING = "reflecting"


class Exit(str, Enum):
    ABSORBED = "absorbed"
    EXPLODED = "exploded"
    """ Reached ``j_max`` or exhausted the jump budget before ``t_max``. """
    CENSORED = "censored"


_EXITS = [Exit.ABSORBED, Exit.EXPLODED, Exit.CENSORED]


@dataclass(frozen=True, eq=False)
class BDRates:
    """
    Down rates ``mu(j)`` and up rates ``nu(j)``, both vectorized over integer arrays.
    """

    mu: Callable[[np.ndarray], np.ndarray]
    nu: Callable[[np.ndarray], np.ndarray]
    params: Optional[ModelParams] = None
    ratio: Optional[Callable[[np.ndarray], np.ndarray]] = None
    """ Closed form of ``μ_j/ν_j``. Without it the ratio is the quotient of the rates, which overflows for large ``j``. """

    def total(self, j) -> np.ndarray:
        return self.mu(j) + self.nu(j)

    def down_up_ratio(self, j) -> np.ndarray:
        if self.ratio is not None:
            return np.asarray(self.ratio(j), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(self.mu(j) / self.nu(j), dtype=float)

    def p_up(self, j) -> np.ndarray:
        return 1.0 / (1.0 + self.down_up_ratio(j))

    def p_down(self, j) -> np.ndarray:
        return 1.0 - self.p_up(j)


def make_rates(p: ModelParams) -> BDRates:
    """
    ``μ_j = σ²λ_{j-1}^{2θ}`` and ``ν_j = σ²λ_j^{2θ}``.
    """
    p.require_noise()
    return BDRates(
        mu=lambda j: p.sigma**2 * p.scale(np.asarray(j) - 1, 2),
        nu=lambda j: p.sigma**2 * p.scale(j, 2),
        params=p,
        ratio=lambda j: np.full(np.shape(j), p.lam ** (-2.0 * p.theta)),
    )


def _down_up_ratios(rates: BDRates, first: int, count: int) -> np.ndarray:
    return rates.down_up_ratio(np.arange(first, first + count))


def escape_prob_formula(
    rates: BDRates, k: int, tol: float = 1e-15, max_terms: int = 100_000
) -> float:
    """
    Probability that the chain started at ``k + 1`` never returns to ``k``,

    .. math::

        ψ^{(k)}_{k+1} = \\Big(1 + \\sum_{n > k} \\prod_{i=k+1}^{n} μ_i/ν_i\\Big)^{-1},

    which reduces to ``(λ_k^{2θ} Σ_{j≥k} λ_j^{-2θ})^{-1}`` for the model rates.

    :raises DivergentSeriesError: if the series does not converge within ``max_terms`` terms.
    """
    if k < 1:
        raise ValueError(f"Level k must be at least 1, got {k}.")
    total, product, chunk = 1.0, 1.0, 256
    for start in range(k + 1, k + 1 + max_terms, chunk):
        terms = product * np.cumprod(_down_up_ratios(rates, start, chunk))
        if not np.all(np.isfinite(terms)):
            break
        total += terms.sum()
        product = terms[-1]
        if product <= tol * total:
            return 1.0 / total
    raise DivergentSeriesError(
        f"The never-return series at level {k} did not converge within {max_terms} terms."
    )


def scale_function(rates: BDRates, n: int) -> float:
    """
    ``S(n) = Σ_{m=0}^{n-1} Π_{i=1}^{m} μ_i/ν_i``; the chain started at ``a`` hits ``n`` before 0 with probability ``S(a)/S(n)``.
    """
    if n <= 0:
        return 0.0
    return float(1.0 + np.sum(np.cumprod(_down_up_ratios(rates, 1, n - 1))))


@dataclass(frozen=True)
class VisitLaw:
    """
    Law of the number of visits ``N_k`` to a level. Given at least one visit, ``N_k`` is geometric on ``{1, 2, ...}`` with success probability ``success`` and the total time spent at ``k`` is exponential with mean ``1/(success (μ_k + ν_k))``.
    """

    k: int
    reach: float
    """ Probability of visiting ``k`` at least once. """
    success: float
    """ Probability of never coming back to ``k`` after leaving it. """
    exit_rate: float

    @property
    def mean_visits(self) -> float:
        return self.reach / self.success

    @property
    def mean_occupation_given_visit(self) -> float:
        return 1.0 / (self.success * self.exit_rate)

    @property
    def mean_occupation(self) -> float:
        return self.reach * self.mean_occupation_given_visit


@validation.choices("boundary", list(Boundary))
def visit_law(rates: BDRates, k: int, boundary: Boundary = Boundary.ABSORBING, initial: int = 1) -> VisitLaw:
    """
    :param rates: Chain rates.
    :param k: Level ``k >= initial``.
    :param boundary: Handling of state 0.
    :param initial: Initial state of the chain.
    """
    if not 1 <= initial <= k:
        raise ValueError(f"Visit laws need 1 <= initial <= k, got initial={initial}, k={k}.")
    psi = escape_prob_formula(rates, k)
    up, down = float(rates.p_up(k)), float(rates.p_down(k))
    if Boundary(boundary) == Boundary.REFLECTING:
        reach, back_from_below = 1.0, 1.0
    else:
        reach = scale_function(rates, initial) / scale_function(rates, k)
        back_from_below = scale_function(rates, k - 1) / scale_function(rates, k)
    success = up * psi + down * (1.0 - back_from_below)
    return VisitLaw(k=k, reach=reach, success=success, exit_rate=float(rates.total(k)))


@dataclass(eq=False)
class JumpPath:
    """
    One realization of the chain.

    :param states: Visited states, starting with the initial state.
    :param times: Arrival time in each state (nondecreasing, ``times[0] = 0``).
    :param exit: Exit cause.
    :param exit_time: Absorption, explosion or censoring time.
    :param seed: Master seed of the run that produced the path, if known.
    """

    states: np.ndarray
    times: np.ndarray
    exit: Exit
    exit_time: float
    seed: Optional[int] = None

    def holding_times(self) -> np.ndarray:
        """
        Sojourn length of every recorded visit. The last sojourn ends at :attr:`exit_time`.
        """
        return np.diff(np.append(self.times, self.exit_time))

    def visits(self, k: int) -> int:
        return int(np.sum(self.states == k))

    def occupation(self, n: int) -> float:
        return float(np.sum(self.holding_times()[self.states == n]))


@dataclass(eq=False)
class ChainSample:
    """
    Statistics of a set of chain paths. Arrays are indexed by path first.

    :param exits: Exit codes (index into ``[ABSORBED, EXPLODED, CENSORED]``).
    :param exit_times: Exit times.
    :param visits: Visit counts, shape ``(n_paths, j_max + 1)``.
    :param occupation: Time spent in each state, shape ``(n_paths, j_max + 1)``.
    :param observe_times: Observation times.
    :param observed: State of every path at every observation time, shape ``(n_observe, n_paths)``. 0 for absorbed and :data:`EXPLODED_STATE` for exploded paths.
    :param n_jumps: Jumps per path.
    :param paths: Full paths when requested.
    """

    exits: np.ndarray
    exit_times: np.ndarray
    visits: np.ndarray
    occupation: np.ndarray
    observe_times: np.ndarray
    observed: np.ndarray
    n_jumps: np.ndarray
    boundary: Boundary
    j_max: int
    initial: int
    paths: Optional[List[JumpPath]] = None

    @property
    def n_paths(self) -> int:
        return len(self.exits)

    def exit_fractions(self) -> dict:
        return {
            _exit.value: float(np.mean(self.exits == _code))
            for _code, _exit in enumerate(_EXITS)
        }

    @classmethod
    def concatenate(cls, samples: Sequence["ChainSample"]) -> "ChainSample":
        first = samples[0]
        return cls(
            exits=np.concatenate([_s.exits for _s in samples]),
            exit_times=np.concatenate([_s.exit_times for _s in samples]),
            visits=np.concatenate([_s.visits for _s in samples]),
            occupation=np.concatenate([_s.occupation for _s in samples]),
            observe_times=first.observe_times,
            observed=np.concatenate([_s.observed for _s in samples], axis=1),
            n_jumps=np.concatenate([_s.n_jumps for _s in samples]),
            boundary=first.boundary,
            j_max=first.j_max,
            initial=first.initial,
            paths=(
                None
                if first.paths is None
                else [_p for _s in samples for _p in _s.paths]
            ),
        )


@validation.choices("boundary", list(Boundary))
def sample_chain(
    rng: Union[np.random.Generator, rng_mdl.PathStreams],
    rates: BDRates,
    n_paths: int,
    initial: int = 1,
    t_max: float = np.inf,
    j_max: int = 60,
    jump_budget: int = 10**6,
    boundary: Boundary = Boundary.ABSORBING,
    observe_times: Sequence[float] = (),
    keep_paths: bool = False,
    seed: Optional[int] = None,
) -> ChainSample:
    """
    Exact event-driven simulation of ``n_paths`` chains advanced in lockstep: every iteration draws one exponential holding time and one uniform per live path.

    :param rng: Random stream shared by the batch, or one stream per path.
    :param rates: Chain rates.
    :param n_paths: Number of paths.
    :param initial: Initial state, ``1 <= initial < j_max``.
    :param t_max: Censoring time.
    :param j_max: Explosion surrogate level.
    :param jump_budget: Jumps allowed per path before it is declared exploded.
    :param boundary: Handling of state 0.
    :param observe_times: Times at which the state of every path is recorded. Should not exceed ``t_max``.
    :param keep_paths: Also return every path as a :class:`JumpPath`.
    :param seed: Stored in the returned paths.
    """
    boundary = Boundary(boundary)
    if not 1 <= initial < j_max:
        raise ValueError(f"Initial state must satisfy 1 <= initial < j_max, got {initial}.")
    obs = np.sort(np.asarray(observe_times, dtype=float))
    unresolved = -2
    per_path = isinstance(rng, rng_mdl.PathStreams)
    if per_path and len(rng) != n_paths:
        raise ValueError(f"{n_paths} paths drawn from {len(rng)} path streams.")

    state = np.full(n_paths, initial, dtype=np.int64)
    time = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    n_jumps = np.zeros(n_paths, dtype=np.int64)
    visits = np.zeros((n_paths, j_max + 1), dtype=np.int64)
    visits[:, initial] = 1
    occupation = np.zeros((n_paths, j_max + 1))
    exits = np.full(n_paths, -1, dtype=np.int64)
    exit_times = np.full(n_paths, np.nan)
    observed = np.full((len(obs), n_paths), unresolved, dtype=np.int64)
    events = [(np.arange(n_paths), state.copy(), time.copy())] if keep_paths else None

    def finish(idx, code, at):
        exits[idx] = code
        exit_times[idx] = at
        alive[idx] = False

    while np.any(alive):
        idx = np.flatnonzero(alive)
        j = state[idx]
        if per_path:
            hold, u = rng.standard_exponential(idx), rng.random(idx)
        else:
            hold, u = rng.standard_exponential(idx.size), rng.random(idx.size)
        hold = hold / rates.total(j)
        up = u < rates.p_up(j)
        t_next = time[idx] + hold

        for _o, _t in enumerate(obs):
            seen = (time[idx] <= _t) & (t_next > _t)
            observed[_o, idx[seen]] = j[seen]

        censored = t_next > t_max
        cidx = idx[censored]
        occupation[cidx, j[censored]] += t_max - time[cidx]
        finish(cidx, 2, t_max)

        moved = ~censored
        midx, jm = idx[moved], j[moved]
        occupation[midx, jm] += hold[moved]
        new = jm + np.where(up[moved], 1, -1)
        time[midx] = t_next[moved]
        state[midx] = new
        n_jumps[midx] += 1
        visits[midx, new] += 1
        if keep_paths:
            events.append((midx, new, time[midx].copy()))

        at_zero = midx[new == 0]
        if boundary == Boundary.ABSORBING:
            finish(at_zero, 0, time[at_zero])
        else:
            state[at_zero] = 1
            visits[at_zero, 1] += 1
            if keep_paths:
                events.append((at_zero, state[at_zero].copy(), time[at_zero].copy()))

        top = midx[(new >= j_max) | (n_jumps[midx] >= jump_budget)]
        top = top[alive[top]]
        finish(top, 1, time[top])

    # Observation times after a path's exit.
    for _o, _t in enumerate(obs):
        pending = observed[_o] == unresolved
        observed[_o, pending & (exits == 0)] = 0
        observed[_o, pending & (exits == 1)] = EXPLODED_STATE
        observed[_o, pending & (exits == 2)] = state[pending & (exits == 2)]

    paths = None
    if keep_paths:
        path_idx, path_states, path_times = (np.concatenate(_x) for _x in zip(*events))
        order = np.argsort(path_idx, kind="stable")
        splits = np.cumsum(np.bincount(path_idx, minlength=n_paths))[:-1]
        paths = [
            JumpPath(_s, _t, _EXITS[exits[_k]], float(exit_times[_k]), seed)
            for _k, (_s, _t) in enumerate(
                zip(np.split(path_states[order], splits), np.split(path_times[order], splits))
            )
        ]

    return ChainSample(
        exits=exits,
        exit_times=exit_times,
        visits=visits,
        occupation=occupation,
        observe_times=obs,
        observed=observed,
        n_jumps=n_jumps,
        boundary=boundary,
        j_max=j_max,
        initial=initial,
        paths=paths,
    )


def gillespie_sample(
    rng: np.random.Generator,
    rates: BDRates,
    initial: int = 1,
    t_max: float = np.inf,
    j_max: int = 60,
    jump_budget: int = 10**6,
    boundary: Boundary = Boundary.ABSORBING,
    seed: Optional[int] = None,
) -> JumpPath:
    """
    Samples a single path. Equivalent to a one-path :func:`sample_chain` call on the same stream.
    """
    return sample_chain(
        rng,
        rates,
        1,
        initial=initial,
        t_max=t_max,
        j_max=j_max,
        jump_budget=jump_budget,
        boundary=boundary,
        keep_paths=True,
        seed=seed,
    ).paths[0]


def sample_paths(
    rates: BDRates,
    n_paths: int,
    master_seed: int = 0,
    batch_size: int = 10_000,
    threads: int = 0,
    verbose: bool = False,
    **kwargs,
) -> ChainSample:
    """
    Samples ``n_paths`` paths in batches, path ``i`` drawing from ``rng.path_stream(master_seed, i)``. Batches are merged by index, so the result depends on neither ``batch_size`` nor ``threads``.

    :param kwargs: Forwarded to :func:`sample_chain`.
    """
    if n_paths < 1:
        raise ValueError(f"At least one path is required, got {n_paths}.")
    starts = list(range(0, n_paths, batch_size))

    def run_batch(index):
        size = min(batch_size, n_paths - starts[index])
        return sample_chain(
            rng_mdl.PathStreams(master_seed, starts[index], size),
            rates,
            size,
            seed=master_seed,
            **kwargs,
        )

    results = {}
    for index, out in parallelizer(threads, verbose=verbose, desc="chain paths").run(
        run_batch, range(len(starts))
    ):
        if isinstance(out, WorkerException):
            raise out.error
        results[index] = out
    sample = ChainSample.concatenate([results[_b] for _b in range(len(starts))])
    LOGGER.info(f"Sampled {n_paths} chain paths: {sample.exit_fractions()}.")
    return sample


# Path statistics


def _check_sample_size(n: int, what: str):
    if n < MIN_SAMPLES:
        message = f"Only {n} samples for {what}; goodness-of-fit results are unreliable below {MIN_SAMPLES}."
        LOGGER.warning(message)
        warnings.warn(message, InsufficientSamplesWarning)


def _law_or_none(rates, k, boundary, initial) -> Optional[VisitLaw]:
    try:
        return visit_law(rates, k, boundary, initial)
    except (ArithmeticError, ValueError) as err:
        LOGGER.debug(f"No visit law for level {k}: {err}")
        return None


@dataclass
class CountStats:
    """
    Empirical visit-count summary at level ``k`` against the geometric law (``None`` fields when no law applies).
    """

    k: int
    n_paths: int
    mean: float
    se: float
    variance: float
    target_mean: Optional[float]
    success: Optional[float]
    chi2: Optional[float]
    p_value: Optional[float]

    @property
    def z(self) -> Optional[float]:
        if self.target_mean is None or self.se == 0:
            return None
        return (self.mean - self.target_mean) / self.se


def visit_count_stats(sample: ChainSample, k: int, rates: BDRates) -> CountStats:
    counts = sample.visits[:, k]
    n = len(counts)
    _check_sample_size(n, f"visit counts at level {k}")
    law = _law_or_none(rates, k, sample.boundary, sample.initial)
    chi2 = p_value = None
    if law is not None:
        chi2, p_value = _geometric_chisquare(counts, law)
    return CountStats(
        k=k,
        n_paths=n,
        mean=float(counts.mean()),
        se=float(counts.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        variance=float(counts.var(ddof=1)) if n > 1 else 0.0,
        target_mean=None if law is None else law.mean_visits,
        success=None if law is None else law.success,
        chi2=chi2,
        p_value=p_value,
    )


def _geometric_chisquare(counts: np.ndarray, law: VisitLaw, min_expected: float = 5.0):
    """
    Pearson test of the counts against ``P(0) = 1 - reach`` and ``P(m) = reach·Geom(success)(m)`` with the tail lumped once expected counts fall below ``min_expected``.
    """
    n = len(counts)
    first = 0 if law.reach < 1.0 else 1
    top = first
    while n * law.reach * stats.geom.sf(top, law.success) >= min_expected and top < 10_000:
        top += 1
    support = np.arange(first, top + 1)
    pmf = law.reach * stats.geom.pmf(support, law.success)
    if first == 0:
        pmf[0] = 1.0 - law.reach
    pmf[-1] = 1.0 - pmf[:-1].sum()
    observed = np.array(
        [np.sum(counts == _m) for _m in support[:-1]] + [np.sum(counts >= support[-1])]
    )
    if len(support) < 2:
        return None, None
    result = stats.chisquare(observed, n * pmf)
    return float(result.statistic), float(result.pvalue)


@dataclass
class OccupationStats:
    """
    Empirical occupation-time summary at state ``n``. The Kolmogorov-Smirnov test compares the times of paths that visited ``n`` against the exponential law.
    """

    n: int
    n_paths: int
    mean: float
    se: float
    variance: float
    target_mean: Optional[float]
    ks_statistic: Optional[float]
    p_value: Optional[float]

    @property
    def z(self) -> Optional[float]:
        if self.target_mean is None or self.se == 0:
            return None
        return (self.mean - self.target_mean) / self.se


def occupation_time_stats(sample: ChainSample, n: int, rates: BDRates) -> OccupationStats:
    times = sample.occupation[:, n]
    size = len(times)
    _check_sample_size(size, f"occupation times at state {n}")
    law = _law_or_none(rates, n, sample.boundary, sample.initial)
    ks = p_value = None
    visited = times[sample.visits[:, n] > 0]
    if law is not None and len(visited) > 0:
        result = stats.kstest(
            visited, "expon", args=(0.0, law.mean_occupation_given_visit)
        )
        ks, p_value = float(result.statistic), float(result.pvalue)
    return OccupationStats(
        n=n,
        n_paths=size,
        mean=float(times.mean()),
        se=float(times.std(ddof=1) / np.sqrt(size)) if size > 1 else 0.0,
        variance=float(times.var(ddof=1)) if size > 1 else 0.0,
        target_mean=None if law is None else law.mean_occupation,
        ks_statistic=ks,
        p_value=p_value,
    )


@dataclass
class HoldingStats:
    j: int
    n_samples: int
    mean: float
    se: float
    second_moment: float
    target_mean: float
    target_second_moment: float

    def passes(self, n_se: float = 4.0, rel_tol: float = 0.05) -> bool:
        return (
            abs(self.mean - self.target_mean) <= n_se * self.se
            and abs(self.second_moment - self.target_second_moment)
            <= rel_tol * self.target_second_moment
        )


def holding_time_check(paths: Sequence[JumpPath], j: int, rates: BDRates) -> HoldingStats:
    """
    Pools the completed sojourns in state ``j`` (censored last sojourns excluded) and compares their moments with ``Exponential(μ_j + ν_j)``.
    """
    pooled = []
    for _path in paths:
        holds = _path.holding_times()
        mask = _path.states == j
        if _path.exit == Exit.CENSORED:
            mask[-1] = False
        pooled.append(holds[mask])
    pooled = np.concatenate(pooled) if pooled else np.zeros(0)
    _check_sample_size(len(pooled), f"holding times at state {j}")
    rate = float(rates.total(j))
    return HoldingStats(
        j=j,
        n_samples=len(pooled),
        mean=float(pooled.mean()),
        se=float(pooled.std(ddof=1) / np.sqrt(len(pooled))),
        second_moment=float(np.mean(pooled**2)),
        target_mean=1.0 / rate,
        target_second_moment=2.0 / rate**2,
    )


@dataclass
class EscapeStats:
    k: int
    n_excursions: int
    fraction: float
    se: float
    target: float


def excursion_escape_stats(paths: Sequence[JumpPath], k: int, rates: BDRates) -> EscapeStats:
    """
    Fraction of the steps from ``k`` to ``k + 1`` after which the path never comes back to ``k``. Censored paths are skipped.
    """
    escaped = total = 0
    for _path in paths:
        if _path.exit == Exit.CENSORED:
            continue
        s = _path.states
        ups = np.flatnonzero((s[:-1] == k) & (s[1:] == k + 1))
        if not len(ups):
            continue
        last_visit = np.flatnonzero(s == k)[-1]
        total += len(ups)
        escaped += int(np.sum(ups >= last_visit))
    fraction = escaped / total if total else float("nan")
    return EscapeStats(
        k=k,
        n_excursions=total,
        fraction=fraction,
        se=float(np.sqrt(fraction * (1 - fraction) / total)) if total else float("nan"),
        target=escape_prob_formula(rates, k),
    )


@dataclass
class StateHistogram:
    """
    Empirical state distribution at one observation time. ``probability[j]`` is the fraction of paths in state ``j`` for ``j = 0..j_max``.
    """

    time: float
    probability: np.ndarray
    se: np.ndarray
    exploded: float


def state_histogram(sample: ChainSample, index: int = 0) -> StateHistogram:
    observed = sample.observed[index]
    n = len(observed)
    counts = np.bincount(observed[observed >= 0], minlength=sample.j_max + 1)
    probability = counts / n
    return StateHistogram(
        time=float(sample.observe_times[index]),
        probability=probability,
        se=np.sqrt(probability * (1 - probability) / n),
        exploded=float(np.mean(observed == EXPLODED_STATE)),
    )


def survival_curve(sample: ChainSample, times: Sequence[float]) -> dict:
    """
    Empirical survival probabilities at ``times`` in both accountings: ``not_exploded`` counts absorbed paths as survivors and ``surviving`` does not. Censored paths count as survivors up to their censoring time.
    """
    times = np.asarray(times, dtype=float)[:, None]
    exploded_by = (sample.exits == 1)[None, :] & (sample.exit_times[None, :] <= times)
    absorbed_by = (sample.exits == 0)[None, :] & (sample.exit_times[None, :] <= times)
    return {
        "times": times[:, 0],
        "not_exploded": 1.0 - exploded_by.mean(axis=1),
        "surviving": 1.0 - (exploded_by | absorbed_by).mean(axis=1),
    }
