"""
Forward equations for the normalized expected shell energies, and the spectral series of the birth-death chain.

The forward system is

.. math::

    \\dot e_j = -(ν_j + μ_j) e_j + ν_{j-1} e_{j-1} + μ_{j+1} e_{j+1}, \\qquad e_0 = e_{N+1} = 0,

with mass leaving through shell 1 at rate ``μ_1 e_1`` and through shell ``N`` at rate ``ν_N e_N``. The generator is tridiagonal and symmetric since ``μ_{j+1} = ν_j``. Its stiffness grows like ``λ^{2θN}``, so the default truncation ``N = 40`` needs the implicit solver.

Time-scale convention: the chain's rates carry ``σ²``, so the mean occupation of shell ``n`` is ``m_n = r_n/σ²`` and the mean escape time is ``m_∞ = r_∞/σ²``.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import sparse, stats
from scipy.integrate import solve_ivp
from scipy.special import xlogy

from dyadmhd import validation
from dyadmhd.birth_death import BDRates, Boundary, scale_function
from dyadmhd.shells import ModelParams, ShellState, normalized_profile

LOGGER = logging.getLogger(__name__)

STIFFNESS_C = 0.1
NEGATIVE_TOLERANCE = -1e-12


class StiffnessError(ValueError):
    def __init__(self, dt, bound):
        self.dt = dt
        self.bound = bound
        super().__init__(
            f"Step {dt} exceeds the explicit stiffness guard {bound:.3g}. Use a smaller step or method='implicit'."
        )


class SeriesNotConvergedError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class EnergyProfile:
    """
    Normalized expected shell energies at time ``t`` with the mass that has left through state 0 (``leaked_bottom``) and through the truncation boundary (``leaked_top``).
    """

    e: np.ndarray
    t: float = 0.0
    leaked_bottom: float = 0.0
    leaked_top: float = 0.0

    @property
    def mass(self) -> float:
        return float(np.sum(self.e))

    @property
    def ledger(self) -> float:
        return self.mass + self.leaked_bottom + self.leaked_top


def _profile_array(e0) -> np.ndarray:
    if isinstance(e0, EnergyProfile):
        return np.asarray(e0.e, dtype=float)
    if isinstance(e0, ShellState):
        return normalized_profile(e0)
    return np.asarray(e0, dtype=float)


def _rate_arrays(rates: BDRates, n_shells: int) -> Tuple[np.ndarray, np.ndarray]:
    j = np.arange(1, n_shells + 1)
    return np.asarray(rates.mu(j), dtype=float), np.asarray(rates.nu(j), dtype=float)


@validation.choices("boundary", list(Boundary))
def forward_rhs(
    e: Union[EnergyProfile, np.ndarray], rates: BDRates, boundary: Boundary = Boundary.ABSORBING
) -> Tuple[np.ndarray, float, float]:
    """
    :param e: Current profile.
    :param rates: Chain rates.
    :param boundary: With ``reflecting``, mass reaching state 0 returns to shell 1 and the bottom leak rate is zero.
    :return: ``(de/dt, bottom leak rate, top leak rate)``.
    """
    e = _profile_array(e)
    mu, nu = _rate_arrays(rates, len(e))
    bottom = mu[0] * e[0]
    de = -(mu + nu) * e
    de[1:] += nu[:-1] * e[:-1]
    de[:-1] += mu[1:] * e[1:]
    if Boundary(boundary) == Boundary.REFLECTING:
        de[0] += bottom
        bottom = 0.0
    return de, float(bottom), float(nu[-1] * e[-1])


def generator(rates: BDRates, n_shells: int, boundary: Boundary = Boundary.ABSORBING) -> sparse.csr_matrix:
    """
    Sparse generator of the forward system augmented with two leak accumulators: rows ``0..N-1`` are the shells, row ``N`` the bottom leak and row ``N+1`` the top leak. Every column sums to zero.
    """
    mu, nu = _rate_arrays(rates, n_shells)
    diagonal = np.append(-(mu + nu), [0.0, 0.0])
    if Boundary(boundary) == Boundary.REFLECTING:
        diagonal[0] += mu[0]
    matrix = sparse.diags(
        [np.append(nu[:-1], [0.0, 0.0]), diagonal, np.append(mu[1:], [0.0, 0.0])],
        [-1, 0, 1],
        shape=(n_shells + 2, n_shells + 2),
        format="lil",
    )
    if Boundary(boundary) == Boundary.ABSORBING:
        matrix[n_shells, 0] = mu[0]
    matrix[n_shells + 1, n_shells - 1] = nu[-1]
    return matrix.tocsr()


def stiffness_guard(rates: BDRates, n_shells: int, c: float = STIFFNESS_C) -> float:
    """
    Largest RK4 step ``c/(ν_N + μ_N)`` accepted by :func:`integrate_forward`.
    """
    mu, nu = _rate_arrays(rates, n_shells)
    return c / (mu[-1] + nu[-1])


@dataclass(eq=False)
class ForwardSolution:
    """
    Time series of forward profiles. ``e`` has shape ``(n_times, N)``.
    """

    times: np.ndarray
    e: np.ndarray
    leaked_bottom: np.ndarray
    leaked_top: np.ndarray
    boundary: Boundary
    method: str

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> EnergyProfile:
        return EnergyProfile(
            self.e[k], float(self.times[k]), float(self.leaked_bottom[k]), float(self.leaked_top[k])
        )

    @property
    def mass(self) -> np.ndarray:
        return self.e.sum(axis=1)

    @property
    def not_exploded(self) -> np.ndarray:
        """
        Mass that has not left through the top: ``Σe_j + leaked_bottom``.
        """
        return self.mass + self.leaked_bottom

    @property
    def ledger_error(self) -> np.ndarray:
        return np.abs(self.mass + self.leaked_bottom + self.leaked_top - self.mass[0])

    @property
    def n_negative(self) -> int:
        """
        Number of profile entries below ``-1e-12``.
        """
        return int(np.sum(self.e < NEGATIVE_TOLERANCE))


@validation.choices("method", ["auto", "rk4", "implicit"])
@validation.choices("boundary", list(Boundary))
def integrate_forward(
    e0,
    rates: BDRates,
    dt: float,
    t_end: float,
    method: str = "auto",
    boundary: Boundary = Boundary.ABSORBING,
    record_stride: int = 1,
    rtol: float = 1e-10,
    atol: float = 1e-14,
) -> ForwardSolution:
    """
    Solves the forward system from ``e0`` and records profiles every ``record_stride`` steps of size ``dt``.

    :param e0: Initial profile as an array, :class:`EnergyProfile` or Elsässer :class:`ShellState` (normalized to ``e_j = (P_j² + M_j²)/||x||²``).
    :param rates: Chain rates.
    :param dt: Step size (RK4) or output spacing (implicit).
    :param t_end: Horizon, rounded to a whole number of steps.
    :param method: ``rk4`` is explicit with the enforced guard ``dt <= 0.1/(ν_N + μ_N)``. ``implicit`` runs Radau with the exact sparse Jacobian. ``auto`` picks ``rk4`` when the guard allows it.
    :param boundary: Handling of state 0.
    :param record_stride: Steps between recorded profiles.
    :param rtol: Relative tolerance of the implicit solver.
    :param atol: Absolute tolerance of the implicit solver.
    """
    e0 = _profile_array(e0)
    n = len(e0)
    if dt <= 0 or t_end < 0:
        raise ValueError(f"Invalid time grid dt={dt}, t_end={t_end}.")
    guard = stiffness_guard(rates, n)
    if method == "auto":
        method = "rk4" if dt <= guard else "implicit"
    elif method == "rk4" and dt > guard:
        raise StiffnessError(dt, guard)

    steps = int(round(t_end / dt))
    recorded = np.array(sorted(set(range(0, steps + 1, record_stride)) | {steps}))
    times = recorded * dt
    A = generator(rates, n, boundary)
    y0 = np.append(e0, [0.0, 0.0])

    if method == "rk4":
        ys = np.empty((len(recorded), n + 2))
        ys[0] = y = y0
        k_rec = 1
        for _step in range(1, steps + 1):
            k1 = A @ y
            k2 = A @ (y + 0.5 * dt * k1)
            k3 = A @ (y + 0.5 * dt * k2)
            k4 = A @ (y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if k_rec < len(recorded) and recorded[k_rec] == _step:
                ys[k_rec] = y
                k_rec += 1
    elif steps == 0:
        ys = y0[None, :]
    else:
        result = solve_ivp(
            lambda _t, _y: A @ _y,
            (0.0, times[-1]),
            y0,
            method="Radau",
            t_eval=times,
            jac=A,
            rtol=rtol,
            atol=atol,
        )
        if not result.success:
            raise ArithmeticError(f"Forward solve failed: {result.message}")
        ys = result.y.T

    solution = ForwardSolution(
        times=times,
        e=ys[:, :n],
        leaked_bottom=ys[:, n],
        leaked_top=ys[:, n + 1],
        boundary=Boundary(boundary),
        method=method,
    )
    if solution.n_negative:
        LOGGER.warning(f"{solution.n_negative} profile entries fell below {NEGATIVE_TOLERANCE}.")
    LOGGER.debug(
        f"Forward solve ({method}, N={n}) to t={times[-1]}: mass {solution.mass[-1]:.6g}, "
        f"top leak {solution.leaked_top[-1]:.6g}, bottom leak {solution.leaked_bottom[-1]:.6g}."
    )
    return solution


def linear_em_moments(e0, p: ModelParams, dt: float, steps: int) -> np.ndarray:
    """
    Exact second moments of the Euler-Maruyama scheme for the linear system,

    .. math::

        y_j' = (1 - c_j dt)^2 y_j + σ^2 dt (λ_{j-1}^{2θ} y_{j-1} + λ_j^{2θ} y_{j+1}),

    the discrete analog of the forward system. The difference to :func:`integrate_forward` is the bias of the scheme.

    :return: Array of shape ``(steps + 1, N)``.
    """
    y = _profile_array(e0).copy()
    lower, upper = p.couplings
    damping = (1.0 - p.ito_damping * dt) ** 2
    out = np.empty((steps + 1, len(y)))
    out[0] = y
    for _step in range(1, steps + 1):
        feed = np.zeros_like(y)
        feed[1:] += lower[1:] ** 2 * y[:-1]
        feed[:-1] += upper[:-1] ** 2 * y[1:]
        y = damping * y + p.sigma**2 * dt * feed
        out[_step] = y
    return out


# Spectral quantities


@dataclass(frozen=True)
class SeriesValue:
    """
    A series that is either finite with ``value`` or divergent, in which case ``value`` is the partial sum reached, a lower bound of the series.
    """

    value: float
    divergent: bool = False
    terms: int = 0

    def __str__(self):
        if self.divergent:
            return f"divergent (partial sum {self.value:.6g} after {self.terms} terms)"
        return f"{self.value:.12g}"


def _sum_to_tolerance(term: Callable[[np.ndarray], np.ndarray], tol: float, max_terms: int, chunk: int = 4096):
    """
    Sums ``term(n)`` for ``n = 1, 2, ...`` until a term falls below ``tol`` times the running sum while terms are decreasing.
    """
    total, n_done = 0.0, 0
    while n_done < max_terms:
        n = np.arange(n_done + 1, min(n_done + chunk, max_terms) + 1)
        values = term(n)
        total += float(values.sum())
        n_done = int(n[-1])
        if len(values) > 1 and values[-1] <= values[-2] and values[-1] <= tol * total:
            return total, n_done
    raise SeriesNotConvergedError(
        f"Series did not reach tolerance {tol} within {max_terms} terms (partial sum {total:.6g})."
    )


@dataclass(frozen=True, eq=False)
class SpectralQuantities:
    """
    :param r_n: Tail sums ``Σ_{j≥n} λ_j^{-2θ}`` for ``n = 1..len(r_n)``.
    :param r_inf: ``Σ_n r_n = Σ_n n λ_n^{-2θ}``.
    :param R: ``Σ_k k/ν_k``; finite means the backward equation has only the trivial bounded solution.
    :param S: The uniqueness series of the forward equation; each term is at least ``σ⁻²``.
    :param A: ``-Σ m_n ln m_n``.
    :param alpha: ``A/m_∞ + ln m_∞``.
    :param alpha_partial: ``-Σ (r_n/r_∞) ln(r_n/r_∞)`` from numerically summed tails, an independent evaluation of ``alpha``.
    """

    sigma: float
    r_n: np.ndarray
    r_inf: float
    r_inf_partial: float
    R: SeriesValue
    S: SeriesValue
    A: float
    alpha: float
    alpha_partial: float

    @property
    def mean_occupation(self) -> np.ndarray:
        return self.r_n / self.sigma**2

    @property
    def mean_escape(self) -> float:
        return self.r_inf / self.sigma**2

    @property
    def decay_rate(self) -> float:
        """
        The asymptotic survival decay rate ``1/m_∞``.
        """
        return 1.0 / self.mean_escape

    def equivalence_condition(self, upsilon0: float) -> bool:
        """
        Sufficient condition ``Υ(0) < 1/m_∞`` for the laws of the linear and nonlinear systems to be equivalent.
        """
        return upsilon0 < self.decay_rate

    def energy_bound_rate(self, C: float) -> Optional[float]:
        """
        Optimal asymptotic L¹ decay rate ``(σ²/r_∞)(1 - √(C r_∞)/σ²)²`` of the nonlinear energy for paths bounded by ``C``, or ``None`` when ``C r_∞ >= σ⁴`` and no decay follows.
        """
        ratio = np.sqrt(C * self.r_inf) / self.sigma**2
        if ratio >= 1:
            return None
        return self.decay_rate * (1 - ratio) ** 2


def spectral_quantities(
    p: ModelParams, tol: float = 1e-14, max_terms: int = 1_000_000, s_terms: int = 200
) -> SpectralQuantities:
    """
    Closed forms and series of the chain started at shell 1, with ``x = λ^{-2θ}``:
    ``r_n = x^n/(1-x)`` and ``r_∞ = x/(1-x)²``.

    :param p: Model parameters (``sigma != 0``).
    :param tol: Relative tolerance of every series.
    :param max_terms: Term cap; exceeding it raises :class:`SeriesNotConvergedError`.
    :param s_terms: Terms evaluated for the ``S`` series before declaring divergence.
    """
    p.require_noise()
    x = p.lam ** (-2.0 * p.theta)
    sigma2 = p.sigma**2

    # The backward series for R has terms (1/ν_k)(1 + μ_k/ν_{k-1} + ... + μ_k...μ_2/(ν_{k-1}...ν_1)).
    # Every ratio μ_i/ν_{i-1} equals 1, so the k-th term telescopes to k/ν_k.
    r_inf_partial, terms = _sum_to_tolerance(lambda n: n * x**n, tol, max_terms)
    r_inf = x / (1 - x) ** 2
    R = SeriesValue(r_inf_partial / sigma2, False, terms)

    n = np.arange(1, terms + 1)
    r_n = x**n / (1 - x)
    r_n = r_n[r_n > 0]

    # S_k = (1/μ_{k+1}) Σ_{i=0}^{k} Π ν/μ over the top i levels = σ⁻² Σ_{i=0}^{k} x^i >= σ⁻².
    k = np.arange(1, s_terms + 1)
    S_terms = np.array([np.sum(x ** np.arange(_k + 1)) for _k in k]) / sigma2
    S_total = float(S_terms.sum())
    S = SeriesValue(S_total, bool(np.all(S_terms >= 1 / sigma2)), s_terms)

    m_n, m_inf = r_n / sigma2, r_inf / sigma2
    A = float(-np.sum(xlogy(m_n, m_n)))
    alpha = A / m_inf + np.log(m_inf)

    # Independent path: tails from reversed cumulative sums of the raw terms.
    tails = np.cumsum((x ** np.arange(1, terms + 1))[::-1])[::-1]
    tails = tails[tails > 0]
    weights = tails / tails.sum()
    alpha_partial = float(-np.sum(xlogy(weights, weights)))

    return SpectralQuantities(
        sigma=p.sigma,
        r_n=r_n,
        r_inf=r_inf,
        r_inf_partial=r_inf_partial,
        R=R,
        S=S,
        A=A,
        alpha=float(alpha),
        alpha_partial=alpha_partial,
    )


def survival_bounds(q: SpectralQuantities, times) -> Tuple[np.ndarray, np.ndarray]:
    """
    ``(exp(-t/m_1), min(1, exp(-t/m_∞ + α)))``, the lower and upper bounds of the probability that the chain from shell 1 has not exploded by ``t``.
    """
    times = np.asarray(times, dtype=float)
    lower = np.exp(-times / q.mean_occupation[0])
    upper = np.minimum(1.0, np.exp(-times / q.mean_escape + q.alpha))
    return lower, upper


@dataclass(eq=False)
class StartPointSurvival:
    """
    Explosion-only survival ``Σe + leaked_bottom`` of the forward system started from point masses at several shells, and optionally from a general profile.

    :param start_shells: Start shells, ascending.
    :param not_exploded: Survival curves, shape ``(len(start_shells), n_times)``.
    :param absorbed: Mass leaked through state 0 by the horizon, per start shell.
    :param remaining: Mass still in the shells at the horizon, per start shell.
    :param predicted_absorbed: ``1 - S(k)/S(N+1)``, the probability that the chain from ``k`` hits 0 before leaving the truncation.
    :param dominated: Survival from the lowest start shell is at least the survival from every other start at every time.
    :param absorption_consistent: Every ``predicted_absorbed`` lies in ``[absorbed, absorbed + remaining]``.
    """

    start_shells: np.ndarray
    times: np.ndarray
    not_exploded: np.ndarray
    absorbed: np.ndarray
    remaining: np.ndarray
    predicted_absorbed: np.ndarray
    dominated: bool
    absorption_consistent: bool
    profile_not_exploded: Optional[np.ndarray] = None
    profile_dominated: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return self.dominated and self.absorption_consistent and self.profile_dominated is not False


def start_point_survival(
    rates: BDRates,
    n_shells: int,
    dt: float,
    t_end: float,
    start_shells=(1, 2, 3),
    profile=None,
    method: str = "implicit",
    slack: float = 1e-8,
) -> StartPointSurvival:
    """
    Solves the absorbing forward system from point masses at ``start_shells`` (and from ``profile`` when given) and compares the curves with each other and with the gambler's-ruin absorption probabilities of the scale function. Survival from shell 1 never falls below the survival from a higher shell or from any profile.

    :raises ValueError: if a start shell lies outside ``1..n_shells``, or a profile is given without shell 1 among the start shells.
    """
    start_shells = np.array(sorted(set(int(_k) for _k in start_shells)))
    if start_shells[0] < 1 or start_shells[-1] > n_shells:
        raise ValueError(f"Start shells must lie in 1..{n_shells}, got {start_shells.tolist()}.")
    if profile is not None and start_shells[0] != 1:
        raise ValueError("Comparing a profile needs shell 1 among the start shells.")

    def solve(e0):
        return integrate_forward(e0, rates, dt, t_end, method=method, boundary=Boundary.ABSORBING)

    solutions = []
    for _k in start_shells:
        e0 = np.zeros(n_shells)
        e0[_k - 1] = 1.0
        solutions.append(solve(e0))
    not_exploded = np.array([_s.not_exploded for _s in solutions])
    absorbed = np.array([_s.leaked_bottom[-1] for _s in solutions])
    remaining = np.array([_s.mass[-1] for _s in solutions])
    top = scale_function(rates, n_shells + 1)
    predicted = np.array([1.0 - scale_function(rates, _k) / top for _k in start_shells])

    out = StartPointSurvival(
        start_shells=start_shells,
        times=solutions[0].times,
        not_exploded=not_exploded,
        absorbed=absorbed,
        remaining=remaining,
        predicted_absorbed=predicted,
        dominated=bool(np.all(not_exploded[1:] <= not_exploded[0] + slack)),
        absorption_consistent=bool(
            np.all((absorbed <= predicted + slack) & (predicted <= absorbed + remaining + slack))
        ),
    )
    if profile is not None:
        e0 = _profile_array(profile)
        total = e0.sum()
        if total > 0:
            curve = solve(e0 / total).not_exploded
            out.profile_not_exploded = curve
            out.profile_dominated = bool(np.all(curve <= not_exploded[0] + slack))
    return out


def finite_time_decay_bound(
    times, upsilon0: float, C: float, q: SpectralQuantities, exponents=np.linspace(1.0, 50.0, 4901)
) -> np.ndarray:
    """
    Bound on the expected nonlinear energy at finite times for paths bounded by ``C``:
    ``Υ(0) min_p exp(C(p-1)t/σ²) exp((1 - 1/p)(α - t/m_∞))``, minimized over the Hölder exponent ``p`` on a grid. ``p = 1`` gives the trivial bound ``Υ(0)``.
    """
    times = np.asarray(times, dtype=float)[:, None]
    p = np.asarray(exponents)[None, :]
    log_bound = C * (p - 1) * times / q.sigma**2 + (1 - 1 / p) * (
        q.alpha - times / q.mean_escape
    )
    return upsilon0 * np.exp(log_bound.min(axis=1))


@dataclass
class DecayFit:
    slope: float
    slope_se: float
    intercept: float
    t_start: float
    t_end: float
    n_points: int


def fit_tail_slope(times, values, tail_fraction: float = 0.5) -> Optional[DecayFit]:
    """
    Least-squares slope of ``log(values)`` over the last ``tail_fraction`` of the time span. Returns ``None`` with fewer than three positive points in the window.
    """
    times, values = np.asarray(times, dtype=float), np.asarray(values, dtype=float)
    start = times[0] + (1 - tail_fraction) * (times[-1] - times[0])
    window = (times >= start) & (values > 0)
    if np.sum(window) < 3:
        return None
    fit = stats.linregress(times[window], np.log(values[window]))
    return DecayFit(
        slope=float(fit.slope),
        slope_se=float(fit.stderr),
        intercept=float(fit.intercept),
        t_start=float(times[window][0]),
        t_end=float(times[window][-1]),
        n_points=int(np.sum(window)),
    )


def is_decreasing(means, ses, n_se: float = 2.0) -> bool:
    """
    ``True`` if no recorded increase exceeds ``n_se`` combined standard errors and the last mean lies below the first.
    """
    means, ses = np.asarray(means), np.asarray(ses)
    margin = n_se * np.sqrt(ses[1:] ** 2 + ses[:-1] ** 2)
    return bool(np.all(np.diff(means) <= margin) and means[-1] < means[0])


@dataclass
class DecayReport:
    trivial: bool
    threshold: float
    """ ``-1/m_∞``. """
    forward_fit: Optional[DecayFit] = None
    forward_consistent: Optional[bool] = None
    lower_bound_holds: Optional[bool] = None
    """ ``exp(-t/m_1) <= Σe + leaked_bottom``. """
    upper_bound_holds_mass: Optional[bool] = None
    """ ``Σe <= exp(-t/m_∞ + α)``. """
    upper_bound_holds_not_exploded: Optional[bool] = None
    """ ``Σe + leaked_bottom <= exp(-t/m_∞ + α)``. """
    energy_bound: Optional[float] = None
    ensemble_threshold: Optional[float] = None
    ensemble_fit: Optional[DecayFit] = None
    ensemble_decreasing: Optional[bool] = None
    ensemble_consistent: Optional[bool] = None
    finite_time_bound: Optional[np.ndarray] = None


def decay_report(
    solution: ForwardSolution,
    q: SpectralQuantities,
    summary=None,
    energy_bound: Optional[float] = None,
    tail_fraction: float = 0.5,
    n_se: float = 2.0,
    slack: float = 1e-9,
) -> DecayReport:
    """
    Compares the forward survival mass with the spectral bounds and, optionally, the decay of an ensemble energy with the bound for paths bounded by ``energy_bound``.

    :param solution: Forward solution started from a normalized profile.
    :param q: Spectral quantities of the same parameters.
    :param summary: Optional :class:`~dyadmhd.sde.EnsembleSummary` of a nonlinear ensemble.
    :param energy_bound: The constant ``C``; defaults to the initial ensemble energy.
    :param tail_fraction: Fraction of the time span used for slope fits.
    :param n_se: Standard errors allowed in monotonicity and slope comparisons.
    :param slack: Absolute slack for the bound comparisons.
    """
    threshold = -q.decay_rate
    if np.all(solution.e[0] == 0):
        return DecayReport(trivial=True, threshold=threshold)

    lower, upper = survival_bounds(q, solution.times)
    fit = fit_tail_slope(solution.times, solution.mass, tail_fraction)
    report = DecayReport(
        trivial=False,
        threshold=threshold,
        forward_fit=fit,
        forward_consistent=None if fit is None else fit.slope <= threshold + n_se * fit.slope_se,
        lower_bound_holds=bool(np.all(lower <= solution.not_exploded + slack)),
        upper_bound_holds_mass=bool(np.all(solution.mass <= upper + slack)),
        upper_bound_holds_not_exploded=bool(np.all(solution.not_exploded <= upper + slack)),
    )

    if summary is not None:
        C = float(summary.energy_mean[0]) if energy_bound is None else energy_bound
        rate = q.energy_bound_rate(C)
        report.energy_bound = C
        report.ensemble_threshold = None if rate is None else -rate
        report.ensemble_decreasing = is_decreasing(summary.energy_mean, summary.energy_se, n_se)
        report.ensemble_fit = fit_tail_slope(summary.times, summary.energy_mean, tail_fraction)
        report.finite_time_bound = finite_time_decay_bound(
            summary.times, float(summary.energy_mean[0]), C, q
        )
        if report.ensemble_fit is not None and rate is not None:
            report.ensemble_consistent = (
                report.ensemble_fit.slope
                <= -rate + n_se * report.ensemble_fit.slope_se
            )
    return report
