"""
Measure-change accumulators, Radon-Nikodym weights and the reweighting checks that link the linear and nonlinear systems.

All stochastic integrals use the left-point (Itô) discretization. The accumulators of a path are

* ``z1 = σ⁻¹ Σ_j ∫ P_j dU_j`` and ``qv1 = σ⁻² ∫ Σ_j P_j² ds``,
* ``z2 = σ⁻¹ Σ_j ∫ M_j dV_j`` and ``qv2 = σ⁻² ∫ Σ_j M_j² ds``,

where ``dU`` and ``dV`` are the increments driving the linear system (see :func:`dyadmhd.sde.driving_increments`). Moments are evaluated under the single simulated measure rather than separately on the ``P`` and ``M`` marginals.
"""

import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from dyadmhd import validation
from dyadmhd.kolmogorov import spectral_quantities
from dyadmhd.sde import (
    EnsembleResult,
    NoiseIncrements,
    PathBatch,
    Scheme,
    driving_increments,
    mean_and_se,
)
from dyadmhd.shells import Coords, ModelParams, ShellState

LOGGER = logging.getLogger(__name__)

WEIGHT_CLIP_LOG = 50.0


class Direction(str, Enum):
    LINEAR_TO_NONLINEAR = "linear_to_nonlinear"
    """ Density of the nonlinear law with respect to the linear one, ``exp(z1 - qv1/2) exp(z2 - qv2/2)``. """
    NONLINEAR_TO_LINEAR = "nonlinear_to_linear"
    """ The reciprocal density. """


@dataclass(frozen=True)
class GirsanovAccumulator:
    z1: float = 0.0
    z2: float = 0.0
    qv1: float = 0.0
    qv2: float = 0.0
    t: float = 0.0


@validation.choices("scheme", [Scheme.LINEAR, Scheme.ITO, Scheme.STRAT_HEUN])
def accumulate(
    acc: GirsanovAccumulator,
    s: ShellState,
    inc: NoiseIncrements,
    p: ModelParams,
    scheme: Scheme = Scheme.LINEAR,
) -> GirsanovAccumulator:
    """
    Adds one step to the accumulators.

    :param acc: Accumulators before the step.
    :param s: The pre-step state (Elsässer).
    :param inc: The noise increments of the step.
    :param p: Model parameters (``sigma != 0``).
    :param scheme: Scheme the path was integrated with.
    """
    p.require_noise()
    s.require(Coords.ELSASSER, "accumulate")
    P, M, dt = s.first, s.second, inc.dt
    dU, dV = driving_increments(P, M, inc.dWp, inc.dWm, dt, p, Scheme(scheme))
    return GirsanovAccumulator(
        z1=acc.z1 + float(np.sum(P * dU)) / p.sigma,
        z2=acc.z2 + float(np.sum(M * dV)) / p.sigma,
        qv1=acc.qv1 + float(np.sum(P**2)) * dt / p.sigma**2,
        qv2=acc.qv2 + float(np.sum(M**2)) * dt / p.sigma**2,
        t=acc.t + dt,
    )


class ClipCounter:
    """
    Thread-safe count of clipped weights.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int = 1):
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


def log_weight(z1, z2, qv1, qv2, direction: Direction):
    log_w = (z1 - 0.5 * qv1) + (z2 - 0.5 * qv2)
    return log_w if Direction(direction) == Direction.LINEAR_TO_NONLINEAR else -log_w


@validation.choices("direction", list(Direction))
def rn_weight(
    acc: GirsanovAccumulator,
    direction: Direction,
    counter: Optional[ClipCounter] = None,
    clip_log: float = WEIGHT_CLIP_LOG,
) -> float:
    """
    Radon-Nikodym weight of a finalized accumulator. Log-weights above ``clip_log`` are clipped to it and counted in ``counter``.
    """
    log_w = log_weight(acc.z1, acc.z2, acc.qv1, acc.qv2, direction)
    if log_w > clip_log:
        if counter is not None:
            counter.add()
        log_w = clip_log
    return float(np.exp(log_w))


@validation.choices("direction", list(Direction))
def weights(
    paths: PathBatch,
    k: int = -1,
    direction: Direction = Direction.LINEAR_TO_NONLINEAR,
    clip_log: float = WEIGHT_CLIP_LOG,
) -> Tuple[np.ndarray, int]:
    """
    Weights of every path at the ``k``-th recorded time.

    :return: The (clipped) weights and the number of clipped entries.
    """
    log_w = log_weight(paths.z1[k], paths.z2[k], paths.qv1[k], paths.qv2[k], direction)
    clipped = log_w > clip_log
    return np.exp(np.minimum(log_w, clip_log)), int(np.sum(clipped))


def effective_sample_size(w: np.ndarray) -> float:
    """
    Kish effective sample size ``(Σw)²/Σw²``.
    """
    total = np.sum(w**2)
    return float(np.sum(w) ** 2 / total) if total > 0 else 0.0


def p1_squared(P: np.ndarray, M: np.ndarray) -> np.ndarray:
    return P[..., 0] ** 2


@dataclass
class ReweightingEstimate:
    time: float
    reweighted_mean: float
    reweighted_se: float
    direct_mean: float
    direct_se: float
    weight_mean: float
    weight_se: float
    ess: float
    n_clipped: int
    n_se: float = 4.0

    @property
    def discrepancy(self) -> float:
        """
        Difference of the two estimates in combined standard errors.
        """
        scale = np.hypot(self.reweighted_se, self.direct_se)
        diff = abs(self.reweighted_mean - self.direct_mean)
        return float(diff / scale) if scale > 0 else (0.0 if diff == 0 else np.inf)

    @property
    def estimates_agree(self) -> bool:
        return self.discrepancy <= self.n_se

    @property
    def weight_mean_is_one(self) -> bool:
        return abs(self.weight_mean - 1) <= self.n_se * self.weight_se

    def passes(self) -> bool:
        return self.estimates_agree and self.weight_mean_is_one and self.n_clipped == 0


def reweighting_check(
    linear: EnsembleResult,
    nonlinear: EnsembleResult,
    functional: Callable[[np.ndarray, np.ndarray], np.ndarray] = p1_squared,
    k: int = -1,
    n_se: float = 4.0,
    clip_log: float = WEIGHT_CLIP_LOG,
) -> ReweightingEstimate:
    """
    Estimates ``E[f(x_t)]`` under the nonlinear law twice: by weighting a linear-scheme ensemble and directly from a nonlinear ensemble.

    :param linear: Ensemble of the linear scheme.
    :param nonlinear: Independent ensemble of a nonlinear scheme with the same parameters and initial state.
    :param functional: Maps batched ``(P, M)`` at one time to one value per path.
    :param k: Recorded time index, shared by both ensembles.
    :param n_se: Standard errors allowed by :meth:`ReweightingEstimate.passes`.
    :param clip_log: Log-weight clip.
    """
    if not np.allclose(linear.times[k], nonlinear.times[k]):
        raise ValueError(
            f"Ensembles are recorded at different times ({linear.times[k]} and {nonlinear.times[k]})."
        )
    w, n_clipped = weights(linear.paths, k, Direction.LINEAR_TO_NONLINEAR, clip_log)
    f_linear = functional(linear.paths.P[k], linear.paths.M[k])
    f_direct = functional(nonlinear.paths.P[k], nonlinear.paths.M[k])
    reweighted_mean, reweighted_se = mean_and_se(w * f_linear, axis=0)
    direct_mean, direct_se = mean_and_se(f_direct, axis=0)
    weight_mean, weight_se = mean_and_se(w, axis=0)
    if n_clipped:
        LOGGER.warning(f"Clipped {n_clipped} weights at log-weight {clip_log}.")
    return ReweightingEstimate(
        time=float(linear.times[k]),
        reweighted_mean=float(reweighted_mean),
        reweighted_se=float(reweighted_se),
        direct_mean=float(direct_mean),
        direct_se=float(direct_se),
        weight_mean=float(weight_mean),
        weight_se=float(weight_se),
        ess=effective_sample_size(w),
        n_clipped=n_clipped,
        n_se=n_se,
    )


@dataclass
class IntegrabilityReport:
    """
    Exponential-integrability diagnostics of an ensemble at its final recorded time.

    :param weight_mean: Mean linear-to-nonlinear weight, 1 for a martingale.
    :param novikov_mean: Mean of ``exp((qv1 + qv2)/2)``. A finite sample variance supports the mean-one property.
    :param exp_qv1_mean: Mean of ``exp(σ⁻² ∫ Σ P_j² dt)``.
    :param exp_qv2_mean: Mean of ``exp(σ⁻² ∫ Σ M_j² dt)``.
    :param P4_integral: ``∫ E[P_j⁴] dt`` per shell.
    :param M4_integral: ``∫ E[M_j⁴] dt`` per shell.
    :param P2_integral: ``∫ E[P_j²] dt`` per shell.
    :param tail_ratio: ``P2_integral`` at shell ``N - 1`` over its value at shell 1 (0 for a zero run).
    :param upsilon0: Initial energy.
    :param condition: Whether ``Υ(0) < σ²/r_∞``.
    """

    times: np.ndarray
    n_paths: int
    weight_mean: float
    weight_se: float
    ess: float
    n_clipped: int
    novikov_mean: float
    novikov_var: float
    exp_qv1_mean: float
    exp_qv2_mean: float
    P4_integral: np.ndarray
    M4_integral: np.ndarray
    P2_integral: np.ndarray
    tail_ratio: float
    upsilon0: float
    condition_threshold: float
    condition: bool
    tail_decreasing: bool = field(init=False)

    def __post_init__(self):
        self.tail_decreasing = bool(np.all(np.diff(self.P2_integral) <= 0))


def integrability_report(
    result: EnsembleResult, p: Optional[ModelParams] = None, clip_log: float = WEIGHT_CLIP_LOG
) -> IntegrabilityReport:
    """
    Collects weight, Novikov and class-K statistics of ``result`` and the sufficient condition for equivalence of the linear and nonlinear laws.
    """
    p = p or result.spec.params
    paths = result.paths
    times = paths.times

    w, n_clipped = weights(paths, -1, Direction.LINEAR_TO_NONLINEAR, clip_log)
    weight_mean, weight_se = mean_and_se(w, axis=0)
    with np.errstate(over="ignore"):
        novikov = np.exp(0.5 * (paths.qv1[-1] + paths.qv2[-1]))
        exp_qv1 = np.exp(paths.qv1[-1])
        exp_qv2 = np.exp(paths.qv2[-1])

    upsilon0 = float(result.summary.energy_mean[0])
    threshold = spectral_quantities(p).decay_rate
    P2_integral = trapezoid(np.mean(paths.P**2, axis=1), times, axis=0)
    leading = P2_integral[0]
    tail_ratio = float(P2_integral[-2] / leading) if leading > 0 else 0.0

    return IntegrabilityReport(
        times=times,
        n_paths=paths.P.shape[1],
        weight_mean=float(weight_mean),
        weight_se=float(weight_se),
        ess=effective_sample_size(w),
        n_clipped=n_clipped,
        novikov_mean=float(np.mean(novikov)),
        novikov_var=float(np.var(novikov, ddof=1)) if len(novikov) > 1 else 0.0,
        exp_qv1_mean=float(np.mean(exp_qv1)),
        exp_qv2_mean=float(np.mean(exp_qv2)),
        P4_integral=trapezoid(np.mean(paths.P**4, axis=1), times, axis=0),
        M4_integral=trapezoid(np.mean(paths.M**4, axis=1), times, axis=0),
        P2_integral=P2_integral,
        tail_ratio=tail_ratio,
        upsilon0=upsilon0,
        condition_threshold=threshold,
        condition=upsilon0 < threshold,
    )
