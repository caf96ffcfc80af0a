"""
Brownian increments, one-step integrators and the ensemble runner for the truncated stochastic systems.

Three stochastic schemes are available, all in Elsässer coordinates:

* :attr:`Scheme.ITO` -- Euler-Maruyama on the Itô system (nonlinear drift, Itô damping, dyadic multiplicative noise).
* :attr:`Scheme.STRAT_HEUN` -- Heun predictor-corrector on the Stratonovich system, which conserves the truncated energy.
* :attr:`Scheme.LINEAR` -- Euler-Maruyama on the linear system obtained by the Girsanov change of measure.

:attr:`Scheme.DETERMINISTIC` integrates the Elsässer drift with RK4 and ignores the noise.

Boundary values ``P_0, M_0, P_{N+1}, M_{N+1}`` and the increments ``dW_0`` are zero at every step.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from dyadmhd import rng as rng_mdl
from dyadmhd import validation
from dyadmhd.deterministic import BlowUpError, check_blowup, drift_pm_arrays, rk4_step_arrays
from dyadmhd.parallelization import WorkerException, parallelizer
from dyadmhd.shells import Coords, ModelParams, ShellState, from_above, from_below, h_norm_sq

LOGGER = logging.getLogger(__name__)


class Scheme(str, Enum):
    ITO = "ito"
    STRAT_HEUN = "strat_heun"
    LINEAR = "linear"
    DETERMINISTIC = "deterministic"

    @property
    def stochastic(self) -> bool:
        return self != Scheme.DETERMINISTIC


class EnsembleBlowUpError(ArithmeticError):
    """
    One or more ensemble paths blew up. Raised after every batch has run.

    :param failures: ``(path_index, step)`` pairs, sorted by path index.
    """

    def __init__(self, failures: List[Tuple[int, int]]):
        self.failures = sorted(failures)
        shown = ", ".join(f"path {_p} at step {_s}" for _p, _s in self.failures[:10])
        more = f" and {len(self.failures) - 10} more" if len(self.failures) > 10 else ""
        super().__init__(f"{len(self.failures)} paths blew up: {shown}{more}.")


@dataclass(frozen=True, eq=False)
class NoiseIncrements:
    """
    Increments of the two Brownian families over one step. ``dWp`` drives the ``P`` equations and ``dWm`` the ``M`` equations. The linear scheme reads them as ``dV`` and ``dU``.
    """

    dWp: np.ndarray
    dWm: np.ndarray
    dt: float


def sample_noise(
    rng: Union[np.random.Generator, rng_mdl.PathStreams],
    p: ModelParams,
    dt: float,
    size: Optional[int] = None,
) -> NoiseIncrements:
    """
    Draws ``2N`` independent ``Normal(0, dt)`` values, ``dWp`` first. With ``size``, draws one set per path in a single call so that a batch of one consumes the stream exactly like an unbatched draw.

    With :class:`~dyadmhd.rng.PathStreams`, path ``k`` of the batch draws its set from its own stream, in the order an unbatched draw from that stream would.
    """
    if dt <= 0:
        raise ValueError(f"Step size must be positive, got {dt}.")
    if isinstance(rng, rng_mdl.PathStreams):
        if size != len(rng):
            raise ValueError(f"Batch of {size} paths drawn from {len(rng)} path streams.")
        draws = np.moveaxis(rng.normal(np.sqrt(dt), (2, p.n_shells)), 0, 1)
        return NoiseIncrements(draws[0], draws[1], dt)
    shape = (2, p.n_shells) if size is None else (2, size, p.n_shells)
    draws = rng.normal(0.0, np.sqrt(dt), size=shape)
    return NoiseIncrements(draws[0], draws[1], dt)


# Array kernels. Inputs have shape (..., N).


def noise_term(x: np.ndarray, dW: np.ndarray, p: ModelParams) -> np.ndarray:
    """
    The dyadic noise ``σ(λ_{j-1}^θ x_{j-1} dW_{j-1} - λ_j^θ x_{j+1} dW_j)``.
    """
    lower, upper = p.couplings
    return p.sigma * (lower * from_below(x) * from_below(dW) - upper * from_above(x) * dW)


def ito_arrays(P, M, dWp, dWm, dt, p):
    fP, fM = drift_pm_arrays(P, M, p)
    c = p.ito_damping
    return (
        P + (fP - c * P) * dt + noise_term(P, dWp, p),
        M + (fM - c * M) * dt + noise_term(M, dWm, p),
    )


def heun_arrays(P, M, dWp, dWm, dt, p):
    fP, fM = drift_pm_arrays(P, M, p)
    gP, gM = noise_term(P, dWp, p), noise_term(M, dWm, p)
    P_pred, M_pred = P + fP * dt + gP, M + fM * dt + gM
    fP2, fM2 = drift_pm_arrays(P_pred, M_pred, p)
    return (
        P + 0.5 * (fP + fP2) * dt + 0.5 * (gP + noise_term(P_pred, dWp, p)),
        M + 0.5 * (fM + fM2) * dt + 0.5 * (gM + noise_term(M_pred, dWm, p)),
    )


def linear_arrays(P, M, dV, dU, dt, p):
    c = p.ito_damping
    return (
        P + noise_term(P, dV, p) - c * P * dt,
        M + noise_term(M, dU, p) - c * M * dt,
    )


_KERNELS = {
    Scheme.ITO: ito_arrays,
    Scheme.STRAT_HEUN: heun_arrays,
    Scheme.LINEAR: linear_arrays,
}


def driving_increments(P, M, dWp, dWm, dt, p, scheme) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns ``(dU, dV)``, the increments driving the ``M`` and ``P`` equations when the path is read as a solution of the linear system. They are the raw increments for the linear scheme and ``dWm + P dt/σ``, ``dWp + M dt/σ`` for the nonlinear schemes.
    """
    if scheme == Scheme.LINEAR:
        return dWm, dWp
    elif scheme in (Scheme.ITO, Scheme.STRAT_HEUN):
        return dWm + P * (dt / p.sigma), dWp + M * (dt / p.sigma)
    raise ValueError(f"Scheme {scheme} has no driving increments.")


def _step(s: ShellState, p: ModelParams, inc: NoiseIncrements, scheme: Scheme, name: str):
    s.require(Coords.ELSASSER, name)
    P, M = _KERNELS[scheme](s.first, s.second, inc.dWp, inc.dWm, inc.dt, p)
    check_blowup(1, P, M)
    return ShellState(P, M, Coords.ELSASSER)


def step_ito(s: ShellState, p: ModelParams, inc: NoiseIncrements) -> ShellState:
    """
    One Euler-Maruyama step of the Itô system. With ``sigma = 0`` this is an explicit Euler step of the Elsässer drift.
    """
    return _step(s, p, inc, Scheme.ITO, "step_ito")


def step_strat_heun(s: ShellState, p: ModelParams, inc: NoiseIncrements) -> ShellState:
    """
    One Heun predictor-corrector step of the Stratonovich system.
    """
    return _step(s, p, inc, Scheme.STRAT_HEUN, "step_strat_heun")


def step_linear(s: ShellState, p: ModelParams, inc: NoiseIncrements) -> ShellState:
    return _step(s, p, inc, Scheme.LINEAR, "step_linear")


@dataclass(eq=False)
class TrajectoryRecord:
    """
    One sample path with its measure-change accumulators at the recorded times.
    """

    times: np.ndarray
    states: List[ShellState]
    z1: np.ndarray
    z2: np.ndarray
    qv1: np.ndarray
    qv2: np.ndarray
    seed: int
    scheme: Scheme


@dataclass(eq=False)
class PathBatch:
    """
    Recorded arrays of a batch of paths integrated in lockstep. ``P`` and ``M`` have shape ``(n_records, *batch, N)`` and the accumulators ``(n_records, *batch)``.
    """

    times: np.ndarray
    P: np.ndarray
    M: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    qv1: np.ndarray
    qv2: np.ndarray

    def record(self, index=(), seed: int = 0, scheme: Scheme = Scheme.LINEAR) -> TrajectoryRecord:
        index = index if isinstance(index, tuple) else (index,)
        sel = (slice(None),) + index
        return TrajectoryRecord(
            times=self.times,
            states=[ShellState(_P, _M) for _P, _M in zip(self.P[sel], self.M[sel])],
            z1=self.z1[sel],
            z2=self.z2[sel],
            qv1=self.qv1[sel],
            qv2=self.qv2[sel],
            seed=seed,
            scheme=scheme,
        )


@validation.choices("scheme", list(Scheme))
def integrate(
    s0: ShellState,
    p: ModelParams,
    scheme: Scheme,
    dt: float,
    steps: int,
    rng: Union[np.random.Generator, rng_mdl.PathStreams],
    record_stride: int = 1,
) -> PathBatch:
    """
    Integrates one path, or a batch of paths in lockstep, and records states and measure-change accumulators.

    :param s0: Elsässer initial state of shape ``(N,)`` or ``(batch, N)``.
    :param p: Model parameters.
    :param scheme: Integration scheme.
    :param dt: Step size.
    :param steps: Number of steps.
    :param rng: Noise stream, or one stream per path of the batch; one :func:`sample_noise` call per step.
    :param record_stride: Record every ``record_stride``-th step. Step 0 and the final step are always recorded.
    """
    scheme = Scheme(scheme)
    s0.require(Coords.ELSASSER, "integrate")
    if dt <= 0 or steps < 0 or record_stride < 1:
        raise ValueError(
            f"Invalid time grid dt={dt}, steps={steps}, record_stride={record_stride}."
        )
    if scheme.stochastic:
        p.require_noise()

    batch = s0.first.shape[:-1]
    size = batch[0] if batch else None
    recorded = sorted(set(range(0, steps + 1, record_stride)) | {steps})
    n_rec = len(recorded)
    P_out = np.empty((n_rec,) + s0.first.shape)
    M_out = np.empty_like(P_out)
    acc = np.zeros((4, n_rec) + batch)

    P, M = s0.first.copy(), s0.second.copy()
    z1, z2, qv1, qv2 = (np.zeros(batch) for _ in range(4))
    P_out[0], M_out[0] = P, M
    k_rec = 1
    kernel = _KERNELS.get(scheme)
    for _step in range(1, steps + 1):
        if scheme.stochastic:
            inc = sample_noise(rng, p, dt, size)
            dU, dV = driving_increments(P, M, inc.dWp, inc.dWm, dt, p, scheme)
            z1 = z1 + np.sum(P * dU, axis=-1) / p.sigma
            z2 = z2 + np.sum(M * dV, axis=-1) / p.sigma
            qv1 = qv1 + np.sum(P**2, axis=-1) * (dt / p.sigma**2)
            qv2 = qv2 + np.sum(M**2, axis=-1) * (dt / p.sigma**2)
            P, M = kernel(P, M, inc.dWp, inc.dWm, dt, p)
        else:
            P, M = rk4_step_arrays(P, M, p, dt)
        check_blowup(_step, P, M)
        if k_rec < n_rec and recorded[k_rec] == _step:
            P_out[k_rec], M_out[k_rec] = P, M
            acc[:, k_rec] = z1, z2, qv1, qv2
            k_rec += 1

    return PathBatch(np.asarray(recorded) * dt, P_out, M_out, *acc)


@dataclass(eq=False)
class EnsembleSpec:
    """
    :param scheme: Integration scheme.
    :param params: Model parameters.
    :param s0: Elsässer initial state shared by all paths.
    :param dt: Step size.
    :param t_end: Horizon, rounded to a whole number of steps.
    :param n_paths: Number of paths.
    :param master_seed: Seed of the run. Path ``i`` draws from ``rng.path_stream(master_seed, i)``.
    :param record_stride: Steps between recorded times.
    :param batch_size: Paths per batch. Does not affect the draws.
    :param threads: Worker threads (0 or 1 runs serially).
    :param stiffness_c: Constant of the recommended step bound ``c/(σ²λ_N^{2θ})``. Exceeding it logs a warning.
    """

    scheme: Scheme
    params: ModelParams
    s0: ShellState
    dt: float
    t_end: float
    n_paths: int
    master_seed: int = 0
    record_stride: int = 1
    batch_size: int = 1000
    threads: int = 0
    stiffness_c: float = 0.1

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def batches(self) -> List[Tuple[int, int, int]]:
        """
        ``(batch_index, first_path, size)`` for every batch.
        """
        return [
            (_b, _start, min(self.batch_size, self.n_paths - _start))
            for _b, _start in enumerate(range(0, self.n_paths, self.batch_size))
        ]


@dataclass(eq=False)
class EnsembleSummary:
    """
    Ensemble moments at the recorded times. Every ``*_se`` entry is the standard error of the matching mean.
    """

    times: np.ndarray
    n_paths: int
    energy_mean: np.ndarray
    energy_se: np.ndarray
    cross_helicity_mean: np.ndarray
    P_mean: np.ndarray
    M_mean: np.ndarray
    P2_mean: np.ndarray
    P2_se: np.ndarray
    M2_mean: np.ndarray
    M2_se: np.ndarray
    shell_energy_mean: np.ndarray
    shell_energy_se: np.ndarray


def mean_and_se(x: np.ndarray, axis: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    n = x.shape[axis]
    mean = x.mean(axis=axis)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, x.std(axis=axis, ddof=1) / np.sqrt(n)


@dataclass(eq=False)
class EnsembleResult:
    spec: EnsembleSpec
    paths: PathBatch
    summary: EnsembleSummary = field(init=False)

    def __post_init__(self):
        self.summary = summarize(self.paths, self.spec.n_paths)

    @property
    def times(self) -> np.ndarray:
        return self.paths.times

    def record(self, index: int) -> TrajectoryRecord:
        return self.paths.record(index, seed=self.spec.master_seed, scheme=self.spec.scheme)

    def energy(self) -> np.ndarray:
        """
        Per-path energy, shape ``(n_records, n_paths)``.
        """
        return 0.5 * np.sum(self.paths.P**2 + self.paths.M**2, axis=-1)

    def state(self, k: int) -> ShellState:
        """
        All paths at the ``k``-th recorded time as a batched state.
        """
        return ShellState(self.paths.P[k], self.paths.M[k])

    def h_norm_integral(self) -> np.ndarray:
        """
        Per-path trapezoidal time integral of ``h_norm_sq`` over the recorded times.
        """
        values = np.stack(
            [h_norm_sq(self.state(_k), self.spec.params) for _k in range(len(self.times))]
        )
        return trapezoid(values, self.times, axis=0)

    def dissipation_fractions(self, eps: float = 1e-3, tol: float = 1e-9) -> dict:
        """
        Fractions of paths whose energy fell below ``eps*Υ(0)`` and whose energy differs from ``Υ(0)`` by more than ``tol*Υ(0)``, per recorded time.
        """
        energy = self.energy()
        e0 = energy[0]
        return {
            "below_eps": np.mean(energy < eps * e0, axis=1),
            "changed": np.mean(np.abs(energy - e0) > tol * e0, axis=1),
        }


def summarize(paths: PathBatch, n_paths: int) -> EnsembleSummary:
    P, M = paths.P.reshape(len(paths.times), n_paths, -1), paths.M.reshape(
        len(paths.times), n_paths, -1
    )
    P2, M2 = P**2, M**2
    energy_mean, energy_se = mean_and_se(0.5 * np.sum(P2 + M2, axis=-1))
    P2_mean, P2_se = mean_and_se(P2)
    M2_mean, M2_se = mean_and_se(M2)
    shell_mean, shell_se = mean_and_se(P2 + M2)
    return EnsembleSummary(
        times=paths.times,
        n_paths=n_paths,
        energy_mean=energy_mean,
        energy_se=energy_se,
        cross_helicity_mean=np.mean(np.sum(P2 - M2, axis=-1) / 4, axis=1),
        P_mean=P.mean(axis=1),
        M_mean=M.mean(axis=1),
        P2_mean=P2_mean,
        P2_se=P2_se,
        M2_mean=M2_mean,
        M2_se=M2_se,
        shell_energy_mean=shell_mean,
        shell_energy_se=shell_se,
    )


def run_ensemble(spec: EnsembleSpec, verbose: bool = False) -> EnsembleResult:
    """
    Integrates ``spec.n_paths`` paths in batches, possibly across threads, and merges the batches by path index.

    :raises EnsembleBlowUpError: after all batches have run, listing every path that blew up.
    """
    if spec.n_paths < 1:
        raise ValueError(f"At least one path is required, got {spec.n_paths}.")
    scheme = Scheme(spec.scheme)
    p = spec.params
    if scheme.stochastic and spec.dt > (bound := p.stiffness_bound(spec.stiffness_c)):
        LOGGER.warning(
            f"Step {spec.dt} exceeds the stiffness bound {bound:.3g} (c={spec.stiffness_c}) for N={p.n_shells}."
        )

    def run_batch(batch):
        _, start, size = batch
        s0 = ShellState(
            np.broadcast_to(spec.s0.first, (size, p.n_shells)),
            np.broadcast_to(spec.s0.second, (size, p.n_shells)),
        )
        return integrate(
            s0,
            p,
            scheme,
            spec.dt,
            spec.steps,
            rng_mdl.PathStreams(spec.master_seed, start, size),
            spec.record_stride,
        )

    batches = spec.batches()
    results = {}
    failures = []
    for (index, start, size), out in parallelizer(
        spec.threads, verbose=verbose, desc=f"{scheme.value} ensemble"
    ).run(run_batch, batches):
        if isinstance(out, WorkerException):
            if isinstance(out.error, BlowUpError):
                failures.extend(
                    (start + _p, out.error.step) for _p in (out.error.paths or range(size))
                )
                continue
            raise out.error
        results[index] = out
    if failures:
        raise EnsembleBlowUpError(failures)

    ordered = [results[_b[0]] for _b in batches]
    merged = PathBatch(
        ordered[0].times,
        *(
            np.concatenate([getattr(_r, _name) for _r in ordered], axis=1)
            for _name in ("P", "M", "z1", "z2", "qv1", "qv2")
        ),
    )
    LOGGER.info(
        f"Ran {spec.n_paths} {scheme.value} paths over {spec.steps} steps in {len(batches)} batches."
    )
    return EnsembleResult(spec, merged)


@dataclass(eq=False)
class HNormSweep:
    """
    Ensemble mean of ``∫ ||x(t)||²_H dt`` for increasing truncations. Growth without bound as ``N`` increases indicates that the limit paths leave ``L²(0, T; H)``.

    :param truncations: Shell counts ``N``, ascending.
    :param dts: Step used at each truncation.
    :param mean: Mean integral per truncation.
    :param se: Standard error of ``mean``.
    """

    truncations: np.ndarray
    dts: np.ndarray
    mean: np.ndarray
    se: np.ndarray

    @property
    def growth(self) -> np.ndarray:
        """
        Ratios of consecutive means.
        """
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.mean[1:] / self.mean[:-1]


def _resize(state: ShellState, n_shells: int) -> ShellState:
    first, second = np.zeros(n_shells), np.zeros(n_shells)
    keep = min(n_shells, state.n_shells)
    first[:keep], second[:keep] = state.first[:keep], state.second[:keep]
    return ShellState(first, second)


def h_norm_sweep(spec: EnsembleSpec, truncations, verbose: bool = False) -> HNormSweep:
    """
    Reruns ``spec`` at every truncation in ``truncations`` and integrates the squared H-norm along each path. The initial state is padded with zeros or cut to each ``N``. Stochastic schemes shrink the step to the stiffness bound of each ``N`` when ``spec.dt`` exceeds it.
    """
    truncations = np.array(sorted(set(int(_n) for _n in truncations)))
    if len(truncations) == 0 or truncations[0] < 2:
        raise ValueError(f"Truncations must be integers >= 2, got {truncations.tolist()}.")
    dts, means, ses = [], [], []
    for _n in truncations:
        p = spec.params.replace(n_shells=int(_n))
        dt = spec.dt
        if Scheme(spec.scheme).stochastic:
            dt = min(dt, p.stiffness_bound(spec.stiffness_c))
        stride = max(1, int(round(spec.record_stride * spec.dt / dt)))
        result = run_ensemble(
            dataclasses.replace(
                spec, params=p, s0=_resize(spec.s0, int(_n)), dt=dt, record_stride=stride
            ),
            verbose=verbose,
        )
        mean, se = mean_and_se(result.h_norm_integral()[None, :])
        dts.append(dt)
        means.append(float(mean[0]))
        ses.append(float(se[0]))
        LOGGER.info(f"H-norm integral at N={_n}: {means[-1]:.6g} ± {ses[-1]:.2g}.")
    return HNormSweep(truncations, np.array(dts), np.array(means), np.array(ses))
