"""
Deterministic dyadic MHD vector fields and a fixed-step fourth-order integrator.

The truncated (a, b) system conserves energy and cross helicity, and the truncated Elsässer system conserves ``ΣP_j²`` and ``ΣM_j²`` separately. Both are exact in exact arithmetic, so the integrator's drift in these quantities measures its own error.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from dyadmhd.shells import Coords, ModelParams, ShellState, from_above, from_below

LOGGER = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e12


class BlowUpError(ArithmeticError):
    """
    A state component became non-finite or exceeded :data:`BLOWUP_THRESHOLD`.

    :param step: The index of the step that produced the offending state.
    :param paths: Batch-local indices of the offending paths (empty for unbatched states).
    """

    def __init__(self, step: int, paths: Sequence[int] = ()):
        self.step = step
        self.paths = list(paths)
        super().__init__(
            f"Blow-up at step {step}"
            + (f" in paths {self.paths}." if self.paths else ".")
        )


def check_blowup(step: int, *arrays: np.ndarray):
    """
    Raises :class:`BlowUpError` if any entry is non-finite or larger than :data:`BLOWUP_THRESHOLD` in magnitude. NaNs fail the ``<=`` comparison and are caught too.
    """
    ok = np.ones(arrays[0].shape[:-1], dtype=bool)
    for _x in arrays:
        ok &= np.all(np.abs(_x) <= BLOWUP_THRESHOLD, axis=-1)
    if not np.all(ok):
        raise BlowUpError(step, np.flatnonzero(~ok).tolist() if ok.ndim else [])


def drift_pm_arrays(
    P: np.ndarray, M: np.ndarray, p: ModelParams
) -> Tuple[np.ndarray, np.ndarray]:
    lower, upper = p.couplings
    feed = lower * from_below(M) * from_below(P)
    return feed - upper * M * from_above(P), feed - upper * P * from_above(M)


def drift_ab_arrays(
    a: np.ndarray, b: np.ndarray, p: ModelParams
) -> Tuple[np.ndarray, np.ndarray]:
    lower, upper = p.couplings
    a_up, b_up = from_above(a), from_above(b)
    da = -(upper * a * a_up - lower * from_below(a) ** 2) + (
        upper * b * b_up - lower * from_below(b) ** 2
    )
    db = -(upper * a * b_up - upper * b * a_up)
    return da, db


def drift_ab(s: ShellState, p: ModelParams) -> ShellState:
    """
    Vector field of the (a, b) system. With ``b = 0`` this is the Euler dyadic model.
    """
    s.require(Coords.AB, "drift_ab")
    return ShellState(*drift_ab_arrays(s.first, s.second, p), Coords.AB)


def drift_pm(s: ShellState, p: ModelParams) -> ShellState:
    """
    Vector field of the Elsässer system. Every term carries an ``M`` factor.
    """
    s.require(Coords.ELSASSER, "drift_pm")
    return ShellState(*drift_pm_arrays(s.first, s.second, p), Coords.ELSASSER)


def _drift_arrays(coords: Coords):
    return drift_ab_arrays if coords == Coords.AB else drift_pm_arrays


def euler_step(s: ShellState, p: ModelParams, dt: float) -> ShellState:
    """
    One explicit Euler step of the drift selected by the state's coordinates.
    """
    d1, d2 = _drift_arrays(s.coords)(s.first, s.second, p)
    x1, x2 = s.first + dt * d1, s.second + dt * d2
    check_blowup(1, x1, x2)
    return ShellState(x1, x2, s.coords)


def rk4_step_arrays(x1, x2, p, dt, drift=drift_pm_arrays):
    k1 = drift(x1, x2, p)
    k2 = drift(x1 + 0.5 * dt * k1[0], x2 + 0.5 * dt * k1[1], p)
    k3 = drift(x1 + 0.5 * dt * k2[0], x2 + 0.5 * dt * k2[1], p)
    k4 = drift(x1 + dt * k3[0], x2 + dt * k3[1], p)
    return (
        x1 + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        x2 + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
    )


def rk4_integrate(
    s0: ShellState, p: ModelParams, dt: float, steps: int, record_stride: int = 1
) -> List[ShellState]:
    """
    Classical fourth-order Runge-Kutta integration of the drift selected by the coordinates of ``s0``.

    Stability requires roughly ``dt * λ_N**theta * max|s0| <= 1``; this is not enforced.

    :param s0: Initial state, in (a, b) or Elsässer coordinates.
    :param p: Model parameters (``sigma`` is ignored).
    :param dt: Step size.
    :param steps: Number of steps.
    :param record_stride: Keep every ``record_stride``-th state. The initial and final states are always kept.
    :return: The sampled states, starting with ``s0``.
    """
    if dt <= 0:
        raise ValueError(f"Step size must be positive, got {dt}.")
    drift = _drift_arrays(s0.coords)
    x1, x2 = s0.first, s0.second
    out = [s0]
    for _step in range(1, steps + 1):
        x1, x2 = rk4_step_arrays(x1, x2, p, dt, drift)
        check_blowup(_step, x1, x2)
        if _step % record_stride == 0 or _step == steps:
            out.append(ShellState(x1, x2, s0.coords))
    LOGGER.debug(f"Integrated {steps} RK4 steps of size {dt}.")
    return out
