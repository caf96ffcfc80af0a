"""
Parameters, states and scalar diagnostics of the truncated dyadic MHD model.

Shells are 1-based: array position ``k`` holds shell ``j = k + 1``. Indices 0 and ``N + 1`` are hard zero boundaries. All arrays may carry leading batch dimensions; shells always run along the last axis.
"""

import dataclasses
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np


class InvalidParameterError(ValueError):
    pass


class CoordinateMismatchError(ValueError):
    def __init__(self, operation, expected, received):
        super().__init__(
            f"Operation {operation} requires {expected.value} coordinates but received {received.value}."
        )


class Coords(str, Enum):
    AB = "ab"
    """ Velocity/magnetic amplitudes ``(a_j, b_j)``. """
    ELSASSER = "elsasser"
    """ Elsässer variables ``P_j = a_j + b_j``, ``M_j = a_j - b_j``. """


@dataclass(frozen=True)
class ModelParams:
    """
    Spectral and noise parameters. Shell scales are geometric, ``λ_j = lam**j`` for ``j >= 0``.

    ``sigma = 0`` is accepted so that deterministic runs share the parameter type. Operations that divide by ``sigma`` call :meth:`require_noise`.
    """

    lam: float = 2.0
    theta: float = 1.0
    sigma: float = 1.0
    n_shells: int = 8

    def __post_init__(self):
        violations = []
        if not self.lam > 1:
            violations.append(f"lambda must exceed 1 (got {self.lam})")
        if not self.theta >= 1:
            violations.append(f"theta must be at least 1 (got {self.theta})")
        if not np.isfinite(self.sigma):
            violations.append(f"sigma must be finite (got {self.sigma})")
        if int(self.n_shells) != self.n_shells or self.n_shells < 2:
            violations.append(f"n_shells must be an integer >= 2 (got {self.n_shells})")
        if violations:
            raise InvalidParameterError("; ".join(violations) + ".")

    def scale(self, j, power: float = 1.0) -> np.ndarray:
        """
        Returns ``λ_j**(power*theta)`` for the (array of) shell indices ``j``.
        """
        return self.lam ** (power * self.theta * np.asarray(j, dtype=float))

    @cached_property
    def couplings(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        The pair ``(λ_{j-1}**theta, λ_j**theta)`` for ``j = 1..N``.
        """
        j = np.arange(1, self.n_shells + 1)
        lower, upper = self.scale(j - 1), self.scale(j)
        lower.flags.writeable = False
        upper.flags.writeable = False
        return lower, upper

    @cached_property
    def ito_damping(self) -> np.ndarray:
        """
        The Itô correction rates ``(sigma**2/2)*(λ_j**(2 theta) + λ_{j-1}**(2 theta))``.
        """
        lower, upper = self.couplings
        out = 0.5 * self.sigma**2 * (upper**2 + lower**2)
        out.flags.writeable = False
        return out

    def stiffness_bound(self, c: float = 0.1) -> float:
        """
        Largest explicit step ``c/(sigma**2 λ_N**(2 theta))`` recommended for the stochastic schemes.
        """
        self.require_noise()
        return c / (self.sigma**2 * float(self.scale(self.n_shells, 2)))

    def require_noise(self):
        if self.sigma == 0:
            raise InvalidParameterError("This operation requires sigma != 0.")

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ShellState:
    """
    Paired shell-coefficient vectors. Immutable: the arrays are copied and flagged read-only.
    """

    first: np.ndarray
    second: np.ndarray
    coords: Coords = Coords.ELSASSER

    def __post_init__(self):
        first = np.array(self.first, dtype=float)
        second = np.array(self.second, dtype=float)
        if first.ndim == 0 or first.shape != second.shape:
            raise ValueError(
                f"Shell vectors need identical, non-scalar shapes, got {first.shape} and {second.shape}."
            )
        if not (np.isfinite(first).all() and np.isfinite(second).all()):
            raise ValueError("Shell states must be finite.")
        first.flags.writeable = False
        second.flags.writeable = False
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)
        object.__setattr__(self, "coords", Coords(self.coords))

    @property
    def n_shells(self) -> int:
        return self.first.shape[-1]

    def require(self, coords: Coords, operation: str):
        if self.coords != coords:
            raise CoordinateMismatchError(operation, Coords(coords), self.coords)

    def __getitem__(self, index) -> "ShellState":
        """
        Selects entries along the leading batch dimensions.
        """
        return ShellState(self.first[index], self.second[index], self.coords)


def from_below(x: np.ndarray) -> np.ndarray:
    """
    Returns ``x_{j-1}`` along the last axis with ``x_0 = 0``.
    """
    out = np.zeros_like(x)
    out[..., 1:] = x[..., :-1]
    return out


def from_above(x: np.ndarray) -> np.ndarray:
    """
    Returns ``x_{j+1}`` along the last axis with ``x_{N+1} = 0``.
    """
    out = np.zeros_like(x)
    out[..., :-1] = x[..., 1:]
    return out


def to_elsasser(s: ShellState) -> ShellState:
    s.require(Coords.AB, "to_elsasser")
    return ShellState(s.first + s.second, s.first - s.second, Coords.ELSASSER)


def from_elsasser(s: ShellState) -> ShellState:
    s.require(Coords.ELSASSER, "from_elsasser")
    return ShellState(
        (s.first + s.second) / 2, (s.first - s.second) / 2, Coords.AB
    )


def _reduce(x: np.ndarray) -> Union[float, np.ndarray]:
    return float(x) if np.ndim(x) == 0 else x


def energy(s: ShellState) -> Union[float, np.ndarray]:
    """
    Total energy ``Υ``. Equals ``½Σ(P_j² + M_j²)`` in Elsässer coordinates and ``Σ(a_j² + b_j²)`` in (a, b) coordinates.
    """
    squares = np.sum(s.first**2 + s.second**2, axis=-1)
    return _reduce(squares / 2 if s.coords == Coords.ELSASSER else squares)


def cross_helicity(s: ShellState) -> Union[float, np.ndarray]:
    if s.coords == Coords.AB:
        return _reduce(np.sum(s.first * s.second, axis=-1))
    return _reduce(np.sum(s.first**2 - s.second**2, axis=-1) / 4)


def h_norm_sq(s: ShellState, p: ModelParams) -> Union[float, np.ndarray]:
    """
    ``Σ λ_j**(2 theta) (first_j² + second_j²)`` on the raw components of the state.
    """
    weights = p.scale(np.arange(1, s.n_shells + 1), 2)
    return _reduce(np.sum(weights * (s.first**2 + s.second**2), axis=-1))


def normalized_profile(s: ShellState) -> np.ndarray:
    """
    The normalized shell energies ``e_j = (P_j² + M_j²)/||x||²`` of an Elsässer state. A zero state maps to the zero profile.
    """
    s.require(Coords.ELSASSER, "normalized_profile")
    squares = s.first**2 + s.second**2
    total = squares.sum(axis=-1, keepdims=True)
    return np.divide(squares, total, out=np.zeros_like(squares), where=total > 0)


# Initial-state presets, all in Elsässer coordinates.


def zero_state(n_shells: int) -> ShellState:
    return ShellState(np.zeros(n_shells), np.zeros(n_shells))


def point_mass(n_shells: int, total_energy: float = 1.0, shell: int = 1) -> ShellState:
    """
    All energy in one shell, split evenly between ``P`` and ``M``.
    """
    if not 1 <= shell <= n_shells:
        raise ValueError(f"Shell {shell} outside 1..{n_shells}.")
    values = np.zeros(n_shells)
    values[shell - 1] = np.sqrt(total_energy)
    return ShellState(values, values)


def geometric_decay(n_shells: int, rho: float, total_energy: float = 1.0) -> ShellState:
    """
    ``P_j = M_j ∝ rho**(j-1)``, scaled to the requested energy.
    """
    if not 0 < rho < 1:
        raise ValueError(f"Decay ratio rho must lie in (0, 1), got {rho}.")
    values = rho ** np.arange(n_shells, dtype=float)
    values *= np.sqrt(total_energy / np.sum(values**2))
    return ShellState(values, values)


def random_state(
    rng: np.random.Generator,
    n_shells: int,
    total_energy: float = 1.0,
    coords: Coords = Coords.ELSASSER,
    size: Optional[int] = None,
    rho: Optional[float] = None,
) -> ShellState:
    """
    Gaussian shell coefficients rescaled to the requested energy (per state when ``size`` is given). With ``rho``, shell ``j`` is first scaled by ``rho**(j-1)``.
    """
    shape = (n_shells,) if size is None else (size, n_shells)
    envelope = 1.0 if rho is None else rho ** np.arange(n_shells, dtype=float)
    state = ShellState(
        rng.normal(size=shape) * envelope, rng.normal(size=shape) * envelope, coords
    )
    factor = np.sqrt(total_energy / np.asarray(energy(state)))[..., None]
    return ShellState(state.first * factor, state.second * factor, coords)
