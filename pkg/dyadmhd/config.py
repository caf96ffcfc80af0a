"""
YAML run configuration, validated with pydantic. Every section rejects unknown keys.

.. code-block:: yaml

    model: {lambda: 2.0, theta: 1.0, sigma: 1.0, n_shells: 8}
    run: {scheme: linear, dt: 1.0e-5, t_end: 0.2, n_paths: 1000, master_seed: 0}
    initial: {preset: geometric_decay, rho: 0.5, energy: 1.0}
    bd: {j_max: 60, boundary: absorbing, observe_times: [0.1]}
"""

import hashlib
import json
import math
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from dyadmhd import shells
from dyadmhd.birth_death import BDRates, Boundary, make_rates
from dyadmhd.json import as_json_serializable
from dyadmhd.sde import EnsembleSpec, Scheme
from dyadmhd.shells import Coords, InvalidParameterError, ModelParams, ShellState


class ConfigError(Exception):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ModelSection(_Section):
    lam: float = Field(2.0, alias="lambda", description="Shell ratio, > 1.")
    theta: float = Field(1.0, description="Spectral exponent, >= 1.")
    sigma: float = Field(1.0, description="Noise strength.")
    n_shells: int = Field(8, description="Galerkin truncation N.")

    @model_validator(mode="after")
    def check_params(self):
        try:
            self.params()
        except InvalidParameterError as err:
            raise ValueError(str(err))
        return self

    def params(self) -> ModelParams:
        return ModelParams(lam=self.lam, theta=self.theta, sigma=self.sigma, n_shells=self.n_shells)


class RunSection(_Section):
    scheme: Scheme = Scheme.LINEAR
    dt: float = Field(1e-5, gt=0)
    t_end: float = Field(0.2, ge=0)
    n_paths: int = Field(1000, ge=1)
    master_seed: int = Field(0, ge=0, lt=2**64)
    record_stride: int = Field(1000, ge=1)
    batch_size: int = Field(1000, ge=1)
    stiffness_c: float = Field(0.1, gt=0)


class InitialSection(_Section):
    preset: Optional[Literal["point_mass_1", "geometric_decay", "zero"]] = None
    rho: float = 0.5
    energy: float = Field(1.0, ge=0)
    first: Optional[List[float]] = None
    second: Optional[List[float]] = None
    coords: Coords = Coords.ELSASSER

    @model_validator(mode="after")
    def check_choice(self):
        explicit = self.first is not None or self.second is not None
        if explicit and self.preset is not None:
            raise ValueError("Give either a preset or explicit first/second lists, not both")
        if explicit and (self.first is None or self.second is None):
            raise ValueError("Explicit initial data needs both first and second")
        if self.kind == "geometric_decay" and not 0 < self.rho < 1:
            raise ValueError(f"geometric_decay requires 0 < rho < 1 (got {self.rho})")
        return self

    @property
    def kind(self) -> str:
        if self.first is not None:
            return "explicit"
        return self.preset or "point_mass_1"

    def state(self, n_shells: int) -> ShellState:
        """
        The initial state in Elsässer coordinates.
        """
        if self.kind == "explicit":
            state = ShellState(self.first, self.second, self.coords)
            return shells.to_elsasser(state) if state.coords == Coords.AB else state
        elif self.kind == "zero":
            return shells.zero_state(n_shells)
        elif self.kind == "geometric_decay":
            return shells.geometric_decay(n_shells, self.rho, self.energy)
        return shells.point_mass(n_shells, self.energy)


class BDSection(_Section):
    j_max: int = Field(60, ge=2)
    jump_budget: int = Field(1_000_000, ge=1)
    t_max: float = Field(math.inf, gt=0)
    n_paths: int = Field(10_000, ge=1)
    initial_state: int = Field(1, ge=1)
    boundary: Boundary = Boundary.ABSORBING
    observe_times: List[float] = [0.1]
    batch_size: int = Field(10_000, ge=1)

    @field_validator("observe_times")
    @classmethod
    def check_times(cls, value):
        if any(_t < 0 for _t in value):
            raise ValueError(f"observe_times must be nonnegative (got {value})")
        return sorted(value)

    @model_validator(mode="after")
    def check_initial(self):
        if self.initial_state >= self.j_max:
            raise ValueError(f"initial_state {self.initial_state} must lie below j_max {self.j_max}")
        return self


class ForwardSection(_Section):
    n_shells: int = Field(40, ge=2)
    dt: float = Field(0.01, gt=0)
    t_end: float = Field(3.0, ge=0)
    method: Literal["auto", "rk4", "implicit"] = "auto"
    record_stride: int = Field(1, ge=1)


class ReportSection(_Section):
    n_se: float = Field(4.0, gt=0)
    tail_fraction: float = Field(0.5, gt=0, le=1)
    energy_bound: Optional[float] = Field(None, ge=0)
    weight_clip_log: float = Field(50.0, gt=0)
    h_norm_truncations: List[int] = Field(
        default_factory=list, description="Shell counts of the H-norm sweep run by simulate."
    )

    @field_validator("h_norm_truncations")
    @classmethod
    def check_truncations(cls, value):
        if any(_n < 2 for _n in value):
            raise ValueError(f"h_norm_truncations must be at least 2 (got {value})")
        return sorted(set(value))


class VerifySection(_Section):
    """
    Problem sizes of the acceptance suite.
    """

    conservation_n_shells: int = 16
    conservation_dt: float = 1e-4
    conservation_t_end: float = 1.0
    conservation_rho: float = 0.5
    richardson_dt: float = 2e-3
    equivalence_states: int = 10_000
    heun_n_shells: int = 4
    heun_sigma: float = 0.5
    heun_dt: float = 1e-5
    heun_t_end: float = 0.5
    heun_paths: int = 100
    closure_paths: int = 100_000
    closure_n_shells: int = 8
    closure_dt: float = 1e-5
    closure_times: List[float] = [0.05, 0.1, 0.2]
    survival_n_shells: int = 40
    survival_dt: float = 0.01
    survival_t_end: float = 3.0
    bd_paths: int = 100_000
    bd_j_max: int = 60
    bd_max_state: int = 5
    bd_observe_time: float = 0.1
    bd_boundary: Boundary = Boundary.REFLECTING
    girsanov_paths: int = 100_000
    girsanov_n_shells: int = 6
    girsanov_energy: float = 0.05
    girsanov_dt: float = 1e-4
    girsanov_t_end: float = 0.2
    dissipation_paths: int = 10_000
    dissipation_t_end: float = 1.0
    dissipation_record_stride: int = 100
    batch_size: int = 10_000


class RunConfig(_Section):
    model: ModelSection = ModelSection()
    run: RunSection = RunSection()
    initial: InitialSection = InitialSection()
    bd: BDSection = BDSection()
    forward: ForwardSection = ForwardSection()
    report: ReportSection = ReportSection()
    verify: VerifySection = VerifySection()

    @model_validator(mode="after")
    def check_cross_fields(self):
        violations = []
        if self.model.sigma == 0 and self.run.scheme != Scheme.DETERMINISTIC:
            violations.append(
                f"sigma = 0 is only allowed with scheme = deterministic (got scheme = {self.run.scheme.value})"
            )
        if self.initial.kind == "explicit":
            for _name in ("first", "second"):
                if len(getattr(self.initial, _name)) != self.model.n_shells:
                    violations.append(
                        f"initial.{_name} has {len(getattr(self.initial, _name))} entries but n_shells = {self.model.n_shells}"
                    )
        if self.forward.n_shells < self.model.n_shells:
            violations.append(
                f"forward.n_shells ({self.forward.n_shells}) must be at least model.n_shells ({self.model.n_shells})"
            )
        if violations:
            raise ValueError("; ".join(violations))
        return self

    def params(self) -> ModelParams:
        return self.model.params()

    def initial_state(self) -> ShellState:
        return self.initial.state(self.model.n_shells)

    def initial_profile(self) -> np.ndarray:
        """
        Normalized shell energies of the initial state, padded with zeros to ``forward.n_shells``.
        """
        profile = np.zeros(self.forward.n_shells)
        profile[: self.model.n_shells] = shells.normalized_profile(self.initial_state())
        return profile

    def rates(self) -> BDRates:
        return make_rates(self.params())

    def ensemble_spec(self, threads: int = 0, **overrides) -> EnsembleSpec:
        kwargs = dict(
            scheme=self.run.scheme,
            params=self.params(),
            s0=self.initial_state(),
            dt=self.run.dt,
            t_end=self.run.t_end,
            n_paths=self.run.n_paths,
            master_seed=self.run.master_seed,
            record_stride=self.run.record_stride,
            batch_size=self.run.batch_size,
            threads=threads,
            stiffness_c=self.run.stiffness_c,
        )
        kwargs.update(overrides)
        return EnsembleSpec(**kwargs)

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        """
        Returns a copy with ``run.master_seed`` replaced, or ``self`` if ``seed`` is ``None``.
        """
        if seed is None:
            return self
        data = self.model_dump(by_alias=True)
        data["run"]["master_seed"] = seed
        return config_from_dict(data)

    def resolved(self) -> dict:
        """
        The configuration with every default applied, as JSON-compatible data.
        """
        return as_json_serializable(self.model_dump(by_alias=True))

    def dump(self) -> str:
        return yaml.safe_dump(self.resolved(), sort_keys=True)

    def config_hash(self) -> str:
        """
        SHA-256 of the canonical JSON of :meth:`resolved`.
        """
        canonical = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _format_validation_error(err: ValidationError) -> str:
    lines = []
    for _error in err.errors():
        location = ".".join(str(_x) for _x in _error["loc"]) or "<root>"
        lines.append(f"  {location}: {_error['msg']}")
    return f"{err.error_count()} invalid config entries:\n" + "\n".join(lines)


def config_from_dict(data: Optional[dict]) -> RunConfig:
    """
    Validates raw config data, raising :class:`ConfigError` that lists every violation.
    """
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError(f"Config root must be a mapping, got {type(data).__name__}.")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation_error(err))


def parse_config(path) -> RunConfig:
    """
    Reads and validates a YAML config file.

    :raises ConfigError: if the file cannot be read, is not valid YAML (the message carries line and column) or fails validation.
    """
    try:
        with open(path, "rt", encoding="utf-8") as fo:
            text = fo.read()
    except OSError as err:
        raise ConfigError(f"Cannot read config {path}: {err}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"Cannot parse config {path}{where}: {getattr(err, 'problem', err)}")
    return config_from_dict(data)
