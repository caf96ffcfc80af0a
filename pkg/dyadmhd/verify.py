"""
The acceptance suite run by ``dyadmhd verify``. Every criterion is a function of the run configuration that returns a :class:`CriterionResult`; problem sizes come from the ``verify`` config section.
"""

import filecmp
import logging
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from dyadmhd import logging as dmlog
from dyadmhd import rng as rng_mdl
from dyadmhd import birth_death as bd
from dyadmhd import deterministic as det
from dyadmhd import girsanov, kolmogorov, sde, shells
from dyadmhd.config import RunConfig, config_from_dict
from dyadmhd.shells import Coords, ModelParams

LOGGER = logging.getLogger(__name__)

CLOSURE_N_SE = 4.0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    message: str = ""

    def __str__(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}" + (
            f": {self.message}" if self.message else ""
        )


def _params(cfg: RunConfig, **changes) -> ModelParams:
    return cfg.params().replace(**changes)


def deterministic_conservation(cfg: RunConfig, threads: int = 0) -> CriterionResult:
    """
    RK4 conserves energy and cross helicity of the truncated (a, b) and Elsässer systems, and its error drops by at least 10x when the step is halved.
    """
    v = cfg.verify
    p = _params(cfg, n_shells=v.conservation_n_shells)
    steps = int(round(v.conservation_t_end / v.conservation_dt))
    s_ab = shells.random_state(
        rng_mdl.path_stream(cfg.run.master_seed, 0),
        p.n_shells,
        coords=Coords.AB,
        rho=v.conservation_rho,
    )

    drifts = {}
    for _label, _s0 in (("ab", s_ab), ("elsasser", shells.to_elsasser(s_ab))):
        final = det.rk4_integrate(_s0, p, v.conservation_dt, steps, record_stride=steps)[-1]
        for _name, _fxn in (("energy", shells.energy), ("cross_helicity", shells.cross_helicity)):
            initial = _fxn(_s0)
            drifts[f"{_label}_{_name}"] = abs(_fxn(final) - initial) / max(abs(initial), 1e-300)

    # Richardson: error against a reference at an eighth of the step.
    h = v.richardson_dt
    h_steps = int(round(v.conservation_t_end / h))

    def final_state(dt, n):
        out = det.rk4_integrate(s_ab, p, dt, n, record_stride=n)[-1]
        return np.concatenate([out.first, out.second])

    reference = final_state(h / 8, 8 * h_steps)
    err_h = np.max(np.abs(final_state(h, h_steps) - reference))
    err_h2 = np.max(np.abs(final_state(h / 2, 2 * h_steps) - reference))
    reduction = err_h / err_h2 if err_h2 > 0 else np.inf

    passed = max(drifts.values()) <= 1e-8 and reduction >= 10
    return CriterionResult(
        1,
        "deterministic conservation",
        passed,
        {"relative_drift": drifts, "richardson_errors": [err_h, err_h2], "error_reduction": reduction},
        f"max relative drift {max(drifts.values()):.3g}, error reduction {reduction:.3g}x",
    )


def elsasser_equivalence(cfg: RunConfig, threads: int = 0) -> CriterionResult:
    """
    ``to_elsasser(drift_ab(s)) == drift_pm(to_elsasser(s))`` on random batched states.
    """
    v = cfg.verify
    p = _params(cfg, n_shells=v.conservation_n_shells)
    s = shells.random_state(
        rng_mdl.path_stream(cfg.run.master_seed, 1),
        p.n_shells,
        coords=Coords.AB,
        size=v.equivalence_states,
    )
    lhs = shells.to_elsasser(det.drift_ab(s, p))
    rhs = det.drift_pm(shells.to_elsasser(s), p)
    scale = np.maximum(np.abs(lhs.first) + np.abs(lhs.second), 1e-300).max(axis=-1, keepdims=True)
    error = float(
        np.max(np.maximum(np.abs(lhs.first - rhs.first), np.abs(lhs.second - rhs.second)) / scale)
    )
    return CriterionResult(
        2,
        "Elsässer equivalence",
        error <= 1e-12,
        {"max_relative_error": error, "n_states": v.equivalence_states},
        f"max relative error {error:.3g}",
    )


def _heun_pair(s0, p, dt, steps, rng, n_paths):
    """
    Integrates Heun paths at ``dt`` and ``dt/2`` driven by the same Brownian paths. Returns the worst relative energy drift of each over all steps.
    """
    P = np.broadcast_to(s0.first, (n_paths, p.n_shells)).copy()
    M = np.broadcast_to(s0.second, (n_paths, p.n_shells)).copy()
    Pf, Mf = P.copy(), M.copy()
    e0 = shells.energy(s0)
    drift, drift_fine = 0.0, 0.0
    for _step in range(1, steps + 1):
        fine = [sde.sample_noise(rng, p, dt / 2, n_paths) for _ in range(2)]
        for _inc in fine:
            Pf, Mf = sde.heun_arrays(Pf, Mf, _inc.dWp, _inc.dWm, dt / 2, p)
        dWp, dWm = fine[0].dWp + fine[1].dWp, fine[0].dWm + fine[1].dWm
        P, M = sde.heun_arrays(P, M, dWp, dWm, dt, p)
        det.check_blowup(_step, P, M, Pf, Mf)
        drift = max(drift, np.max(np.abs(0.5 * np.sum(P**2 + M**2, axis=-1) - e0)) / e0)
        drift_fine = max(
            drift_fine, np.max(np.abs(0.5 * np.sum(Pf**2 + Mf**2, axis=-1) - e0)) / e0
        )
    return float(drift), float(drift_fine)


def stratonovich_conservation(cfg: RunConfig, threads: int = 0) -> CriterionResult:
    """
    Per-path energy drift of the Heun scheme stays below ``1e-3 Υ(0)`` and drops by at least 1.8x when the step is halved on the same Brownian paths.
    """
    v = cfg.verify
    p = _params(cfg, n_shells=v.heun_n_shells, sigma=v.heun_sigma)
    steps = int(round(v.heun_t_end / v.heun_dt))
    drift, drift_fine = _heun_pair(
        shells.point_mass(p.n_shells),
        p,
        v.heun_dt,
        steps,
        rng_mdl.path_stream(cfg.run.master_seed, 2),
        v.heun_paths,
    )
    reduction = drift / drift_fine if drift_fine > 0 else np.inf
    return CriterionResult(
        3,
        "Stratonovich conservation",
        drift <= 1e-3 and reduction >= 1.8,
        {"worst_drift": drift, "worst_drift_half_step": drift_fine, "reduction": reduction},
        f"worst relative drift {drift:.3g}, reduction {reduction:.3g}x",
    )


def _record_indices(times: np.ndarray, targets) -> List[int]:
    return [int(np.argmin(np.abs(times - _t))) for _t in targets]


def moment_closure(cfg: RunConfig, threads: int = 0) -> CriterionResult:
    """
    Linear-scheme shell energies against the forward equations. The tolerance is :data:`CLOSURE_N_SE` standard errors plus the exact bias of the Euler-Maruyama scheme, and both parts are reported per row.
    """
    v = cfg.verify
    p = _params(cfg, n_shells=v.closure_n_shells)
    s0 = shells.point_mass(p.n_shells)
    norm_sq = float(np.sum(s0.first**2 + s0.second**2))
    stride = int(round(min(v.closure_times) / v.closure_dt))
    spec = sde.EnsembleSpec(
        scheme=sde.Scheme.LINEAR,
        params=p,
        s0=s0,
        dt=v.closure_dt,
        t_end=max(v.closure_times),
        n_paths=v.closure_paths,
        master_seed=cfg.run.master_seed,
        record_stride=stride,
        batch_size=v.batch_size,
        threads=threads,
    )
    summary = sde.run_ensemble(spec).summary
    e0 = shells.normalized_profile(s0)
    forward = kolmogorov.integrate_forward(
        e0, bd.make_rates(p), v.closure_dt * stride, max(v.closure_times), method="implicit"
    )
    em = kolmogorov.linear_em_moments(e0, p, v.closure_dt, spec.steps)

    worst, max_bias, rows = 0.0, 0.0, []
    for _t, _k in zip(v.closure_times, _record_indices(summary.times, v.closure_times)):
        target = forward.e[_record_indices(forward.times, [_t])[0]] * norm_sq
        bias = np.abs(em[int(round(_t / v.closure_dt))] * norm_sq - target)
        tolerance = CLOSURE_N_SE * summary.shell_energy_se[_k] + bias
        excess = np.abs(summary.shell_energy_mean[_k] - target) / (tolerance + 1e-300)
        worst = max(worst, float(np.max(excess)))
        max_bias = max(max_bias, float(np.max(bias)))
        rows.append(
            {
                "t": _t,
                "mean": summary.shell_energy_mean[_k],
                "se": summary.shell_energy_se[_k],
                "target": target,
                "bias": bias,
                "tolerance": tolerance,
            }
        )
    return CriterionResult(
        4,
        "linear moment closure",
        worst <= 1.0,
        {"rows": rows, "n_se": CLOSURE_N_SE, "max_bias": max_bias},
        f"worst deviation {worst:.3g} of the tolerance {CLOSURE_N_SE:g} SE + EM bias "
        f"(bias up to {max_bias:.3g})",
    )


def survival_bounds(cfg: RunConfig, threads: int = 0) -> CriterionResult:
    """
    The forward solution from a point mass stays between the survival bounds and keeps its mass ledger. Survival from shell 1 dominates the survival from higher shells and from a geometric profile, and the absorbed mass matches the scale function.
    """
    v = cfg.verify
    p = cfg.params()
    e0 = np.zeros(v.survival_n_shells)
    e0[0] = 1.0
    solution = kolmogorov.integrate_forward(
        e0, bd.make_rates(p), v.survival_dt, v.survival_t_end, method="implicit"
    )
    q = kolmogorov.spectral_quantities(p)
    report = kolmogorov.decay_report(solution, q)
    positive = solution.times > 0
    ledger = float(np.max(solution.ledger_error[positive] / solution.times[positive], initial=0.0))
    start_points = kolmogorov.start_point_survival(
        bd.make_rates(p),
        v.survival_n_shells,
        v.survival_dt,
        v.survival_t_end,
        profile=shells.geometric_decay(v.survival_n_shells, v.conservation_rho),
    )
    passed = (
        report.lower_bound_holds
        and report.upper_bound_holds_mass
        and start_points.passed
        and ledger <= 1e-8
        and solution.n_negative == 0
    )
    return CriterionResult(
        5,
        "forward survival bounds",
        bool(passed),
        {
            "r_1": q.r_n[0],
            "r_inf": q.r_inf,
            "alpha": q.alpha,
            "lower_bound_holds": report.lower_bound_holds,
            "upper_bound_holds_mass": report.upper_bound_holds_mass,
            "upper_bound_holds_not_exploded": report.upper_bound_holds_not_exploded,
            "ledger_error_per_time": ledger,
            "top_leak": solution.leaked_top[-1],
            "bottom_leak": solution.leaked_bottom[-1],
            "start_shells": start_points.start_shells,
            "start_point_dominated": start_points.dominated,
            "profile_dominated": start_points.profile_dominated,
            "absorbed": start_points.absorbed,
            "predicted_absorbed": start_points.predicted_absorbed,
            "absorption_consistent": start_points.absorption_consistent,
        },
        f"r_1={q.r_n[0]:.6g}, r_inf={q.r_inf:.6g}, alpha={q.alpha:.6g}, ledger {ledger:.3g}/t",
    )


def chain_statistics(cfg: RunConfig, threads: int = 0) -> CriterionResult:
    """
    Visit counts and occupation times of the chain from state 1 against their laws, and the state histogram against the forward equations with the matching boundary.
    """
    v = cfg.verify
    rates = cfg.rates()
    sample = bd.sample_paths(
        rates,
        v.bd_paths,
        master_seed=cfg.run.master_seed,
        batch_size=v.batch_size,
        threads=threads,
        j_max=v.bd_j_max,
        boundary=v.bd_boundary,
        observe_times=[v.bd_observe_time],
    )
    failures, details = [], {"visits": [], "occupation": []}
    for _k in range(1, v.bd_max_state + 1):
        visits = bd.visit_count_stats(sample, _k, rates)
        occupation = bd.occupation_time_stats(sample, _k, rates)
        details["visits"].append(visits)
        details["occupation"].append(occupation)
        for _name, _stats in (("visits", visits), ("occupation", occupation)):
            if _stats.z is None or abs(_stats.z) > 4:
                failures.append(f"{_name} at {_k}")

    histogram = bd.state_histogram(sample, 0)
    e0 = np.zeros(v.bd_j_max - 1)
    e0[0] = 1.0
    forward = kolmogorov.integrate_forward(
        e0, rates, v.bd_observe_time, v.bd_observe_time, method="implicit", boundary=v.bd_boundary
    )
    e = forward.e[-1]
    p_hat = histogram.probability[1 : v.bd_j_max]
    tolerance = 4 * np.sqrt(e * (1 - e) / sample.n_paths) + 2.0 / sample.n_paths
    histogram_excess = float(np.max(np.abs(p_hat - e) / tolerance))
    if histogram_excess > 1:
        failures.append("state histogram")
    details["histogram_excess"] = histogram_excess
    details["exploded_fraction"] = histogram.exploded
    details["top_leak"] = float(forward.leaked_top[-1])
    return CriterionResult(
        6,
        "birth-death statistics",
        not failures,
        details,
        "failed: " + ", ".join(failures) if failures else f"histogram within {histogram_excess:.3g} of tolerance",
    )


def _girsanov_ensembles(cfg: RunConfig, threads: int, t_end: float, record_stride: Optional[int] = None):
    v = cfg.verify
    p = _params(cfg, n_shells=v.girsanov_n_shells)
    steps = int(round(t_end / v.girsanov_dt))
    common = dict(
        params=p,
        s0=shells.point_mass(p.n_shells, v.girsanov_energy),
        dt=v.girsanov_dt,
        t_end=t_end,
        record_stride=record_stride or steps,
        batch_size=v.batch_size,
        threads=threads,
    )
    return p, common


def girsanov_bridge(cfg: RunConfig, threads: int = 0) -> CriterionResult:
    """
    Mean Radon-Nikodym weight of a linear ensemble, and the reweighted estimate of ``E[P_1²]`` against an independent nonlinear ensemble.
    """
    v = cfg.verify
    p, common = _girsanov_ensembles(cfg, threads, v.girsanov_t_end)
    linear = sde.run_ensemble(
        sde.EnsembleSpec(
            scheme=sde.Scheme.LINEAR, n_paths=v.girsanov_paths, master_seed=cfg.run.master_seed, **common
        )
    )
    nonlinear = sde.run_ensemble(
        sde.EnsembleSpec(
            scheme=sde.Scheme.ITO, n_paths=v.girsanov_paths, master_seed=cfg.run.master_seed + 1, **common
        )
    )
    estimate = girsanov.reweighting_check(
        linear, nonlinear, n_se=cfg.report.n_se, clip_log=cfg.report.weight_clip_log
    )
    report = girsanov.integrability_report(linear, p, clip_log=cfg.report.weight_clip_log)
    return CriterionResult(
        7,
        "Girsanov bridge",
        estimate.passes() and report.condition,
        {"estimate": estimate, "condition": report.condition, "ess": report.ess},
        f"weight mean {estimate.weight_mean:.5g} ± {estimate.weight_se:.2g}, "
        f"discrepancy {estimate.discrepancy:.3g} SE, clipped {estimate.n_clipped}",
    )


def anomalous_dissipation(cfg: RunConfig, threads: int = 0) -> CriterionResult:
    """
    The mean energy of a nonlinear Itô ensemble decreases and its tail slope beats the bound for paths bounded by the observed per-path maximum energy.
    """
    v = cfg.verify
    p, common = _girsanov_ensembles(cfg, threads, v.dissipation_t_end, v.dissipation_record_stride)
    result = sde.run_ensemble(
        sde.EnsembleSpec(
            scheme=sde.Scheme.ITO,
            n_paths=v.dissipation_paths,
            master_seed=cfg.run.master_seed + 2,
            **common,
        )
    )
    summary = result.summary
    C = float(np.max(result.energy())) if cfg.report.energy_bound is None else cfg.report.energy_bound
    q = kolmogorov.spectral_quantities(p)
    decreasing = kolmogorov.is_decreasing(summary.energy_mean, summary.energy_se, n_se=2.0)
    fit = kolmogorov.fit_tail_slope(summary.times, summary.energy_mean, cfg.report.tail_fraction)
    rate = q.energy_bound_rate(C)
    consistent = fit is not None and rate is not None and fit.slope <= -rate + fit.slope_se
    return CriterionResult(
        8,
        "anomalous dissipation",
        bool(decreasing and consistent),
        {
            "decreasing": decreasing,
            "energy_bound": C,
            "threshold": None if rate is None else -rate,
            "fit": fit,
            "dissipation": result.dissipation_fractions(),
        },
        f"slope {fit.slope if fit else float('nan'):.4g} vs threshold "
        f"{-rate if rate is not None else float('nan'):.4g}, decreasing={decreasing}",
    )


DETERMINISM_SUBCOMMANDS = ["simulate", "bd-sample", "forward", "girsanov-check", "quantities"]


def small_config(cfg: RunConfig) -> RunConfig:
    """
    A reduced copy of ``cfg`` for rerun comparisons.
    """
    data = cfg.model_dump(by_alias=True)
    data["run"].update(n_paths=min(cfg.run.n_paths, 64), batch_size=32)
    data["run"]["t_end"] = min(cfg.run.t_end, 100 * cfg.run.dt)
    data["run"]["record_stride"] = min(cfg.run.record_stride, 10)
    data["bd"].update(n_paths=min(cfg.bd.n_paths, 500), batch_size=200)
    data["forward"]["t_end"] = min(cfg.forward.t_end, 10 * cfg.forward.dt)
    return config_from_dict(data)


def determinism(
    cfg: RunConfig, threads: int = 0, runner: Optional[Callable] = None
) -> CriterionResult:
    """
    Every subcommand run twice with the same config and seed writes byte-identical artifacts.

    :param runner: ``runner(subcommand, config, out_dir, threads=...)`` returning an object with an ``artifacts`` list.
    """
    if runner is None:
        raise ValueError("The determinism criterion needs a subcommand runner.")
    small = small_config(cfg)
    differing = []
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        for _sub in DETERMINISM_SUBCOMMANDS:
            if small.model.sigma == 0 and _sub != "simulate":
                continue
            outcomes = [
                runner(_sub, small, Path(_dir) / _sub, threads=threads) for _dir in (first, second)
            ]
            for _a, _b in zip(outcomes[0].artifacts, outcomes[1].artifacts):
                if not filecmp.cmp(_a, _b, shallow=False):
                    differing.append(f"{_sub}:{Path(_a).name}")
    return CriterionResult(
        9,
        "determinism",
        not differing,
        {"differing": differing},
        ("differing artifacts: " + ", ".join(differing)) if differing else "all artifacts identical",
    )


CRITERIA = [
    deterministic_conservation,
    elsasser_equivalence,
    stratonovich_conservation,
    moment_closure,
    survival_bounds,
    chain_statistics,
    girsanov_bridge,
    anomalous_dissipation,
    determinism,
]


def run_suite(
    cfg: RunConfig,
    threads: int = 0,
    runner: Optional[Callable] = None,
    only: Optional[List[int]] = None,
) -> List[CriterionResult]:
    """
    Runs the criteria in order. A criterion that raises is reported as failed with the error message.

    :param only: Criterion numbers to run (all by default).
    """
    results = []
    for _number, _criterion in enumerate(CRITERIA, start=1):
        if only is not None and _number not in only:
            continue
        kwargs = {"runner": runner} if _criterion is determinism else {}
        with dmlog.log_time(f"criterion {_number} ({_criterion.__name__})", LOGGER):
            try:
                result = _criterion(cfg, threads, **kwargs)
            except (ArithmeticError, ValueError) as err:
                result = CriterionResult(
                    _number, _criterion.__name__.replace("_", " "), False, message=f"{type(err).__name__}: {err}"
                )
        LOGGER.info(str(result))
        results.append(result)
    return results
