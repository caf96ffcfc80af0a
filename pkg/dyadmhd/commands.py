"""
Subcommand orchestration. Each subcommand reads a :class:`~dyadmhd.config.RunConfig`, writes its artifacts to an output directory and returns an exit code:

* 0 -- success,
* 1 -- a verification criterion failed,
* 2 -- invalid configuration or parameters,
* 3 -- a path blew up.

Every CSV artifact starts with a comment line carrying the package version, the SHA-256 of the resolved config and the master seed. Every JSONL artifact starts with a record holding the full resolved config.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from dyadmhd import __version__
from dyadmhd import birth_death as bd
from dyadmhd.birth_death import Boundary
from dyadmhd import girsanov, kolmogorov, sde, verify
from dyadmhd.config import ConfigError, RunConfig, parse_config
from dyadmhd.deterministic import BlowUpError
from dyadmhd.files import CsvWriter, artifact_comment
from dyadmhd.json import ThreadSafeJsonWriter
from dyadmhd.logging import log_time
from dyadmhd.shells import InvalidParameterError
from dyadmhd.validation import ParameterChoiceError, check_option

LOGGER = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_VERIFY_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_BLOWUP = 3


@dataclass
class CommandOutcome:
    exit_code: int
    artifacts: List[Path] = field(default_factory=list)
    message: str = ""


class _Run:
    """
    Artifact bookkeeping of one subcommand invocation.
    """

    def __init__(self, config: RunConfig, out_dir: Path, threads: int, verbose: bool):
        self.config = config
        self.out_dir = Path(out_dir)
        self.threads = threads
        self.verbose = verbose
        self.artifacts: List[Path] = []
        self.comment = artifact_comment(config.config_hash(), config.run.master_seed)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def _register(self, name) -> Path:
        path = self.out_dir / name
        self.artifacts.append(path)
        return path

    def csv(self, name: str, columns) -> CsvWriter:
        return CsvWriter(self._register(name), columns, self.comment)

    def jsonl(self, name: str) -> ThreadSafeJsonWriter:
        writer = ThreadSafeJsonWriter(self._register(name))
        writer.truncate()
        writer.write(
            {
                "kind": "config",
                "version": __version__,
                "config_sha256": self.config.config_hash(),
                "master_seed": self.config.run.master_seed,
                "config": self.config.resolved(),
            }
        )
        return writer

    def resolved_config(self):
        with open(self._register("config.resolved.yaml"), "wt") as fo:
            fo.write(self.comment)
            fo.write(self.config.dump())


def _or_nan(value: Optional[float]) -> float:
    return np.nan if value is None else value


def _shell_columns(prefix: str, n: int) -> List[str]:
    return [f"{prefix}_{_j}" for _j in range(1, n + 1)]


def simulate(run: _Run) -> int:
    cfg = run.config
    result = sde.run_ensemble(cfg.ensemble_spec(run.threads), verbose=run.verbose)
    s, n = result.summary, cfg.model.n_shells
    writer = run.csv(
        "series.csv",
        ["t", "energy_mean", "energy_se", "cross_helicity_mean"]
        + _shell_columns("P2_mean", n)
        + _shell_columns("P2_se", n)
        + _shell_columns("M2_mean", n)
        + _shell_columns("M2_se", n),
    )
    writer.write_rows(
        np.column_stack(
            [
                s.times,
                s.energy_mean,
                s.energy_se,
                s.cross_helicity_mean,
                s.P2_mean,
                s.P2_se,
                s.M2_mean,
                s.M2_se,
            ]
        )
    )

    summary = {
        "kind": "summary",
        "scheme": result.spec.scheme,
        "n_paths": s.n_paths,
        "steps": result.spec.steps,
        "t_end": float(s.times[-1]),
        "energy_initial": s.energy_mean[0],
        "energy_final": s.energy_mean[-1],
        "energy_final_se": s.energy_se[-1],
        "h_norm_integral_mean": float(np.mean(result.h_norm_integral())),
        "dissipation": {_k: _v[-1] for _k, _v in result.dissipation_fractions().items()},
    }
    if result.spec.scheme != sde.Scheme.DETERMINISTIC:
        summary["integrability"] = girsanov.integrability_report(
            result, clip_log=cfg.report.weight_clip_log
        )
    writer = run.jsonl("summary.jsonl")
    writer.write(summary)
    if cfg.report.h_norm_truncations:
        sweep = sde.h_norm_sweep(
            cfg.ensemble_spec(run.threads), cfg.report.h_norm_truncations, verbose=run.verbose
        )
        writer.write({"kind": "h_norm_sweep", "sweep": sweep, "growth": sweep.growth})
    return EXIT_SUCCESS


def bd_sample(run: _Run) -> int:
    cfg, rates = run.config, run.config.rates()
    sample = bd.sample_paths(
        rates,
        cfg.bd.n_paths,
        master_seed=cfg.run.master_seed,
        batch_size=cfg.bd.batch_size,
        threads=run.threads,
        verbose=run.verbose,
        initial=cfg.bd.initial_state,
        t_max=cfg.bd.t_max,
        j_max=cfg.bd.j_max,
        jump_budget=cfg.bd.jump_budget,
        boundary=cfg.bd.boundary,
        observe_times=cfg.bd.observe_times,
    )

    histogram = run.csv("histogram.csv", ["t", "state", "probability", "se"])
    for _index in range(len(sample.observe_times)):
        hist = bd.state_histogram(sample, _index)
        states = np.arange(cfg.bd.j_max + 1)
        histogram.write_rows(
            np.column_stack([np.full(len(states), hist.time), states, hist.probability, hist.se])
        )
        exploded_se = np.sqrt(hist.exploded * (1 - hist.exploded) / sample.n_paths)
        histogram.write_rows([[hist.time, bd.EXPLODED_STATE, hist.exploded, exploded_se]])

    q = kolmogorov.spectral_quantities(cfg.params())
    levels = range(cfg.bd.initial_state, min(cfg.bd.j_max, cfg.bd.initial_state + 10))
    visits = run.csv(
        "visits.csv",
        ["k", "mean_visits", "se", "target", "mean_occupation", "occupation_se", "occupation_target"],
    )
    summaries = []
    for _k in levels:
        counts = bd.visit_count_stats(sample, _k, rates)
        occupation = bd.occupation_time_stats(sample, _k, rates)
        visits.write_rows(
            [
                [
                    _k,
                    counts.mean,
                    counts.se,
                    _or_nan(counts.target_mean),
                    occupation.mean,
                    occupation.se,
                    _or_nan(occupation.target_mean),
                ]
            ]
        )
        summaries.append({"kind": "level", "visits": counts, "occupation": occupation})

    writer = run.jsonl("bd_summary.jsonl")
    writer.write(
        {
            "kind": "summary",
            "n_paths": sample.n_paths,
            "boundary": sample.boundary,
            "exits": sample.exit_fractions(),
            "mean_jumps": float(np.mean(sample.n_jumps)),
            "survival": bd.survival_curve(sample, cfg.bd.observe_times),
            "residual_time_above_j_max": float(np.sum(q.mean_occupation[cfg.bd.j_max :])),
        }
    )
    for _summary in summaries:
        writer.write(_summary)
    return EXIT_SUCCESS


def forward(run: _Run) -> int:
    cfg = run.config
    f = cfg.forward
    solution = kolmogorov.integrate_forward(
        cfg.initial_profile(),
        cfg.rates(),
        f.dt,
        f.t_end,
        method=f.method,
        boundary=cfg.bd.boundary,
        record_stride=f.record_stride,
    )
    writer = run.csv(
        "profile.csv", ["t"] + _shell_columns("e", f.n_shells) + ["mass", "bottom_leak", "top_leak"]
    )
    writer.write_rows(
        np.column_stack(
            [solution.times, solution.e, solution.mass, solution.leaked_bottom, solution.leaked_top]
        )
    )
    q = kolmogorov.spectral_quantities(cfg.params())
    report = kolmogorov.decay_report(
        solution,
        q,
        energy_bound=cfg.report.energy_bound,
        tail_fraction=cfg.report.tail_fraction,
        n_se=cfg.report.n_se,
    )
    lower, upper = kolmogorov.survival_bounds(q, solution.times)
    writer = run.jsonl("forward_report.jsonl")
    writer.write(
        {
            "kind": "decay_report",
            "method": solution.method,
            "report": report,
            "n_negative": solution.n_negative,
            "max_ledger_error": float(np.max(solution.ledger_error)),
            "survival_lower": lower,
            "survival_upper": upper,
        }
    )
    if cfg.bd.boundary == Boundary.ABSORBING:
        start_points = kolmogorov.start_point_survival(
            cfg.rates(),
            f.n_shells,
            f.dt,
            f.t_end,
            start_shells=range(1, min(3, f.n_shells) + 1),
            profile=cfg.initial_profile(),
            method=f.method,
        )
        writer.write({"kind": "start_points", "comparison": start_points})
    return EXIT_SUCCESS


REWEIGHTING_COLUMNS = [
    "reweighted_mean",
    "reweighted_se",
    "direct_mean",
    "direct_se",
    "weight_mean",
    "weight_se",
    "ess",
    "n_clipped",
]


def girsanov_check(run: _Run) -> int:
    cfg = run.config
    linear = sde.run_ensemble(
        cfg.ensemble_spec(run.threads, scheme=sde.Scheme.LINEAR), verbose=run.verbose
    )
    nonlinear = sde.run_ensemble(
        cfg.ensemble_spec(
            run.threads, scheme=sde.Scheme.ITO, master_seed=cfg.run.master_seed + 1
        ),
        verbose=run.verbose,
    )
    writer = run.csv("reweighting.csv", ["t"] + REWEIGHTING_COLUMNS)
    estimates = []
    for _k in range(len(linear.times)):
        e = girsanov.reweighting_check(
            linear, nonlinear, k=_k, n_se=cfg.report.n_se, clip_log=cfg.report.weight_clip_log
        )
        estimates.append(e)
        writer.write_rows([[e.time] + [getattr(e, _c) for _c in REWEIGHTING_COLUMNS]])
    final = estimates[-1]
    report = girsanov.integrability_report(linear, clip_log=cfg.report.weight_clip_log)
    run.jsonl("girsanov.jsonl").write(
        {
            "kind": "reweighting",
            "estimate": final,
            "discrepancy_se": final.discrepancy,
            "passes": final.passes(),
            "integrability": report,
        }
    )
    LOGGER.info(
        f"Reweighted E[P_1^2] = {final.reweighted_mean:.6g} ± {final.reweighted_se:.2g}, "
        f"direct {final.direct_mean:.6g} ± {final.direct_se:.2g}, clipped {final.n_clipped}."
    )
    return EXIT_SUCCESS


def format_quantities(q: kolmogorov.SpectralQuantities) -> List[str]:
    return [
        f"r_1       = {q.r_n[0]:.12g}",
        f"r_inf     = {q.r_inf:.12g}",
        f"R         = {q.R}",
        f"S         = {'divergent' if q.S.divergent else q.S}",
        f"A         = {q.A:.12g}",
        f"alpha     = {q.alpha:.12g}",
        f"alpha_sum = {q.alpha_partial:.12g}",
        f"m_inf     = {q.mean_escape:.12g}",
    ]


def quantities(run: _Run) -> int:
    q = kolmogorov.spectral_quantities(run.config.params())
    for _line in format_quantities(q):
        print(_line)
    n = min(len(q.r_n), max(run.config.model.n_shells, 10))
    writer = run.csv("quantities.csv", ["n", "r_n", "mean_occupation"])
    writer.write_rows(np.column_stack([np.arange(1, n + 1), q.r_n[:n], q.mean_occupation[:n]]))
    run.jsonl("quantities.jsonl").write(
        {
            "kind": "quantities",
            "r_inf": q.r_inf,
            "R": q.R,
            "S": q.S,
            "A": q.A,
            "alpha": q.alpha,
            "alpha_partial": q.alpha_partial,
            "mean_escape": q.mean_escape,
        }
    )
    return EXIT_SUCCESS


def verify_suite(run: _Run) -> int:
    results = verify.run_suite(run.config, run.threads, runner=run_command)
    writer = run.jsonl("verify.jsonl")
    for _result in results:
        print(str(_result))
        writer.write({"kind": "criterion", **vars(_result)})
    failed = [_r for _r in results if not _r.passed]
    if failed:
        LOGGER.error(f"Verification failed at criterion {failed[0].number} ({failed[0].name}).")
        return EXIT_VERIFY_FAILURE
    return EXIT_SUCCESS


SUBCOMMANDS: Dict[str, Callable[[_Run], int]] = {
    "simulate": simulate,
    "bd-sample": bd_sample,
    "forward": forward,
    "girsanov-check": girsanov_check,
    "quantities": quantities,
    "verify": verify_suite,
}


def run_command(
    subcommand: str,
    config: Union[RunConfig, str, Path, None],
    out_dir: Union[str, Path] = ".",
    seed: Optional[int] = None,
    threads: int = 0,
    verbose: bool = False,
) -> CommandOutcome:
    """
    Runs a subcommand and maps its failures to exit codes.

    :param subcommand: One of :data:`SUBCOMMANDS`.
    :param config: A parsed config, a path to a YAML config, or ``None`` for the defaults.
    :param out_dir: Directory receiving the artifacts (created if needed).
    :param seed: Overrides ``run.master_seed``.
    :param threads: Worker threads for ensembles and chain sampling.
    :param verbose: Show progress bars.
    """
    try:
        check_option("subcommand", subcommand, SUBCOMMANDS)
        if config is None:
            config = RunConfig()
        elif not isinstance(config, RunConfig):
            config = parse_config(config)
        config = config.with_seed(seed)
        run = _Run(config, Path(out_dir), threads, verbose)
        with log_time(subcommand, LOGGER):
            run.resolved_config()
            exit_code = SUBCOMMANDS[subcommand](run)
        return CommandOutcome(exit_code, run.artifacts)
    except (
        ConfigError,
        InvalidParameterError,
        ParameterChoiceError,
        kolmogorov.StiffnessError,
        kolmogorov.SeriesNotConvergedError,
    ) as err:
        LOGGER.error(str(err))
        return CommandOutcome(EXIT_CONFIG_ERROR, message=str(err))
    except (BlowUpError, sde.EnsembleBlowUpError) as err:
        LOGGER.error(str(err))
        return CommandOutcome(EXIT_BLOWUP, message=str(err))
