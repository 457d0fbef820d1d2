"""Experiment runner: config ingestion, pipelines, and report emission.

Subcommands
-----------
simulate : integrate from seeded initial phases; writes ``trajectory.csv``,
           ``phases.svg``, ``freq.svg``, and ``sync.txt``.
analyze  : multi-start equilibrium, Jacobian/spectral checks, and the
           synchronization verdict; writes ``stability.txt``.
probe    : perturbation probes around the equilibrium; writes ``probes.csv``.
report   : all three plus a combined ``summary.txt``.

Exit codes: 0 success, 2 configuration error, 3 integration divergence,
4 inconclusive (no equilibrium inside the synchronization set).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dynamics, equilibrium, manifold, network, plots, stability
from .errors import (ConfigError, InconclusiveError, IntegrationDivergedError,
                     NearBifurcationError, NoConvergenceError, StructuralError,
                     ValidationError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_INCONCLUSIVE = 4

# Substream tags so one experiment seed drives independent draws.
STREAM_INITIAL = 1
STREAM_MULTISTART = 2
STREAM_PROBES = 3

_CONFIG_KEYS = {
    "network", "n", "edges", "seed", "dt", "t_max", "decimation", "tol",
    "max_iter", "n_starts", "probes", "perturbation", "probe_t_max",
    "lambda_critical", "out", "jobs", "initial_fraction", "ranges",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs, after merging file and flags."""

    network_file: str | None = None
    n: int = 10
    edges: int = 15
    seed: int | None = None
    dt: float = 1e-3
    t_max: float = 20.0
    decimation: int = 1
    tol: float = 1e-10
    max_iter: int = 100
    n_starts: int = 20
    probes: int = 100
    perturbation: float = 0.05
    probe_t_max: float = 50.0
    lambda_critical: float | None = None
    out: str = "results"
    jobs: int = 1
    initial_fraction: float = 0.9
    ranges: network.ParameterRanges = network.DEFAULT_RANGES

    def validate(self) -> None:
        if self.network_file is None and self.seed is None:
            raise ConfigError("a seed is required when generating a network")
        if self.network_file is not None and not Path(self.network_file).is_file():
            raise ConfigError(f"network file not found: {self.network_file}")
        for name, value in (("dt", self.dt), ("t_max", self.t_max),
                            ("tol", self.tol), ("perturbation", self.perturbation),
                            ("probe_t_max", self.probe_t_max)):
            if not value > 0:
                raise ConfigError(f"{name} must be positive")
        if self.t_max < self.dt or self.probe_t_max < self.dt:
            raise ConfigError("horizons must cover at least one step")
        for name, value, low in (("max_iter", self.max_iter, 1),
                                 ("n_starts", self.n_starts, 2),
                                 ("probes", self.probes, 1),
                                 ("jobs", self.jobs, 1),
                                 ("decimation", self.decimation, 1)):
            if value < low:
                raise ConfigError(f"{name} must be at least {low}")
        if not 0 < self.initial_fraction < 1:
            raise ConfigError("initial_fraction must lie in (0, 1)")


def load_config(path) -> ExperimentConfig:
    """Read a JSON config document; unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kwargs = dict(doc)
    if "ranges" in kwargs:
        ranges = kwargs.pop("ranges")
        if not isinstance(ranges, dict):
            raise ConfigError("ranges must be a JSON object")
        if "gain_multipliers" in ranges:
            ranges["gain_multipliers"] = tuple(
                (int(node), float(mult)) for node, mult in ranges["gain_multipliers"])
        for key in ("voltage", "conductance", "susceptance", "load_conductance"):
            if key in ranges:
                ranges[key] = tuple(ranges[key])
        try:
            kwargs["ranges"] = network.DEFAULT_RANGES.with_overrides(**ranges)
        except TypeError as exc:
            raise ConfigError(f"bad ranges entry: {exc}") from exc
    if "network" in kwargs:
        net = kwargs.pop("network")
        if net is not None:
            # Relative network paths resolve against the config location.
            kwargs["network_file"] = str((path.parent / net).resolve())
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config entry: {exc}") from exc


_FLAG_FIELDS = (
    ("seed", "seed"), ("n", "n"), ("edges", "edges"), ("dt", "dt"),
    ("tmax", "t_max"), ("tol", "tol"), ("starts", "n_starts"),
    ("probes", "probes"), ("perturbation", "perturbation"),
    ("lambda_critical", "lambda_critical"), ("out", "out"), ("jobs", "jobs"),
)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {field: getattr(args, flag)
                 for flag, field in _FLAG_FIELDS
                 if getattr(args, flag) is not None}
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _load_model(cfg: ExperimentConfig):
    if cfg.network_file is not None:
        spec = network.load_network(cfg.network_file)
    else:
        spec = network.generate_random(cfg.n, cfg.edges, cfg.ranges, cfg.seed)
    return spec, network.derive(spec)


def _seed(cfg: ExperimentConfig, stream: int):
    return [cfg.seed if cfg.seed is not None else 0, stream]


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def run_simulate(cfg: ExperimentConfig) -> dict:
    """Integrate from seeded initial phases and write trajectory outputs."""
    spec, model = _load_model(cfg)
    delta0 = dynamics.draw_initial_phases(model, _seed(cfg, STREAM_INITIAL),
                                          cfg.initial_fraction)
    traj = dynamics.integrate(model, delta0, t_max=cfg.t_max, dt=cfg.dt,
                              decimation=cfg.decimation)
    sync = dynamics.detect_synchronization(traj)

    out = _outdir(cfg)
    traj.write_csv(out / "trajectory.csv")
    plots.save_figure(plots.phase_figure(traj), out / "phases.svg")
    plots.save_figure(plots.frequency_figure(traj), out / "freq.svg")

    final_residual = float(np.abs(traj.derivs[-1]).max())
    lines = [
        f"nodes: {model.node_count}",
        f"edges: {model.edge_count}",
        f"t_final_s: {_fmt(traj.final_time)}",
        f"synchronized: {_fmt(sync is not None)}",
        f"common_frequency_deviation_rad_s: {_fmt(sync) if sync is not None else 'none'}",
        f"final_max_frequency_deviation_rad_s: {_fmt(final_residual)}",
    ]
    (out / "sync.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("simulate:", "; ".join(lines))
    return {"trajectory": traj, "synchronized": sync, "final_residual": final_residual}


def _stability_text(model, spec, eq, uniq, report, structure_ok, verdict) -> str:
    lines = ["[network]"]
    lines.append(f"nodes: {model.node_count}")
    lines.append(f"edges: {model.edge_count}")
    lines.append("edge_list_1based: " + " ".join(
        f"{i + 1}-{j + 1}" for i, j in spec.edges))
    lines.append(f"psi_max_rad: {_fmt(model.psi_max)}")

    lines.append("")
    lines.append("[equilibrium]")
    lines.append("gauge: phase of node 1 fixed to zero")
    lines.append(f"iterations: {eq.iterations}")
    lines.append(f"residual_inf_norm_rad_s: {_fmt(eq.residual_norm)}")
    lines.append("delta_star_rad: " + " ".join(_fmt(x) for x in eq.delta_star))
    lines.append("edge_differences_rad: " + " ".join(_fmt(x) for x in eq.edge_differences))
    lines.append(f"max_edge_difference_rad: {_fmt(eq.max_edge_difference)}")

    lines.append("")
    lines.append("[uniqueness]")
    lines.append(f"starts: {uniq.n_starts}")
    lines.append(f"retained: {uniq.n_retained}")
    lines.append(f"failed_starts: {uniq.n_failed}")
    lines.append(f"distinct_difference_vectors: {len(uniq.witnesses)}")
    lines.append(f"max_pairwise_deviation_rad: {_fmt(uniq.max_pairwise_deviation)}")
    lines.append(f"unique: {_fmt(uniq.unique)}")

    lines.append("")
    lines.append("[jacobian]")
    lines.append(f"form_disagreement: {_fmt(report.form_disagreement)}")
    lines.append(f"zero_mode_error: {_fmt(report.zero_mode_error)}")
    lines.append(f"asymmetry_max_abs: {_fmt(report.flags.asymmetry)}")
    lines.append(f"laplacian_structure_ok: {_fmt(structure_ok)}")
    lines.append("spectrum_re_im:")
    for lam in report.spectrum:
        lines.append(f"  {_fmt(lam.real)} {_fmt(lam.imag)}")

    lines.append("")
    lines.append("[stability]")
    lines.append(f"psi_max_rad: {_fmt(verdict.psi_max)}")
    lines.append(f"gamma_bound_rad: {_fmt(verdict.gamma_bound)}")
    lines.append(f"max_edge_difference_rad: {_fmt(verdict.max_edge_difference)}")
    lines.append(f"condition_met: {_fmt(verdict.condition_met)}")
    lines.append(f"spectral_confirmation: {_fmt(verdict.spectral_confirmation)}")
    lines.append(f"zero_eigenvalue_count: {verdict.zero_count}")
    lines.append(f"zero_mode_angle_rad: {_fmt(verdict.zero_mode_angle)}")
    lines.append(f"lambda2: {_fmt(verdict.lambda2)}")
    lines.append("lambda_critical: "
                 + (_fmt(verdict.lambda_critical) if verdict.lambda_critical is not None else "absent"))
    lines.append(f"comparison_outcome: {verdict.comparison_outcome.value}")
    return "\n".join(lines) + "\n"


def run_analyze(cfg: ExperimentConfig) -> dict:
    """Equilibrium, Jacobian, spectrum, and verdict; writes ``stability.txt``."""
    spec, model = _load_model(cfg)
    uniq = equilibrium.check_uniqueness(
        model, n_starts=cfg.n_starts, seed=_seed(cfg, STREAM_MULTISTART),
        solver_tol=cfg.tol, max_iter=cfg.max_iter, jobs=cfg.jobs)
    eq = min(uniq.results, key=lambda r: r.residual_norm)

    report = stability.jacobian(model, eq.delta_star)
    structure_ok = stability.check_laplacian_structure(report, eq.delta_star, model)
    verdict = stability.synchronization_condition(
        model, eq.delta_star, lambda_critical=cfg.lambda_critical, report=report)

    out = _outdir(cfg)
    text = _stability_text(model, spec, eq, uniq, report, structure_ok, verdict)
    (out / "stability.txt").write_text(text, encoding="utf-8")
    print(f"analyze: condition_met={_fmt(verdict.condition_met)} "
          f"max_edge_difference={_fmt(verdict.max_edge_difference)} rad "
          f"gamma_bound={_fmt(verdict.gamma_bound)} rad "
          f"lambda2={_fmt(verdict.lambda2)} "
          f"outcome={verdict.comparison_outcome.value}")
    return {"spec": spec, "model": model, "equilibrium": eq, "uniqueness": uniq,
            "report": report, "verdict": verdict, "structure_ok": structure_ok}


def run_probe(cfg: ExperimentConfig, analysis: dict | None = None) -> dict:
    """Perturbation probes around the equilibrium; writes ``probes.csv``."""
    if analysis is None:
        analysis = run_analyze(cfg)
    verdict = analysis["verdict"]
    if not verdict.condition_met:
        raise InconclusiveError(
            "equilibrium violates the synchronization condition; probes skipped")

    probes = manifold.probe_convergence(
        analysis["model"], analysis["equilibrium"].delta_star,
        n_probes=cfg.probes, perturbation_norm=cfg.perturbation,
        seed=_seed(cfg, STREAM_PROBES), t_max=cfg.probe_t_max, dt=cfg.dt)

    out = _outdir(cfg)
    manifold.write_probe_csv(probes, out / "probes.csv")
    n_conv = sum(p.converged for p in probes)
    offsets = [p.offset for p in probes]
    spread = max(offsets) - min(offsets) if offsets else 0.0
    print(f"probe: converged={n_conv}/{len(probes)} offset_spread={_fmt(spread)} rad")
    return {"probes": probes, "n_converged": n_conv, "offset_spread": spread}


def run_report(cfg: ExperimentConfig) -> dict:
    """Full pipeline plus a combined ``summary.txt``."""
    sim = run_simulate(cfg)
    analysis = run_analyze(cfg)
    probing = run_probe(cfg, analysis)

    verdict = analysis["verdict"]
    sync = sim["synchronized"]
    lines = [
        f"nodes: {analysis['model'].node_count}",
        f"edges: {analysis['model'].edge_count}",
        f"synchronized: {_fmt(sync is not None)}",
        f"common_frequency_deviation_rad_s: {_fmt(sync) if sync is not None else 'none'}",
        f"condition_met: {_fmt(verdict.condition_met)}",
        f"spectral_confirmation: {_fmt(verdict.spectral_confirmation)}",
        f"max_edge_difference_rad: {_fmt(verdict.max_edge_difference)}",
        f"gamma_bound_rad: {_fmt(verdict.gamma_bound)}",
        f"unique_differences: {_fmt(analysis['uniqueness'].unique)}",
        f"lambda2: {_fmt(verdict.lambda2)}",
        f"comparison_outcome: {verdict.comparison_outcome.value}",
        f"probes_converged: {probing['n_converged']}/{cfg.probes}",
        f"probe_offset_spread_rad: {_fmt(probing['offset_spread'])}",
    ]
    out = _outdir(cfg)
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("report: wrote", out / "summary.txt")
    return {"simulate": sim, "analysis": analysis, "probing": probing}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossy-kuramoto",
        description="Simulate and analyze phase-oscillator networks with lossy couplings.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("simulate", "integrate a trajectory and plot it"),
                      ("analyze", "equilibrium, Jacobian, and stability verdict"),
                      ("probe", "convergence probes around the equilibrium"),
                      ("report", "simulate + analyze + probe + summary")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="experiment seed")
        p.add_argument("--n", type=int, default=None, help="number of oscillators")
        p.add_argument("--edges", type=int, default=None, help="number of coupling lines")
        p.add_argument("--dt", type=float, default=None, help="integrator step (s)")
        p.add_argument("--tmax", type=float, default=None, help="simulation horizon (s)")
        p.add_argument("--tol", type=float, default=None, help="equilibrium solver tolerance")
        p.add_argument("--starts", type=int, default=None, help="multi-start count")
        p.add_argument("--probes", type=int, default=None, help="number of probes")
        p.add_argument("--perturbation", type=float, default=None,
                       help="probe perturbation norm (rad)")
        p.add_argument("--lambda-critical", dest="lambda_critical", type=float,
                       default=None, help="external connectivity threshold")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None, help="worker pool size")
    return parser


_COMMANDS = {
    "simulate": run_simulate,
    "analyze": run_analyze,
    "probe": run_probe,
    "report": run_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        _COMMANDS[args.command](cfg)
        return EXIT_OK
    except (ConfigError, ValidationError, StructuralError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationDivergedError as exc:
        print(f"integration diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InconclusiveError, NoConvergenceError, NearBifurcationError) as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
