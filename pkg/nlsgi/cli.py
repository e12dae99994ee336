"""
Command-line harness for the NLS-GI engine
nlsgi scatter|invert|evolve|verify|reference
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, NoReturn, Optional

import numpy as np
from pydantic import ValidationError

from nlsgi import __version__
from nlsgi.core.config import RunConfig, Settings, parse_config
from nlsgi.core.errors import ConfigError, InputError, NLSGIError, SolitonGateError
from nlsgi.core.logging import get_ledger_logger, setup_logging
from nlsgi.services.archive import (
    read_scattering_archive,
    write_delta_csv,
    write_json,
    write_reconstruction,
    write_scattering_archive,
    write_snapshot,
)
from nlsgi.services.evolution import EvolutionConfig, compare, ist_solve, reference_solve
from nlsgi.services.grid import PotentialField, SpatialGrid, make_grids, sample_potential, write_potential_csv
from nlsgi.services.projector import delta_solve, make_plan
from nlsgi.services.reconstruction import reconstruct_field
from nlsgi.services.rh_solver import solve_rh_positive, write_state_csv
from nlsgi.services.scattering import check_gate, direct_scattering
from nlsgi.services.suites import run_suite, solver_options

logger = logging.getLogger(__name__)
ledger = get_ledger_logger(__name__)

COMMANDS = ("scatter", "invert", "evolve", "verify", "reference")


def _potential(cfg: RunConfig) -> PotentialField:
    grid, _ = make_grids(cfg.L, cfg.N, cfg.Z, cfg.M)
    source = cfg.input_path or cfg.preset
    return sample_potential(source, grid, boundary_tol=cfg.boundary_tol, allow_resample=cfg.resample_input)


def _archive_reference(source: str, grid: SpatialGrid, cfg: RunConfig) -> Optional[np.ndarray]:
    """The potential an archive was scattered from, sampled on the inversion grid"""
    try:
        return sample_potential(source, grid, boundary_tol=np.inf, allow_resample=cfg.resample_input).u
    except InputError as e:
        logger.warning(f"No round-trip reference: archive source '{source}' cannot be resampled ({e})")
        return None


def cmd_scatter(cfg: RunConfig, out_dir: Path) -> int:
    """Direct scattering; the archive is written before the gate is applied"""
    potential = _potential(cfg)
    _, zgrid = make_grids(cfg.L, cfg.N, cfg.Z, cfg.M)
    data = direct_scattering(potential, zgrid, stepper=cfg.stepper, max_phase_step=cfg.max_phase_step)
    json_path, csv_path = write_scattering_archive(data, out_dir)
    ledger.log_artifact("scattering_archive", str(json_path))
    ledger.log_artifact("scattering_csv", str(csv_path))
    if cfg.debug:
        ledger.log_artifact("potential_csv", str(write_potential_csv(out_dir / "potential.csv", potential.grid.nodes, potential.u)))
    check_gate(data, cfg.gate_tol)
    return 0


def cmd_invert(cfg: RunConfig, archive: Path, out_dir: Path, threads: int = 1) -> int:
    """RH inversion of an archive onto the configured spatial grid"""
    data = read_scattering_archive(archive)
    check_gate(data, cfg.gate_tol)

    grid, _ = make_grids(cfg.L, cfg.N, cfg.Z, cfg.M)
    plan = make_plan(data.zgrid, cfg.pad_factor, cfg.taper_fraction, cfg.window_tol)
    options = solver_options(cfg)
    deltas = delta_solve(data.r_plus, data.r_minus, plan)

    reference_source = data.metadata.get("source") if data.t == 0 else None
    reference = _archive_reference(reference_source, grid, cfg) if reference_source else None

    result = reconstruct_field(data, deltas, grid, plan, options, reference=reference, threads=threads)

    if cfg.debug:
        ledger.log_artifact("delta_csv", str(write_delta_csv(out_dir / "deltas.csv", deltas, data.zgrid.nodes)))
        state = solve_rh_positive(0.0, data, plan, options)
        ledger.log_artifact("state_csv", str(write_state_csv(out_dir / "state_x0.csv", state, data.zgrid.nodes)))

    summary = {
        "roundtrip_error": result.roundtrip_error,
        "seam_gap": result.seam_gap,
        "seam_jump": result.metadata["seam_jump"],
        "w_residual_max": float(np.max(result.w_residual)),
        "norms": result.norms.as_dict(),
        "max_iterations": result.metadata["max_iterations"],
        "gmres_points": result.metadata["gmres_points"],
        "min_abs_a": data.min_abs_a,
        "unitarity_max_err": data.unitarity_max_err,
        "delta_modulus_err": deltas.modulus_err,
        "delta_jump_residual": deltas.jump_residual,
        "t": data.t,
        "reference_source": reference_source if reference is not None else None,
        "config_hash": cfg.config_hash(),
    }
    csv_path, json_path = write_reconstruction(out_dir, grid.nodes, result.u_rec, result.w_residual, summary)
    ledger.log_artifact("reconstruction_csv", str(csv_path))
    ledger.log_artifact("summary_json", str(json_path))
    return 0


def cmd_evolve(cfg: RunConfig, out_dir: Path, threads: int = 1) -> int:
    """IST and reference solutions at every snapshot time plus their comparison"""
    potential = _potential(cfg)
    grid = potential.grid
    _, zgrid = make_grids(cfg.L, cfg.N, cfg.Z, cfg.M)
    plan = make_plan(zgrid, cfg.pad_factor, cfg.taper_fraction, cfg.window_tol)
    evolution = EvolutionConfig.from_run_config(cfg)
    options = solver_options(cfg)

    data = direct_scattering(potential, zgrid, stepper=cfg.stepper, max_phase_step=cfg.max_phase_step)
    check_gate(data, cfg.gate_tol)
    ref = reference_solve(potential, cfg.t_final, evolution)

    records = []
    for t in cfg.snapshot_times:
        ist = ist_solve(
            potential, t, evolution, zgrid, plan, options, stepper=cfg.stepper, gate_tol=cfg.gate_tol,
            threads=threads, scattering=data, max_phase_step=cfg.max_phase_step,
        )
        records.append(compare(ist, ref, potential, t))
        ledger.log_artifact("snapshot_ist", str(write_snapshot(out_dir, "ist", t, grid.nodes, ist.u_rec)))
        ledger.log_artifact("snapshot_ref", str(write_snapshot(out_dir, "ref", t, grid.nodes, ref.snapshots[t])))

    payload = dict(records[-1])
    payload["snapshots"] = records
    payload["reference_steps"] = ref.steps
    payload["reference_dt"] = ref.dt
    payload["config_hash"] = cfg.config_hash()
    ledger.log_artifact("comparison_json", str(write_json(out_dir / "comparison.json", payload)))
    return 0


def cmd_reference(cfg: RunConfig, out_dir: Path) -> int:
    """Pseudo-spectral reference solve only"""
    potential = _potential(cfg)
    ref = reference_solve(potential, cfg.t_final, EvolutionConfig.from_run_config(cfg))
    for t, u in sorted(ref.snapshots.items()):
        ledger.log_artifact("snapshot_ref", str(write_snapshot(out_dir, "ref", t, potential.grid.nodes, u)))
    payload = {
        "t": ref.t,
        "mass0": ref.mass0,
        "mass_drift_ref": ref.mass_drift,
        "steps": ref.steps,
        "dt": ref.dt,
        "config_hash": cfg.config_hash(),
    }
    ledger.log_artifact("reference_json", str(write_json(out_dir / "reference.json", payload)))
    return 0


def cmd_verify(cfg: RunConfig, suite: str, out_dir: Path, threads: int = 1) -> int:
    """Run a verification suite; exit 0 only when every check passes"""
    report = run_suite(cfg, suite, threads=threads)
    path = write_json(out_dir / f"verify_{suite}.json", report.to_dict())
    ledger.log_artifact("suite_report", str(path))
    failed = [record.name for record in report.records if not record.passed]
    if failed:
        logger.warning(f"Suite '{suite}' failed checks: {', '.join(failed)}")
        return 3
    logger.info(f"Suite '{suite}' passed ({len(report.records)} checks)")
    return 0


class HarnessArgumentParser(argparse.ArgumentParser):
    """Usage errors exit 1; exit code 2 belongs to the soliton gate"""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = HarnessArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value run config")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides out_dir)")
    common.add_argument("--dry-run", action="store_true", help="print the normalized config and exit")
    common.add_argument("--threads", type=int, metavar="N", help="workers for the x-sweep (fallback: NLSGI_THREADS)")

    parser = HarnessArgumentParser(prog="nlsgi", description="Inverse scattering engine for the NLS-GI equation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("scatter", parents=[common], help="direct scattering to an archive")
    invert = commands.add_parser("invert", parents=[common], help="RH inversion of an archive")
    invert.add_argument("--archive", metavar="PATH", help="scattering archive JSON (default: config archive or OUT/scattering.json)")
    commands.add_parser("evolve", parents=[common], help="IST evolution against the reference solver")
    verify = commands.add_parser("verify", parents=[common], help="run a verification suite")
    verify.add_argument("--suite", help="identities, projectors, roundtrip, evolution, lipschitz or all")
    commands.add_parser("reference", parents=[common], help="reference PDE solve only")
    return parser


def resolve_threads(cli_threads: Optional[int], cfg: RunConfig) -> int:
    if cli_threads is not None:
        if cli_threads < 1:
            raise ConfigError(f"--threads must be at least 1, got {cli_threads}")
        return cli_threads
    if cfg.threads is not None:
        return cfg.threads
    try:
        env_threads = Settings().NLSGI_THREADS
    except ValidationError as e:
        raise ConfigError(f"NLSGI_THREADS is not a valid integer: {e.errors()[0]['msg']}") from e
    if env_threads < 1:
        raise ConfigError(f"NLSGI_THREADS must be at least 1, got {env_threads}")
    return env_threads


def run(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config)
    if args.out:
        cfg = cfg.model_copy(update={"out_dir": args.out})
    if args.command == "verify" and args.suite:
        cfg = cfg.model_copy(update={"suite": args.suite})
    threads = resolve_threads(args.threads, cfg)

    if args.dry_run:
        sys.stdout.write(cfg.normalized())
        return 0

    out_dir = Path(cfg.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"output directory {out_dir} is not writable: {e}") from e

    ledger.log_run_start(args.command, cfg.config_hash(), {"out_dir": str(out_dir), "threads": threads})
    if args.command == "scatter":
        return cmd_scatter(cfg, out_dir)
    if args.command == "invert":
        archive = Path(getattr(args, "archive", None) or cfg.archive or out_dir / "scattering.json")
        return cmd_invert(cfg, archive, out_dir, threads)
    if args.command == "evolve":
        return cmd_evolve(cfg, out_dir, threads)
    if args.command == "verify":
        return cmd_verify(cfg, cfg.suite, out_dir, threads)
    return cmd_reference(cfg, out_dir)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging()

    try:
        code = run(args)
    except SolitonGateError as e:
        ledger.log_gate_refusal(e.min_abs_a, e.zero_count)
        sys.stderr.write(f"nlsgi: {e}\n")
        code = e.exit_code
    except NLSGIError as e:
        if e.exit_code == 3:
            ledger.log_numerical_failure(args.command, str(e))
        else:
            logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"nlsgi: {e}\n")
        code = e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed with an I/O error: {e}")
        sys.stderr.write(f"nlsgi: {e}\n")
        code = 1

    ledger.log_run_end(args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
