"""``simulate`` command-line entry point.

Subcommands::

    simulate sweep --kind {snr|r|p} [--config PATH] [--out DIR] [--seed U64]
    simulate calibrate-zeta --snr DB --trials N [--config PATH]
    simulate demo --snr DB --seed U64 [--config PATH] [--scenario {los|nlos}]

``--out`` defaults to ``$LOSENCE_OUT_DIR`` and then to ``./results``.
"""

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .channel import Scenario
from .config import ConfigError, config_digest, config_to_dict, load_config
from .estimation import los_ence
from .harness import (
    SimConfig,
    SweepKind,
    calibrate_zeta,
    nmse,
    retained_taps,
    run_sweep,
    simulate_frame,
)

log = logging.getLogger("losence")

OUT_DIR_ENV = "LOSENCE_OUT_DIR"
CSV_HEADER = ("method", "param_tag", "snr_db", "mean_nmse", "trials")

SWEEP_FILES = {
    SweepKind.SNR: "fig2_nmse_vs_snr",
    SweepKind.R: "fig3_nmse_vs_r",
    SweepKind.P: "fig4_nmse_vs_p",
}
DEFAULT_SWEEP_VALUES = {
    SweepKind.SNR: None,
    SweepKind.R: (0.4, 0.7, 1.0),
    SweepKind.P: (5, 9, 13),
}


@dataclass(frozen=True)
class RunManifest:
    config_digest: str
    artifact_version: str
    timestamp: str
    output_paths: list
    master_seed: int
    sweep: str
    sweep_values: list
    config: dict

    def to_json(self):
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"


def records_to_csv(records):
    rows = sorted(
        records, key=lambda rec: (rec.method.value, rec.param_tag, rec.snr_db)
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in rows:
        writer.writerow(
            [rec.method.value, rec.param_tag, f"{rec.snr_db:g}", f"{rec.mean_nmse:.9e}", rec.trials]
        )
    return buf.getvalue()


def cmd_sweep(kind, config, out_dir, values=None, workers=1):
    """Run one sweep, write its CSV and manifest, return the manifest."""
    kind = SweepKind(kind)
    if values is None:
        values = DEFAULT_SWEEP_VALUES[kind]
    records = run_sweep(config, kind, values, workers=workers)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = SWEEP_FILES[kind]
    csv_path = out_dir / f"{stem}.csv"
    csv_path.write_text(records_to_csv(records))

    manifest = RunManifest(
        config_digest=config_digest(config),
        artifact_version=__version__,
        timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        output_paths=[str(csv_path)],
        master_seed=config.master_seed,
        sweep=kind.value,
        sweep_values=list(values) if values is not None else list(config.snr_grid_db),
        config=config_to_dict(config),
    )
    (out_dir / f"{stem}.manifest.json").write_text(manifest.to_json())
    return manifest


def cmd_calibrate_zeta(config, snr_db, trials, out=None):
    out = out or sys.stdout
    cal = calibrate_zeta(config, snr_db, trials)
    print(f"zeta = {cal.zeta:.6g}", file=out)
    print(f"accuracy = {cal.accuracy:.4f} ({trials} LoS + {trials} NLoS frames at {snr_db:g} dB)", file=out)
    print(
        f"median kurtosis: LoS {np.median(cal.los_kurtosis):.4g}, NLoS {np.median(cal.nlos_kurtosis):.4g}",
        file=out,
    )
    return cal.zeta


def cmd_demo(config, snr_db, seed, scenario=None):
    """Single-trial walkthrough of the estimator; returns the report text."""
    rng = np.random.default_rng(seed)
    frame = simulate_frame(config, snr_db, rng, scenario)
    res = los_ence(frame.x_fd, frame.y_fd, config.sensing)
    ch = frame.channel

    lines = [
        f"SNR: {snr_db:g} dB   seed: {seed}",
        f"true scenario: {ch.scenario.value}   g = {ch.large_scale_g:.6f}   k = {ch.rician_k:.6f}",
        "true taps:",
        "  delay  gain                          |gain|",
    ]
    for d, c in ch.taps:
        lines.append(f"  {d:5d}  {c.real:+.6e}{c.imag:+.6e}j  {abs(c):.6e}")
    kappa = "undefined (constant magnitudes)" if res.degenerate else f"{res.kurtosis:.6g}"
    lines += [
        f"kurtosis: {kappa}   zeta = {config.sensing.zeta:g}",
        f"sensed scenario: {res.sensed.value}",
        f"sigma2_hat: {res.sigma2_hat:.6e}",
        f"CFAR threshold: {res.cfar_threshold:.6e}",
    ]
    if res.sensed is Scenario.LOS:
        lines.append(f"LoS-aided threshold: {res.los_threshold:.6e}")
        lines.append("branch: LoS (LoS-aided threshold applied)")
    else:
        lines.append("branch: NLoS (CFAR threshold applied)")
    kept = retained_taps(res.h_enhanced)
    lines += [
        f"retained taps ({kept.size}): {' '.join(str(i) for i in kept)}",
        f"NMSE before denoising: {nmse(res.h_ls, frame.h_true):.6e}",
        f"NMSE after denoising:  {nmse(res.h_enhanced, frame.h_true):.6e}",
    ]
    return "\n".join(lines) + "\n"


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="simulate", description="LoS-sensing enhanced OFDM channel estimation simulator"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="NMSE sweep written as CSV plus manifest")
    p.add_argument("--kind", required=True, choices=[k.value for k in SweepKind])
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_DIR_ENV} or ./results)")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--trials", type=int, help="override trials per point")
    p.add_argument("--values", type=float, nargs="+", help="override the r or P sweep values")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("calibrate-zeta", help="fit the kurtosis decision threshold")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=_u64)

    p = sub.add_parser("demo", help="walk through one trial")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--seed", type=_u64, required=True)
    p.add_argument("--config", type=Path)
    p.add_argument("--scenario", choices=["los", "nlos"])
    return parser


def _resolve_config(args):
    cfg = load_config(args.config) if args.config else SimConfig()
    if getattr(args, "seed", None) is not None and args.command != "demo":
        cfg = replace(cfg, master_seed=args.seed)
    if getattr(args, "trials", None) is not None and args.command == "sweep":
        cfg = replace(cfg, trials_per_point=args.trials)
    return cfg


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        cfg = _resolve_config(args)
        if args.command == "sweep":
            out = args.out or Path(os.environ.get(OUT_DIR_ENV, "results"))
            values = args.values
            if values is not None and args.kind == SweepKind.P.value:
                values = [int(v) if float(v).is_integer() else v for v in values]
            manifest = cmd_sweep(args.kind, cfg, out, values, workers=args.workers)
            for path in manifest.output_paths:
                print(path)
        elif args.command == "calibrate-zeta":
            cmd_calibrate_zeta(cfg, args.snr, args.trials)
        else:
            scenario = {"los": Scenario.LOS, "nlos": Scenario.NLOS}.get(args.scenario)
            sys.stdout.write(cmd_demo(cfg, args.snr, args.seed, scenario))
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
