"""Command-line interface.

Subcommands: ``simulate``, ``sweep-cond``, ``train``, ``reproduce-tables``,
``codec encode|decode``, ``codebook``.  Configs are JSON files matching the
``ScenarioConfig`` schema (unknown keys are rejected).  Every run echoes the
fully resolved configuration.  Exit codes: 0 success, 2 configuration or
input-format error, 3 numerical failure.
"""

import argparse
import csv
import json
import sys

import numpy as np

from .codec import CompressedFrame, compression_ratio, decode, encode, lloyd_max_codebook
from .exceptions import ChannelFileError, ConfigError, FrameParseError, NumericalError
from .harness import (
    ScenarioConfig,
    PreparedScenario,
    compression_table,
    run_scenario,
    sweep_condition_numbers,
    write_report,
    RunReport,
)
from .optimizer import LossWeights, train_profile
from .validation import as_profile

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_config(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return ScenarioConfig.from_dict(data)


def _echo_config(cfg: ScenarioConfig) -> None:
    print(json.dumps({"resolved_config": cfg.to_dict()}, sort_keys=True))


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _parse_float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    _echo_config(cfg)
    report = run_scenario(cfg)
    if args.seeds > 1:
        for offset in range(1, args.seeds):
            extra = run_scenario(cfg, seed=cfg.seed + offset)
            extra.rows[0] = (offset,) + extra.rows[0][1:]
            report.rows.extend(extra.rows)
            report.seeds.extend(extra.seeds)
    write_report(report, args.out)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_sweep_cond(args) -> int:
    cfg = _load_config(args.config)
    _echo_config(cfg)
    report = sweep_condition_numbers(cfg, _parse_float_list(args.conds),
                                     _parse_int_list(args.bits), args.seeds)
    write_report(report, args.out)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    _echo_config(cfg)
    if args.mode == "online":
        scenarios = [PreparedScenario(cfg).training_scenario()]
    else:
        scenarios = [
            PreparedScenario(cfg, cfg.seed + 1 + k).training_scenario()
            for k in range(max(2, args.train_scenarios))
        ]
    weights = LossWeights(evm_target_percent=cfg.evm_target_percent)
    profile = train_profile(args.mode, scenarios, weights,
                            budget=args.budget, seed=cfg.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["beam_index", "bits"])
        for i, b in enumerate(profile):
            writer.writerow([i, int(b)])
    cr = compression_ratio(profile, n_rb=cfg.n_rb, n12=cfg.n12,
                           n_rx=cfg.m_antennas, b_fp=cfg.b_fp, b_exp=cfg.b_exp)
    print(f"trained profile: {profile.tolist()}")
    print(f"mean bits {float(np.mean(profile)):.6g}, compression ratio {cr:.6g}")
    print(f"wrote profile to {args.out}")
    return EXIT_OK


def _cmd_reproduce_tables(args) -> int:
    cfg = _load_config(args.config)
    _echo_config(cfg)
    beam_counts = tuple(_parse_int_list(args.beams))
    report = compression_table(cfg, beam_counts=beam_counts, budget=args.budget,
                               n_train_scenarios=args.train_scenarios)
    write_report(report, args.out)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_codec_encode(args) -> int:
    grid = np.load(args.input)
    profile_bits = _parse_int_list(args.bits)
    n_beam = grid.shape[1] if grid.ndim == 2 else 0
    profile = (as_profile(profile_bits[0], n_beam) if len(profile_bits) == 1
               else as_profile(profile_bits, n_beam))
    frame = encode(grid, profile, b_exp=args.b_exp, n12=args.n12)
    with open(args.output, "wb") as fh:
        fh.write(frame.to_bytes())
    print(f"encoded {grid.shape[0]}x{grid.shape[1]} grid, "
          f"{frame.payload_bit_length} payload bits, "
          f"{frame.saturation_count} saturated blocks")
    return EXIT_OK


def _cmd_codec_decode(args) -> int:
    with open(args.input, "rb") as fh:
        frame = CompressedFrame.from_bytes(fh.read())
    grid = decode(frame)
    np.save(args.output, grid)
    print(f"decoded {grid.shape[0]}x{grid.shape[1]} grid to {args.output}")
    return EXIT_OK


def _cmd_codebook(args) -> int:
    cb = lloyd_max_codebook(args.bits)
    report = RunReport(config={"bits": args.bits},
                       columns=["index", "level", "upper_threshold"],
                       rows=[(i, float(cb.levels[i]),
                              float(cb.thresholds[i]) if i < cb.thresholds.size else "inf")
                             for i in range(cb.levels.size)])
    if args.out:
        write_report(report, args.out)
        print(f"wrote {len(report.rows)} levels to {args.out}")
    else:
        for row in report.rows:
            print(f"{row[0]},{row[1]:.10g},{row[2] if isinstance(row[2], str) else format(row[2], '.10g')}")
    print(f"distortion at unit variance: {cb.mse:.10g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fhcodec",
        description="Fronthaul beamspace block floating-point compression toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario end to end")
    p.add_argument("config")
    p.add_argument("--out", default="simulate.csv")
    p.add_argument("--seeds", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep-cond", help="measured vs predicted error sweep")
    p.add_argument("config")
    p.add_argument("--conds", default="10,30,100,300,1000")
    p.add_argument("--bits", default="4,6,8,10")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--out", default="sweep_cond.csv")
    p.set_defaults(func=_cmd_sweep_cond)

    p = sub.add_parser("train", help="train per-beam mantissa bitwidths")
    p.add_argument("config")
    p.add_argument("--mode", choices=("online", "offline"), default="online")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--train-scenarios", type=int, default=4)
    p.add_argument("--out", default="profile.csv")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("reproduce-tables", help="trained vs fixed compression table")
    p.add_argument("config")
    p.add_argument("--beams", default="16,32")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--train-scenarios", type=int, default=4)
    p.add_argument("--out", default="tables.csv")
    p.set_defaults(func=_cmd_reproduce_tables)

    p = sub.add_parser("codec", help="stand-alone encode/decode of grid files")
    codec_sub = p.add_subparsers(dest="codec_command", required=True)
    enc = codec_sub.add_parser("encode", help="grid .npy -> frame file")
    enc.add_argument("input")
    enc.add_argument("output")
    enc.add_argument("--bits", default="6", help="uniform bits or comma list per beam")
    enc.add_argument("--b-exp", type=int, default=4, dest="b_exp")
    enc.add_argument("--n12", type=int, default=12)
    enc.set_defaults(func=_cmd_codec_encode)
    dec = codec_sub.add_parser("decode", help="frame file -> grid .npy")
    dec.add_argument("input")
    dec.add_argument("output")
    dec.set_defaults(func=_cmd_codec_decode)

    p = sub.add_parser("codebook", help="print a Lloyd-Max codebook")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_codebook)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ChannelFileError, FrameParseError, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
