"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.  Every
failure prints a single ``rtfx: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import cocomo as cocomo_mod
from .audio_io import WavError, WavSpec, read_wav_block, synth_signal, write_wav
from .chain import ChainConfig, build_graph, parse_chain_config
from .dsp import AnalysisError, AudioBlock, ConfigurationError, DSPError, analyze_stability
from .effects import EffectGraph, ReverbConfig, make_schroeder_reverb
from .scheduler import (
    LoadProfile,
    ScheduleMode,
    StreamConfig,
    StreamError,
    compare_modes,
    run_stream,
)
from .stressmath import (
    PUBLISHED_ALPHA,
    dc_discrepancy,
    partial_fractions,
    published_B,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read_config(path: str, default_rate: int) -> ChainConfig:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return parse_chain_config(text, default_rate=default_rate)


def _dump_columns(values: np.ndarray, out) -> None:
    for i, v in enumerate(values):
        out.write(f"{i}\t{float(v)!r}\n")


def _fmt_complex(z: complex, digits: int = 6) -> str:
    return f"{z.real:.{digits}g}{z.imag:+.{digits}g}j"


# ---------------------------------------------------------------------------
# subcommands


def cmd_process(args) -> int:
    in_path = Path(args.input)
    if not in_path.is_file():
        raise UsageError(f"input file not found: {args.input}")
    spec, block = read_wav_block(in_path)
    cfg = _read_config(args.config, default_rate=spec.sample_rate_hz)
    if cfg.sample_rate_hz != spec.sample_rate_hz:
        raise DataError(f"config rate {cfg.sample_rate_hz} Hz does not match "
                        f"{args.input} at {spec.sample_rate_hz} Hz")
    graph = build_graph(cfg)
    blocks = block.split(args.block_frames) if block.frames else []
    out_blocks: list[AudioBlock] = []
    if args.mode:
        load = LoadProfile(args.workers if args.workers is not None else os.cpu_count() or 1,
                           args.load)
        stream_cfg = StreamConfig(block_frames=max(args.block_frames, 16),
                                  sample_rate_hz=spec.sample_rate_hz,
                                  pacing=args.pacing, run_blocks=len(blocks))
        report = run_stream(graph, blocks, out_blocks.append, ScheduleMode.parse(args.mode),
                            load, stream_cfg)
        print(report.text())
        print(json.dumps(report.record(), sort_keys=True))
    else:
        out_blocks = [graph.process(b) for b in blocks]
    depth = {"16": "pcm16", "float": "float32", None: spec.bit_depth}[args.bits]
    out_spec = WavSpec(spec.channels, spec.sample_rate_hz, depth)
    clipped = write_wav(args.output, out_spec, out_blocks)
    if clipped:
        print(f"warning: {clipped} samples clipped", file=sys.stderr)
    if args.ir:
        y = AudioBlock.concat(out_blocks).samples[0] if out_blocks else np.zeros(0)
        _dump_columns(y[:args.ir], sys.stdout)
    return EXIT_OK


def _analyze_graph(graph: EffectGraph) -> list[dict]:
    rows = []
    for node in graph.nodes():
        tf = node.tf
        try:
            st = analyze_stability(tf)
        except AnalysisError as exc:
            raise RuntimeError(f"{tf.name}: {exc}") from exc
        rows.append({
            "name": tf.name,
            "numerator": [[lag, c] for lag, c in tf.numerator],
            "denominator": [[lag, c] for lag, c in tf.denominator],
            "reduced_lag_gcd": st.reduced_lag_gcd,
            "poles": [[p.real, p.imag, m] for p, m in zip(st.poles, st.pole_magnitudes)],
            "classification": st.classification,
        })
    return rows


def _stress_rows(cfg: ChainConfig) -> list[dict]:
    rows = []
    for spec in cfg.effects:
        if spec.kind != "stress":
            continue
        K, g, D = spec.params["K"], spec.params["g"], spec.params["D"]
        pf = partial_fractions(K, g)
        dc = dc_discrepancy(K, g)
        row = {
            "K": K, "g": g, "D": D,
            "alpha": [pf.alpha.real, pf.alpha.imag],
            "A": pf.A, "B": [pf.B.real, pf.B.imag], "C": [pf.C.real, pf.C.imag],
            "A_undivided": dc.undivided, "recursion_dc": dc.recursion_mean,
            "discrepancy": dc.note(),
        }
        if dc.matches_published and abs(g - 0.7) < 1e-12:
            row["published_alpha"] = [PUBLISHED_ALPHA.real, PUBLISHED_ALPHA.imag]
            row["published_A"] = 1.36
            pb = published_B()
            row["published_B"] = [pb.real, pb.imag]
        rows.append(row)
    return rows


def cmd_analyze(args) -> int:
    cfg = _read_config(args.config, default_rate=args.sample_rate)
    graph = build_graph(cfg)
    nodes = _analyze_graph(graph)
    stress = _stress_rows(cfg)
    if args.json:
        print(json.dumps({"rate": cfg.sample_rate_hz, "nodes": nodes, "stress": stress}))
        return EXIT_OK
    if not nodes:
        print("identity chain: H(z) = 1, stable")
    for row in nodes:
        print(f"[{row['name']}]")
        print("  numerator:   " + " ".join(f"{c:+.6g}z^-{lag}" for lag, c in row["numerator"]))
        print("  denominator: " + " ".join(f"{c:+.6g}z^-{lag}" for lag, c in row["denominator"]))
        if row["poles"]:
            print(f"  poles (w = z^{row['reduced_lag_gcd']}):")
            for re, im, mag in row["poles"]:
                print(f"    {_fmt_complex(complex(re, im), 6):>28}   |p| = {mag:.12f}")
        print(f"  classification: {row['classification']}")
    for row in stress:
        a = complex(*row["alpha"])
        print(f"[stress K={row['K']:g} g={row['g']:g} D={row['D']}] partial fractions")
        print(f"  alpha = {_fmt_complex(a, 3)}  (exact {_fmt_complex(a, 9)}, |alpha| = {abs(a):.12f})")
        print(f"  A = {row['A']:.5f}")
        print(f"  B = {_fmt_complex(complex(*row['B']), 6)}   C = conj(B)")
        if "published_alpha" in row:
            pa = complex(*row["published_alpha"])
            print(f"  published alpha = {_fmt_complex(pa, 3)} (|diff| = {abs(pa - a):.2e})")
            pb = complex(*row["published_B"])
            print(f"  published B expression = {_fmt_complex(pb, 6)} "
                  f"(|diff| = {abs(pb - complex(*row['B'])):.2e})")
            print(f"  published A = 1.36 vs computed A = {row['A']:.5f}")
        print(f"  NOTE: {row['discrepancy']}")
    return EXIT_OK


def cmd_ir(args) -> int:
    cfg = _read_config(args.config, default_rate=args.sample_rate)
    graph = build_graph(cfg)
    x = np.zeros((1, args.length))
    x[0, 0] = 1.0
    y = graph.process(AudioBlock(x, cfg.sample_rate_hz)).samples[0]
    _dump_columns(y, sys.stdout)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.repetitions < 1:
        raise UsageError("repetitions must be >= 1")
    if args.duration <= 0:
        raise UsageError("duration must be positive")
    if args.config:
        cfg = _read_config(args.config, default_rate=args.sample_rate)
        graph = build_graph(cfg)
        rate = cfg.sample_rate_hz
    else:
        rate = args.sample_rate
        graph = make_schroeder_reverb(ReverbConfig(), rate)
    stream_cfg = StreamConfig(block_frames=args.block_frames, sample_rate_hz=rate,
                              pacing=args.pacing)
    blocks = synth_signal("noise", args.duration, rate, seed=args.seed,
                          channels=args.channels, block_frames=args.block_frames)
    load = LoadProfile(args.workers if args.workers is not None else os.cpu_count() or 1,
                       args.load)
    wins = 0
    checksums = set()
    for rep in range(args.repetitions):
        cmp = compare_modes(graph, blocks, load, stream_cfg)
        wins += cmp.critical_no_worse
        checksums.update((cmp.idle.output_checksum, cmp.critical.output_checksum))
        print(json.dumps({"repetition": rep, **cmp.record()}, sort_keys=True), flush=True)
    verdict = "true" if wins * 10 >= 9 * args.repetitions else "false"
    print(f"verdict: critical <= idle misses in {wins}/{args.repetitions} repetitions; "
          f"checksums {'identical' if len(checksums) == 1 else 'DIFFER'}; "
          f"critical_no_worse={verdict}")
    return EXIT_OK


def cmd_cocomo(args) -> int:
    if not args.kloc > 0:
        raise UsageError(f"kloc must be positive, got {args.kloc:g}")
    if args.project_class:
        p = cocomo_mod.PRESETS[args.project_class]
    else:
        p = cocomo_mod.PRESETS["embedded"]
    overrides = {k: v for k, v in (("a", args.a), ("A_exp", args.A), ("b", args.b),
                                   ("B_exp", args.B)) if v is not None}
    if overrides:
        vals = {"a": p.a, "A_exp": p.A_exp, "b": p.b, "B_exp": p.B_exp, **overrides}
        try:
            p = cocomo_mod.CocomoParams(**vals, project_class="custom")
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.monthly_rate is not None and not args.monthly_rate > 0:
        raise UsageError("rate must be positive")
    est = cocomo_mod.estimate(args.kloc, p, args.monthly_rate)
    table = est.table(args.rounding)
    record = {"class": p.project_class, "a": p.a, "A": p.A_exp, "b": p.b, "B": p.B_exp,
              "kloc": args.kloc, **table}
    if args.actual_effort is not None and args.actual_tdev is not None:
        actual = cocomo_mod.from_actuals(args.kloc, args.actual_effort, args.actual_tdev,
                                         args.monthly_rate)
        record["actual"] = actual.table(args.rounding)
        record["advantage"] = {k: round(v, 2) for k, v in
                               cocomo_mod.advantage(est, actual).items()}
    if args.json:
        print(json.dumps(record))
        return EXIT_OK
    print(f"class {p.project_class}: a={p.a:g} A={p.A_exp:g} b={p.b:g} B={p.B_exp:g}, "
          f"KLOC={args.kloc:g}")
    print(f"  effort        {table['effort_pm']} person-months")
    print(f"  tdev          {table['tdev_months']} months ({table['billed_months']} billed)")
    print(f"  productivity  {table['productivity_loc_pm']} LOC/person-month")
    print(f"  staff         {table['avg_staff']}")
    if "cost" in table:
        print(f"  cost          {table['cost']} ({table['billed_months']} x {args.monthly_rate:g})")
    if "actual" in record:
        act = record["actual"]
        print(f"  actual: effort {act['effort_pm']}, tdev {act['tdev_months']}, "
              f"productivity {act['productivity_loc_pm']}, staff {act['avg_staff']}"
              + (f", cost {act['cost']}" if "cost" in act else ""))
        for k, v in record["advantage"].items():
            print(f"  {k:<13} factor {v:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rtfx", description="Delay-based audio effects, analysis and "
                     "scheduling benchmarks.")
    # global flags are accepted before or after the subcommand (cocomo: before only,
    # since its --rate is the monthly cost rate)
    common = argparse.ArgumentParser(add_help=False)
    for target, default in ((parser, None), (common, argparse.SUPPRESS)):
        target.add_argument("--rate", dest="sample_rate", type=int,
                            default=44100 if default is None else default,
                            help="sample rate for configs without a rate= header (default 44100)")
        target.add_argument("--block-frames", type=int,
                            default=512 if default is None else default,
                            help="frames per processing block (default 512)")
        target.add_argument("--seed", type=int, default=0 if default is None else default,
                            help="seed for synthetic signals (default 0)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("process", parents=[common], help="run a WAV file through an effect chain")
    p.add_argument("input", help="input WAV (16-bit PCM or 32-bit float)")
    p.add_argument("config", help="effect chain config file")
    p.add_argument("output", help="output WAV path")
    p.add_argument("--mode", choices=["idle", "critical"],
                   help="stream through the scheduler in this mode and print a report")
    p.add_argument("--load", type=float, default=0.0, help="load duty cycle in [0, 1]")
    p.add_argument("--workers", type=int, help="load workers (default: logical cores)")
    p.add_argument("--pacing", choices=["realtime", "asap"], default="realtime")
    p.add_argument("--bits", choices=["16", "float"],
                   help="output encoding (default: same as input)")
    p.add_argument("--ir", type=int, default=0, metavar="N",
                   help="also print the first N output samples as 'index value' columns")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("analyze", parents=[common], help="coefficients, poles and stress-derivation report")
    p.add_argument("config")
    p.add_argument("--json", action="store_true", help="emit one JSON record")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ir", parents=[common], help="print the chain's impulse response")
    p.add_argument("config")
    p.add_argument("--length", type=int, default=1024)
    p.set_defaults(func=cmd_ir)

    p = sub.add_parser("bench", parents=[common], help="compare idle-task and critical-task scheduling")
    p.add_argument("config", nargs="?", help="chain config (default: Schroeder reverb)")
    p.add_argument("--duration", type=float, default=1.0, help="seconds of audio per run")
    p.add_argument("--load", type=float, default=0.9, help="load duty cycle in [0, 1]")
    p.add_argument("--workers", type=int, help="load workers (default: logical cores)")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--channels", type=int, default=1, choices=[1, 2])
    p.add_argument("--pacing", choices=["realtime", "asap"], default="realtime")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cocomo", help="basic COCOMO estimate")
    p.add_argument("kloc", type=float, help="size in thousands of lines of code")
    cls = p.add_mutually_exclusive_group()
    for name in cocomo_mod.PRESETS:
        cls.add_argument(f"--{name}", dest="project_class", action="store_const", const=name,
                         help=f"{name} class constants")
    p.add_argument("--a", type=float, help="effort multiplier")
    p.add_argument("--A", type=float, help="effort exponent")
    p.add_argument("--b", type=float, help="schedule multiplier")
    p.add_argument("--B", type=float, help="schedule exponent")
    p.add_argument("--rate", dest="monthly_rate", type=float,
                   help="cost per person-month; cost = ceil(tdev) * rate")
    p.add_argument("--actual-effort", type=float, help="measured effort for comparison")
    p.add_argument("--actual-tdev", type=float, help="measured development time")
    p.add_argument("--rounding", choices=["truncate", "half-up"], default="truncate")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_cocomo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.block_frames < 1:
            raise UsageError("--block-frames must be >= 1")
        return args.func(args)
    except UsageError as exc:
        code, msg = EXIT_USAGE, str(exc)
    except (ConfigurationError, WavError, DataError, ValueError) as exc:
        code, msg = EXIT_DATA, str(exc)
    except (StreamError, DSPError, RuntimeError, OSError) as exc:
        code, msg = EXIT_RUNTIME, str(exc)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    prefix = "" if msg.startswith("rtfx") else "rtfx: "
    print((prefix + msg).replace("\n", " "), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
