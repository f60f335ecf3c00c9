"""Command-line entry point: ``ionseq compile|sim|bench|analyze|decode|presets``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from ._toml import load_toml
from .analysis import StreamConfig, reproduction_table, table_json, table_markdown
from .channels import power_of_two_sweep, presets, run_trials
from .compiler import compile_program, emit_raw_stream, load_circuit_file, load_gate_file
from .dds import CrosstalkMixer, CrosstalkTap, crosstalk_scale
from .errors import ConfigError, IonSeqError
from .sequencer import Simulator
from .wordcodec import decode_word, read_stream, word_type, write_stream

# Settings each command accepts from a config file, with their defaults.
DEFAULTS = {
    "compile": {"gates": None, "circuit": None, "raw": False, "out": None, "report": None},
    "sim": {"stream": None, "cycles": None, "trigger_cycle": None, "fifo_depth": 64,
            "phase_bits": 40, "ffwd_phase": 0, "harmonic": 0, "channels": None,
            "out": None, "events": None, "crosstalk": [], "seed": 0},
    "bench": {"preset": None, "payloads": None, "min_payload": 4, "max_payload": 1 << 20,
              "trials": 100, "seed": 0, "bins": 20, "out": None, "hist": None},
    "analyze": {"format": "markdown", "out": None, "w_bus": 32, "f_dma": 333e6, "n_ch": 8,
                "n_p": 8, "f_seq": 409.6e6, "pack_capacity": 20},
    "decode": {"stream": None, "out": None},
    "presets": {},
}


def _resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults, overridden by the config file section, overridden by flags."""
    cfg = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        doc = load_toml(args.config)
        unknown_sections = set(doc) - set(DEFAULTS)
        if unknown_sections:
            raise ConfigError(f"unknown config sections {sorted(unknown_sections)}")
        section = doc.get(command, {})
        unknown = set(section) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown keys in [{command}]: {sorted(unknown)}")
        cfg.update(section)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            cfg[key] = value
    return cfg


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_compile(cfg: dict) -> int:
    if not cfg["gates"]:
        raise ConfigError("compile needs a gate definition file")
    gates, circuit = load_gate_file(cfg["gates"])
    if cfg["circuit"]:
        circuit = load_circuit_file(cfg["circuit"])
    circuit = circuit or []
    if cfg["raw"]:
        words = emit_raw_stream(gates, circuit)
        per_channel: dict[str, int] = {}
        for w in words:
            ch = str(w.routing.bit_length() - 1)
            per_channel[ch] = per_channel.get(ch, 0) + 1
        report = {"mode": "raw", "stats": {"total_words": len(words),
                                           "words_per_channel": per_channel,
                                           "bits_per_channel": {k: v * 256 for k, v in per_channel.items()},
                                           "gate_invocations": len(circuit)}}
    else:
        program = compile_program(gates, circuit)
        words = program.words()
        report = {"mode": "compiled", **program.report()}
    report["config"] = cfg
    if cfg["out"]:
        write_stream(cfg["out"], words)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg["report"]:
        Path(cfg["report"]).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _mixers(spec: list) -> dict[int, CrosstalkMixer]:
    taps: dict[int, list[CrosstalkTap]] = {}
    delays: dict[int, int] = {}
    for entry in spec:
        unknown = set(entry) - {"channel", "neighbor", "amplitude", "phase_turns", "delay",
                                "primary_delay"}
        if unknown:
            raise ConfigError(f"unknown crosstalk keys {sorted(unknown)}")
        ch = int(entry["channel"])
        taps.setdefault(ch, []).append(CrosstalkTap(
            int(entry["neighbor"]),
            crosstalk_scale(float(entry.get("amplitude", 0.0)), float(entry.get("phase_turns", 0.0))),
            int(entry.get("delay", 0))))
        delays[ch] = max(delays.get(ch, 0), int(entry.get("primary_delay", 0)))
    return {ch: CrosstalkMixer(t, delays[ch]) for ch, t in taps.items()}


def cmd_sim(cfg: dict) -> int:
    if not cfg["stream"]:
        raise ConfigError("sim needs a word stream file")
    blocks = read_stream(cfg["stream"])
    sim = Simulator(fifo_depth=int(cfg["fifo_depth"]), phase_bits=int(cfg["phase_bits"]),
                    crosstalk=_mixers(cfg["crosstalk"]), ffwd_phase=int(cfg["ffwd_phase"]),
                    harmonic=int(cfg["harmonic"]), trigger_cycle=cfg["trigger_cycle"])
    sim.load(blocks)
    result = sim.run(cfg["cycles"])
    chans = cfg["channels"]
    if isinstance(chans, str):
        chans = [int(c) for c in chans.split(",") if c]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_index", "channel", "sample"])
    keep = range(len(result.samples)) if chans is None else chans
    for k in range(result.cycles):
        for ch in keep:
            writer.writerow([k, ch, repr(result.samples[ch][k])])
    _emit(buf.getvalue(), cfg["out"])
    log = {"config": cfg, "trigger_cycle": result.trigger_cycle, "cycles": result.cycles,
           "events": [e.as_dict() for e in result.events]}
    text = json.dumps(log, indent=2, sort_keys=True) + "\n"
    if cfg["events"]:
        Path(cfg["events"]).write_text(text)
    return 0


def cmd_bench(cfg: dict) -> int:
    lib = presets()
    if not cfg["preset"]:
        raise ConfigError(f"bench needs --preset; available: {', '.join(lib.names())}")
    model = lib.get(cfg["preset"])
    payloads = cfg["payloads"]
    if isinstance(payloads, str):
        payloads = [int(p) for p in payloads.split(",") if p]
    if not payloads:
        payloads = power_of_two_sweep(int(cfg["min_payload"]), int(cfg["max_payload"]))
    rows = []
    hist = io.StringIO()
    writer = csv.writer(hist, lineterminator="\n")
    writer.writerow(["payload", "bin_left", "bin_right", "count"])
    for i, p in enumerate(payloads):
        res = run_trials(model, int(p), int(cfg["trials"]), seed=int(cfg["seed"]) + i)
        rows.append({"payload": int(p), "time_ns": res.time_stats.as_dict(),
                     "throughput": res.throughput_stats.as_dict()})
        for left, right, count in res.histogram(int(cfg["bins"])):
            writer.writerow([p, repr(left), repr(right), count])
    doc = {"config": cfg, "preset": model.name, "bandwidth": model.bandwidth, "results": rows}
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", cfg["out"])
    if cfg["hist"]:
        Path(cfg["hist"]).write_text(hist.getvalue())
    return 0


def cmd_analyze(cfg: dict) -> int:
    sc = StreamConfig(int(cfg["w_bus"]), float(cfg["f_dma"]), int(cfg["n_ch"]), int(cfg["n_p"]),
                      float(cfg["f_seq"]), int(cfg["pack_capacity"]))
    rows = reproduction_table(sc)
    if cfg["format"] == "json":
        text = table_json(rows, cfg) + "\n"
    elif cfg["format"] == "markdown":
        text = table_markdown(rows)
    else:
        raise ConfigError(f"unknown format {cfg['format']!r}")
    _emit(text, cfg["out"])
    return 0


def _describe(word) -> str:
    name = type(word).__name__
    if hasattr(word, "gate_ids"):
        return f"{name} ids={list(word.gate_ids)}"
    if hasattr(word, "address"):
        return f"{name} addr={word.address} {word.segment}"
    if hasattr(word, "entries"):
        return f"{name} entries={list(word.entries)}"
    if hasattr(word, "records"):
        return f"{name} records={list(word.records)}"
    return f"{name} {word.segment}"


def cmd_decode(cfg: dict) -> int:
    if not cfg["stream"]:
        raise ConfigError("decode needs a word stream file")
    lines = []
    for i, block in enumerate(read_stream(cfg["stream"])):
        word = decode_word(block)
        lines.append(f"{i:06d} {word_type(block).name:<8} mask={word.routing:08b} "
                     f"{block:064x}  {_describe(word)}")
    _emit("\n".join(lines) + ("\n" if lines else ""), cfg["out"])
    return 0


def cmd_presets(cfg: dict) -> int:
    lib = presets()
    for name in lib.names():
        m = lib.get(name)
        print(f"{name:<26} {m.bandwidth / 1e6:12.3f} MB/s")
    return 0


COMMANDS = {"compile": cmd_compile, "sim": cmd_sim, "bench": cmd_bench,
            "analyze": cmd_analyze, "decode": cmd_decode, "presets": cmd_presets}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ionseq", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--json", action="store_true", help="machine-readable errors on stdout")
    ap.add_argument("--config", help="TOML file with per-command sections")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile gates and a circuit to a word stream")
    p.add_argument("gates", nargs="?")
    p.add_argument("--circuit")
    p.add_argument("--raw", action="store_true", help="emit the LUT-bypass raw stream")
    p.add_argument("--out", help="word stream output")
    p.add_argument("--report", help="JSON report output (default stdout)")

    p = sub.add_parser("sim", help="simulate a word stream")
    p.add_argument("stream", nargs="?")
    p.add_argument("--cycles", type=int)
    p.add_argument("--trigger-cycle", dest="trigger_cycle", type=int)
    p.add_argument("--fifo-depth", dest="fifo_depth", type=int)
    p.add_argument("--phase-bits", dest="phase_bits", type=int)
    p.add_argument("--channels", help="comma-separated channels to write")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="waveform CSV (default stdout)")
    p.add_argument("--events", help="event log JSON")

    p = sub.add_parser("bench", help="simulate channel transfer trials")
    p.add_argument("--preset")
    p.add_argument("--payloads", help="comma-separated payload sizes in bytes")
    p.add_argument("--min-payload", dest="min_payload", type=int)
    p.add_argument("--max-payload", dest="max_payload", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--out", help="stats JSON (default stdout)")
    p.add_argument("--hist", help="histogram CSV")

    p = sub.add_parser("analyze", help="closed-form streaming limits")
    p.add_argument("--format", choices=["json", "markdown"])
    p.add_argument("--out")
    p.add_argument("--f-dma", dest="f_dma", type=float)
    p.add_argument("--n-ch", dest="n_ch", type=int)

    p = sub.add_parser("decode", help="hex dump of a word stream")
    p.add_argument("stream", nargs="?")
    p.add_argument("--out")

    sub.add_parser("presets", help="list channel presets")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args.command, args)
        return COMMANDS[args.command](cfg)
    except (IonSeqError, OSError, ValueError, KeyError) as exc:
        if args.json:
            print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        else:
            print(f"ionseq: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
