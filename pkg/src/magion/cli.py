"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 tamper detected.
Library arguments accept a JSON path or ``shipped:<name>`` for a shipped
library (``shipped:sample1-A``, ``shipped:sample2-A``, ``shipped:sample1-B``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset, io
from .errors import MagionError
from .inference import infer, observations_from_labels, select_crps, simulate_inference
from .model import (
    Device,
    GatingEvent,
    StateClass,
    apply_gating,
    as_generator,
    degauss_batch,
    enroll,
    tamper_check,
)
from .puf import (
    TABLE_TRIALS,
    Challenge,
    Response,
    ber_closed_form,
    ber_empirical,
    ber_row,
    crp_count,
    respond,
    verify,
)
from .randomness import (
    StateMapping,
    bits_to_str,
    expected_fhd,
    extract_bits,
    fhd_intra,
    lock_strength,
    lock_strength_from_entropy,
    monobit_statistic,
    runs_statistic,
    total_entropy,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TAMPER = 0, 1, 2, 3

log = logging.getLogger("magion")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _library(spec: str):
    if spec.startswith("shipped:"):
        return dataset.shipped_library(spec.split(":", 1)[1])
    return io.load_library(spec)


def _odd(text: str) -> int:
    value = int(text)
    if value < 1 or value % 2 == 0:
        raise argparse.ArgumentTypeError(f"T must be a positive odd integer, got {text}")
    return value


def _emit(payload, args, csv_header=None, csv_rows=None):
    """Print or write a result as JSON (default) or CSV."""
    if getattr(args, "format", "json") == "csv" and csv_header is not None:
        if args.out:
            io.write_rows(args.out, csv_header, csv_rows)
        else:
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(csv_header)
            w.writerows(csv_rows)
        return
    text = json.dumps(payload, indent=2, sort_keys=True, default=_jsonable)
    if getattr(args, "out", None):
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _stochastic(p, trials_default=100, fmt="json"):
    p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    p.add_argument("--trials", type=int, default=trials_default)
    p.add_argument("--format", choices=("json", "csv"), default=fmt)


# subcommand handlers --------------------------------------------------------

def cmd_simulate(args):
    device = Device.from_library(_library(args.library))
    codes = degauss_batch(device, args.trials, args.seed, active_only=True)
    if args.out:
        io.save_traces(codes, args.out)
    else:
        io.save_traces(codes, "/dev/stdout")
    return EXIT_OK


def _reference_device_gated(circuits: list[str], minutes: float, voltage: float) -> Device:
    device = dataset.reference_device()
    calibration = dataset.reference_calibration()
    for cid in circuits:
        device = apply_gating(device, cid, GatingEvent(voltage, minutes), calibration)
    return device


def cmd_gate(args):
    device = _reference_device_gated([args.circuit], args.minutes, args.voltage)
    circuit = device.circuit(args.circuit)
    profiles = [device.profiles[c] for c in circuit.dot_positions] if circuit.activation else []
    payload = {
        "circuit": args.circuit,
        "active": circuit.activation,
        "gating_minutes": circuit.total_gating_minutes,
        "mean_p_sd": float(np.mean([p.p_sd for p in profiles])) if profiles else None,
        "p_sd": [p.p_sd for p in profiles],
    }
    _emit(payload, args)
    return EXIT_OK


def cmd_enroll(args):
    truth = _library(args.library)
    lib = enroll(Device.from_library(truth), args.trials, args.seed)
    if args.out:
        io.save_library(lib, args.out)
    else:
        sys.stdout.write(io.dumps_library(lib))
    return EXIT_OK


def _mapping(args) -> StateMapping:
    if args.mapping == "four-state":
        return StateMapping.four_state()
    return StateMapping.binary_direction(alternative=args.alt_grouping)


def cmd_analyze_fhd(args):
    mapping = _mapping(args)
    if args.traces:
        traces = io.load_traces(args.traces)
        res = fhd_intra(traces, mapping)
        expected = None
    else:
        lib = _library(args.library)
        codes = degauss_batch(Device.from_library(lib), args.trials, args.seed, active_only=True)
        res = fhd_intra(codes, mapping)
        if mapping.is_binary:
            expected = expected_fhd([(p.p_dir_rcw, 1 - p.p_dir_rcw) for p in lib.profiles])
        else:
            from .randomness import four_state_distributions
            expected = expected_fhd(four_state_distributions(lib))
    if args.hist:
        io.emit_plot_data(res, args.hist)
    payload = {"mean_fhd": res.mean_fhd, "pairs": res.pair_count, "dots": res.n_dots,
               "traces": res.n_traces, "expected_fhd": expected, "mapping": mapping.mode.value}
    _emit(payload, args, ["bin_lo", "bin_hi", "count"], res.histogram())
    return EXIT_OK


def cmd_analyze_entropy(args):
    lib = _library(args.library)
    rep = total_entropy(lib)
    payload = {"per_bit": list(rep.per_bit), "h_total": rep.total, "h_mean": rep.mean,
               "sequences": 2.0 ** rep.total, "dots": rep.n_dots}
    _emit(payload, args, ["dot", "entropy"], [(i, f"{h:.6f}") for i, h in enumerate(rep.per_bit, 1)])
    return EXIT_OK


def cmd_trng_extract(args):
    lib = _library(args.library)
    codes = degauss_batch(Device.from_library(lib), args.trials, args.seed, active_only=True)
    mapping = StateMapping.binary_direction(alternative=args.alt_grouping)
    bits = extract_bits(codes, mapping).ravel()
    payload = {"bits": bits_to_str(bits), "length": int(bits.size),
               "monobit": monobit_statistic(bits), "runs": runs_statistic(bits)}
    if args.format == "csv":
        _emit(payload, args, ["index", "bit"], list(enumerate(bits.tolist())))
    else:
        _emit(payload, args)
    return EXIT_OK


def cmd_lock_strength(args):
    if args.library:
        res = lock_strength([_library(s) for s in args.library], args.rate)
    elif args.dots is not None and args.mean_entropy is not None:
        res = lock_strength_from_entropy(args.dots * args.mean_entropy, args.rate)
    else:
        raise UsageError("give --library (repeatable) or both --dots and --mean-entropy")
    _emit({"h_total": res.h_total, "sequences": res.sequences, "seconds": res.seconds, "years": res.years}, args)
    return EXIT_OK


def cmd_puf_crp_count(args):
    if args.library:
        lib = _library(args.library)
        P, D = lib.n_pbits, lib.n_dbits
    elif args.P is not None and args.D is not None:
        P, D = args.P, args.D
    else:
        raise UsageError("give --P and --D, or --library")
    print(crp_count(P, D, args.k))
    return EXIT_OK


def cmd_puf_respond(args):
    lib = _library(args.library)
    device = Device.from_library(lib)
    resp = respond(device, Challenge.parse(args.challenge), args.T, as_generator(args.seed), noise=args.noise)
    _emit({"challenge": args.challenge, "response": str(resp), "T": resp.trials_used}, args)
    return EXIT_OK


def cmd_puf_verify(args):
    lib = _library(args.library)
    challenge = Challenge.parse(args.challenge)
    states = tuple(StateClass.parse(tok) for tok in args.response.split(","))
    res = verify(Response(states, args.T), lib, challenge, args.threshold)
    _emit({"mismatches": res.mismatches, "pass": res.passed, "threshold": res.threshold}, args)
    return EXIT_OK


def cmd_puf_ber(args):
    lib = _library(args.library)
    challenges = [Challenge.parse(c) for c in args.challenge]
    trials = args.T or list(TABLE_TRIALS)
    if args.empirical:
        rng = as_generator(args.seed)
        device = Device.from_library(lib)
        rows, payload = [], []
        for ch in challenges:
            for T in trials:
                est = ber_empirical(device, lib, ch, T, args.repetitions, rng, noise=args.noise)
                payload.append({"dot_positions": str(ch), "T": T, "ber": est.ber, "stderr": est.stderr,
                                "closed_form": ber_closed_form(lib, ch, T)})
                rows.append((str(ch), T, f"{est.ber:.6f}", f"{est.stderr:.6f}"))
        _emit(payload, args, ["dot_positions", "T", "ber", "stderr"], rows)
        return EXIT_OK
    header = ["dot_positions", "n_pbits"] + [f"BER_{T}" for T in trials]
    rows, payload = [], []
    for ch in challenges:
        r = ber_row(lib, ch, trials)
        rows.append([str(ch), r.n_pbits] + [f"{100 * r.ber[T]:.3f}" for T in trials])
        payload.append({"dot_positions": str(ch), "n_pbits": r.n_pbits,
                        "ber_pct": {str(T): 100 * r.ber[T] for T in trials}})
    _emit(payload, args, header, rows)
    return EXIT_OK


def cmd_infer_select(args):
    lib1, lib2 = _library(args.lib1), _library(args.lib2)
    cands = select_crps(lib1, lib2, args.k, args.target, args.tol)
    header = (["dot_positions", "s1_n_pbits"] + [f"s1_BER_{T}" for T in TABLE_TRIALS]
              + ["s2_n_pbits"] + [f"s2_BER_{T}" for T in TABLE_TRIALS] + ["pFHD_inter"])
    rows = [
        [str(c.challenge), c.n_pbits[0]] + [f"{100 * c.ber1[T]:.3f}" for T in TABLE_TRIALS]
        + [c.n_pbits[1]] + [f"{100 * c.ber2[T]:.3f}" for T in TABLE_TRIALS] + [f"{c.pfhd:.4f}"]
        for c in cands
    ]
    if args.format == "json":
        _emit([dict(zip(header, r)) for r in rows], args)
    else:
        _emit(None, args, header, rows)
    return EXIT_OK


def cmd_infer_run(args):
    lib1, lib2 = _library(args.lib1), _library(args.lib2)
    challenge = Challenge.parse(args.challenge)
    if args.replay:
        s4 = dataset.supp_table4()
        if challenge != s4.challenge:
            raise UsageError(f"the shipped replay uses challenge {s4.challenge}")
        observations = observations_from_labels(s4.labels, lib1, lib2, challenge)
    else:
        truth = _library(args.truth) if args.truth else lib1
        device = Device.from_library(truth)
        rng = as_generator(args.seed)
        observations = [respond(device, challenge, 1, rng).states for _ in range(args.trials)]
    run = infer(observations, lib1, lib2, challenge)
    rows = [(t, f"{100 * p:.1f}", f"{100 * c:.2f}") for t, p, c in run.rows()]
    if args.format == "csv":
        _emit(None, args, ["trial", "per_trial_prob_pct", "cumulative_prob_pct"], rows)
    else:
        _emit({"per_trial_prob": run.per_trial_prob, "cumulative_prob": run.cumulative_prob,
               "labels": run.trial_labels, "decision": run.decision.value}, args)
    return EXIT_OK


def cmd_infer_accuracy(args):
    lib1, lib2 = _library(args.lib1), _library(args.lib2)
    truth = _library(args.truth) if args.truth else lib1
    sim = simulate_inference(Device.from_library(truth), lib1, lib2, Challenge.parse(args.challenge),
                             args.trials, args.runs, args.seed)
    _emit({"accuracy": sim.accuracy, "mean_per_trial": sim.mean_per_trial,
           "per_trial_stderr": sim.per_trial_stderr}, args)
    return EXIT_OK


def _parse_expectation(text: str) -> dict[str, bool]:
    out = {}
    for item in filter(None, text.split(",")):
        cid, _, state = item.partition("=")
        if state.lower() not in ("on", "off"):
            raise UsageError(f"expectation {item!r} must look like A=on or B=off")
        out[cid] = state.lower() == "on"
    return out


def cmd_tamper_check(args):
    gated = [c for c in args.gated.split(",") if c]
    device = _reference_device_gated(gated, args.minutes, -10.0)
    report = tamper_check(device, _parse_expectation(args.expect))
    _emit({"violations": list(report.violations), "observed": dict(report.observed),
           "tampered": report.tampered}, args)
    return EXIT_TAMPER if report.tampered else EXIT_OK


def cmd_reproduce(args):
    from .reproduce import reproduce

    out = Path(args.out) if args.out else io.output_dir("artifacts")
    summary = reproduce(out, seed=args.seed)
    for name, check in summary["checks"].items():
        print(f"{'PASS' if check['passed'] else 'FAIL'}  {name}")
    print(f"artifacts written to {out}")
    return EXIT_OK


# parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="magion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="degauss a device and write traces CSV")
    p.add_argument("--library", required=True)
    p.add_argument("--out")
    _stochastic(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gate", help="gate a circuit of the reference device and report its profiles")
    p.add_argument("--circuit", required=True)
    p.add_argument("--minutes", type=float, required=True)
    p.add_argument("--voltage", type=float, default=-10.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("enroll", help="enroll a simulated device from a truth library")
    p.add_argument("--library", required=True)
    p.add_argument("--out")
    _stochastic(p, trials_default=101)
    p.set_defaults(func=cmd_enroll)

    analyze = sub.add_parser("analyze").add_subparsers(dest="what", required=True, parser_class=_Parser)
    p = analyze.add_parser("fhd")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--traces")
    src.add_argument("--library")
    p.add_argument("--mapping", choices=("binary", "four-state"), default="binary")
    p.add_argument("--alt-grouping", action="store_true", help="group states 1+4 vs 2+3")
    p.add_argument("--hist", help="write histogram CSV here")
    p.add_argument("--out")
    _stochastic(p, trials_default=2000)
    p.set_defaults(func=cmd_analyze_fhd)
    p = analyze.add_parser("entropy")
    p.add_argument("--library", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze_entropy)

    trng = sub.add_parser("trng").add_subparsers(dest="what", required=True, parser_class=_Parser)
    p = trng.add_parser("extract")
    p.add_argument("--library", required=True)
    p.add_argument("--alt-grouping", action="store_true")
    p.add_argument("--out")
    _stochastic(p, trials_default=1)
    p.set_defaults(func=cmd_trng_extract)

    lock = sub.add_parser("lock").add_subparsers(dest="what", required=True, parser_class=_Parser)
    p = lock.add_parser("strength")
    p.add_argument("--library", action="append")
    p.add_argument("--dots", type=int)
    p.add_argument("--mean-entropy", type=float)
    p.add_argument("--rate", type=float, default=1e9, help="guesses per second")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lock_strength)

    puf = sub.add_parser("puf").add_subparsers(dest="what", required=True, parser_class=_Parser)
    p = puf.add_parser("crp-count")
    p.add_argument("--P", type=int)
    p.add_argument("--D", type=int)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--library")
    p.set_defaults(func=cmd_puf_crp_count)

    p = puf.add_parser("respond")
    p.add_argument("--library", required=True)
    p.add_argument("--challenge", required=True)
    p.add_argument("--T", type=_odd, default=1)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out")
    _stochastic(p)
    p.set_defaults(func=cmd_puf_respond)

    p = puf.add_parser("verify")
    p.add_argument("--library", required=True)
    p.add_argument("--challenge", required=True)
    p.add_argument("--response", required=True, help="comma-separated SD/V values")
    p.add_argument("--T", type=_odd, default=1)
    p.add_argument("--threshold", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_puf_verify)

    p = puf.add_parser("ber")
    p.add_argument("--library", required=True)
    p.add_argument("--challenge", required=True, action="append")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--closed-form", action="store_true", default=True)
    mode.add_argument("--empirical", action="store_true")
    p.add_argument("--T", type=_odd, action="append")
    p.add_argument("--repetitions", type=int, default=100_000)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out")
    _stochastic(p, fmt="csv")
    p.set_defaults(func=cmd_puf_ber)

    infer_p = sub.add_parser("infer").add_subparsers(dest="what", required=True, parser_class=_Parser)
    p = infer_p.add_parser("select")
    p.add_argument("--lib1", default="shipped:sample1-A")
    p.add_argument("--lib2", default="shipped:sample2-A")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--target", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_infer_select)

    p = infer_p.add_parser("run")
    p.add_argument("--truth")
    p.add_argument("--lib1", default="shipped:sample1-A")
    p.add_argument("--lib2", default="shipped:sample2-A")
    p.add_argument("--challenge", default="13,7,9,18,17")
    p.add_argument("--replay", action="store_true", help="replay the shipped recorded labels")
    p.add_argument("--out")
    _stochastic(p, trials_default=27, fmt="csv")
    p.set_defaults(func=cmd_infer_run)

    p = infer_p.add_parser("accuracy")
    p.add_argument("--truth")
    p.add_argument("--lib1", default="shipped:sample1-A")
    p.add_argument("--lib2", default="shipped:sample2-A")
    p.add_argument("--challenge", default="13,7,9,18,17")
    p.add_argument("--runs", type=int, default=10_000)
    p.add_argument("--out")
    _stochastic(p, trials_default=27)
    p.set_defaults(func=cmd_infer_accuracy)

    p = sub.add_parser("tamper-check", help="compare circuit activation with the intended design")
    p.add_argument("--gated", default="", help="circuits that have been gated, e.g. B or A,B")
    p.add_argument("--expect", required=True, help="intended activation, e.g. A=off,B=on")
    p.add_argument("--minutes", type=float, default=60.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tamper_check)

    p = sub.add_parser("reproduce-paper", help="regenerate all published-number artifacts")
    p.add_argument("--out", help="output directory (default: $MAGION_OUTPUT_DIR or ./artifacts)")
    p.add_argument("--seed", type=int, default=20250101)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"magion: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MagionError, ValueError, KeyError, OSError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        print(f"magion: {code}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
