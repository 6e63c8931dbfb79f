"""Command-line front end: ``dmsparse <subcommand> [flags]``.

Exit status: 0 ok, 2 usage error, 3 input error, 4 numeric failure.
"""
import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import analysis, codec, harness, recon
from .core import FRAME_LEN, SAMPLE_RATE

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4
DM_DELTAS = "0.001,0.005,0.01,0.02,0.03"


class InputError(Exception):
    pass


def _floats(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _methods(text):
    vals = [v.strip().lower() for v in text.split(",") if v.strip()]
    bad = [v for v in vals if v not in harness.METHODS]
    if bad or not vals:
        raise argparse.ArgumentTypeError(
            f"unknown method(s) {', '.join(bad) or '(none)'}; choose from {', '.join(harness.METHODS)}")
    return vals


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--dump-config", metavar="FILE",
                   help="write the resolved configuration as JSON and continue")


def _add_recon(p, threshold_db):
    g = p.add_argument_group("reconstruction")
    g.add_argument("--lam", type=float, default=1.0, help="IMAT relaxation, must lie in (0, 2/p)")
    g.add_argument("--alpha", type=float, default=-0.1, help="threshold decay exponent")
    g.add_argument("--beta-scale", type=float, default=0.9,
                   help="initial threshold as a fraction of max |X_1|")
    g.add_argument("--max-iters", type=int, default=100, help="IMAT iteration cap")
    g.add_argument("--guard", type=float, default=2.0,
                   help="stop IMAT once the threshold drops below GUARD x coding-noise deviation "
                        "(0 disables)")
    g.add_argument("--smooth-len", type=int, default=2, help="IMATDM smoothing length l (even)")
    g.add_argument("--omp-atoms", type=int, default=64, help="OMP atom cap")
    g.add_argument("--lasso-iters", type=int, default=500, help="LASSO iteration cap")
    g.add_argument("--cutoff-hz", type=float, default=3300.0, help="lowpass cutoff")
    g.add_argument("--threshold-db", type=float, default=threshold_db,
                   help="success-rate SNR threshold")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="dmsparse", formatter_class=fmt,
                                     description="DM/ADM coding and sparse reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", formatter_class=fmt, help="WAV -> DM bitstream")
    p.add_argument("--in", dest="input", required=True, help="input WAV")
    p.add_argument("--out", required=True, help="output bitstream (.dmbs)")
    p.add_argument("--delta", type=float, default=0.01, help="DM step (initial step with --adm)")
    p.add_argument("--adm", action="store_true", help="adaptive DM with default adaptation")
    _add_common(p)

    p = sub.add_parser("decode", formatter_class=fmt, help="bitstream -> staircase WAV")
    p.add_argument("--in", dest="input", required=True, help="input bitstream")
    p.add_argument("--out", required=True, help="output WAV")
    p.add_argument("--rate", type=int, default=SAMPLE_RATE, help="sample rate of the output")
    p.add_argument("--wav-format", choices=("pcm16", "float32"), default="float32")
    _add_common(p)

    p = sub.add_parser("reconstruct", formatter_class=fmt,
                       help="bitstream -> reconstructed WAV, frame by frame")
    p.add_argument("--in", dest="input", required=True, help="input bitstream")
    p.add_argument("--out", required=True, help="output WAV")
    p.add_argument("--method", type=str.lower, choices=harness.METHODS, default="imatdm")
    p.add_argument("--frame-len", type=int, default=FRAME_LEN)
    p.add_argument("--rate", type=int, default=SAMPLE_RATE, help="sample rate of the output")
    p.add_argument("--wav-format", choices=("pcm16", "float32"), default="float32")
    _add_recon(p, 15.0)
    _add_common(p)

    for name, help_text, thr in (("sweep", "DM step-size sweep over a corpus", 15.0),
                                 ("adm-bench", "ADM benchmark over a corpus", 20.0)):
        p = sub.add_parser(name, formatter_class=fmt, help=help_text)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--in", dest="input", nargs="+", help="WAV files or directories")
        src.add_argument("--synthetic", type=int, default=200, metavar="N",
                         help="use N frames of the synthetic mixed-band corpus")
        if name == "sweep":
            p.add_argument("--deltas", type=_floats, default=_floats(DM_DELTAS), help="step sizes")
            p.add_argument("--mask-mode", choices=("dm", "bernoulli"), default="dm",
                           help="bernoulli replaces each DM mask by an iid mask of the same rate")
        else:
            p.add_argument("--delta0", type=float, default=0.01, help="initial ADM step")
            p.add_argument("--growth", type=float, default=1.5, help="adaptation factor K")
        p.add_argument("--methods", type=_methods, default=list(harness.METHODS))
        p.add_argument("--noiseless", action="store_true",
                       help="reconstruct from the clean samples on the DM mask")
        p.add_argument("--max-frames", type=int, default=None, help="cap on corpus frames")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default=None,
                       help="report file or directory (stdout if omitted)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker processes")
        _add_recon(p, thr)
        _add_common(p)

    p = sub.add_parser("validate-theory", formatter_class=fmt,
                       help="Monte Carlo check of the spectral mean/variance law "
                            "and the IMAT error ratio")
    p.add_argument("--n", type=int, default=64, help="frame length")
    p.add_argument("--p", type=float, default=0.5, help="mask rate")
    p.add_argument("--delta", type=float, default=0.1, help="coding step")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--lam", type=float, default=1.0, help="relaxation for the ratio check")
    p.add_argument("--ratio-trials", type=int, default=100,
                   help="trials for the ratio check (0 skips it)")
    p.add_argument("--out", default=None, help="CSV report (stdout table if omitted)")
    _add_common(p)

    p = sub.add_parser("synth", formatter_class=fmt, help="write synthetic sparse frames as WAV")
    p.add_argument("--out", required=True, help="output WAV")
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--n", type=int, default=FRAME_LEN, help="frame length")
    p.add_argument("--k", type=int, default=8, help="tones per frame")
    p.add_argument("--band-split", type=float, default=0.5,
                   help="fraction of tones above the voice cutoff")
    p.add_argument("--on-grid", action="store_true", help="place tones on DFT bins")
    p.add_argument("--rms", type=float, default=0.0316, help="per-frame rms level")
    p.add_argument("--wav-format", choices=("pcm16", "float32"), default="float32")
    _add_common(p)
    return parser


def _validate(args, parser):
    def bad(msg):
        parser.error(f"{args.command}: {msg}")

    if args.command == "encode" and args.delta <= 0:
        bad("--delta must be positive")
    if hasattr(args, "deltas") and any(d <= 0 for d in args.deltas):
        bad("--deltas must all be positive")
    if hasattr(args, "delta0") and args.delta0 <= 0:
        bad("--delta0 must be positive")
    if hasattr(args, "growth") and args.growth <= 1:
        bad("--growth must exceed 1")
    if hasattr(args, "lam"):
        if args.lam <= 0:
            bad("--lam must be positive")
    if hasattr(args, "alpha") and args.alpha >= 0:
        bad("--alpha must be negative")
    if hasattr(args, "beta_scale") and args.beta_scale <= 0:
        bad("--beta-scale must be positive")
    if hasattr(args, "max_iters") and args.max_iters < 1:
        bad("--max-iters must be >= 1")
    if hasattr(args, "guard") and args.guard != 0 and args.guard <= 1:
        bad("--guard must exceed 1 (or be 0 to disable)")
    if hasattr(args, "smooth_len") and (args.smooth_len < 2 or args.smooth_len % 2):
        bad("--smooth-len must be an even integer >= 2")
    if hasattr(args, "omp_atoms") and args.omp_atoms < 1:
        bad("--omp-atoms must be >= 1")
    if hasattr(args, "cutoff_hz") and args.cutoff_hz <= 0:
        bad("--cutoff-hz must be positive")
    if hasattr(args, "jobs") and args.jobs < 1:
        bad("--jobs must be >= 1")
    if getattr(args, "synthetic", 1) is not None and getattr(args, "synthetic", 1) < 1:
        bad("--synthetic must be >= 1")
    if getattr(args, "max_frames", None) is not None and args.max_frames < 1:
        bad("--max-frames must be >= 1")
    if getattr(args, "frame_len", 2) < 2:
        bad("--frame-len must be >= 2")
    if args.command == "validate-theory":
        if args.n < 2:
            bad("--n must be >= 2")
        if not 0 < args.p <= 1:
            bad("--p must lie in (0, 1]")
        if args.delta < 0:
            bad("--delta must be non-negative")
        if args.trials < 100:
            bad("--trials must be >= 100")
        if args.ratio_trials and not 0 < args.lam < 2 / args.p:
            bad(f"--lam must lie in (0, 2/p) = (0, {2 / args.p:.4g})")
    if args.command == "synth":
        if args.frames < 1:
            bad("--frames must be >= 1")
        try:
            harness.SyntheticSpec(n=args.n, k=args.k, band_split=args.band_split).validate()
        except ValueError as exc:
            bad(str(exc))
        if args.rms <= 0:
            bad("--rms must be positive")


def _sweep_config(args, threshold_db=None, **extra):
    return harness.SweepConfig(
        threshold_db=args.threshold_db if threshold_db is None else threshold_db,
        lam=args.lam, alpha=args.alpha, beta_scale=args.beta_scale, max_iters=args.max_iters,
        guard=args.guard or None, smooth_len=args.smooth_len, omp_max_atoms=args.omp_atoms,
        lasso_max_iters=args.lasso_iters, lowpass_cutoff_hz=args.cutoff_hz,
        seed=args.seed, **extra)


def _dump_config(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "dump_config")}
    with open(args.dump_config, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_wav(path):
    try:
        return harness.load_wav(path)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _read_bits(path):
    try:
        return codec.read_bitstream(path)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def cmd_encode(args):
    x, _ = _load_wav(args.input)
    if args.adm:
        bits, _ = codec.adm_encode(x, codec.AdmParams(args.delta))
    else:
        bits, _ = codec.dm_encode(x, args.delta)
    codec.write_bitstream(args.out, bits)
    print(f"{args.out}: {len(bits)} bits, mask rate {codec.extract_mask(bits).rate:.4f}")


def cmd_decode(args):
    bits = _read_bits(args.input)
    stair = codec.dm_decode(bits)
    harness.write_wav(args.out, np.clip(stair.values, -1, 1), args.rate, args.wav_format)


def cmd_reconstruct(args):
    bits = _read_bits(args.input)
    if len(bits) < 2:
        raise InputError(f"{args.input}: too few symbols to reconstruct")
    config = _sweep_config(args, sample_rate=args.rate)
    y = harness.reconstruct_stream(bits, args.method, config, args.frame_len)
    harness.write_wav(args.out, np.clip(y, -1, 1), args.rate, args.wav_format)


def _corpus(args):
    if args.input:
        try:
            return harness.wav_corpus(args.input, max_frames=args.max_frames)
        except (OSError, ValueError) as exc:
            raise InputError(str(exc)) from exc
    n = args.synthetic if args.max_frames is None else min(args.synthetic, args.max_frames)
    return harness.mixed_band_corpus(n, seed=args.seed), SAMPLE_RATE


def _emit(table, args, stem, config):
    if args.out is None:
        sys.stdout.write(harness.report_text(table, args.format))
        return
    path = harness.report_path(args.out, stem, config, args.format)
    harness.emit_report(table, args.format, path)
    print(path)


def cmd_sweep(args):
    frames, rate = _corpus(args)
    config = _sweep_config(args, sample_rate=rate, noiseless=args.noiseless,
                           mask_mode=args.mask_mode)
    table = harness.delta_sweep(frames, args.deltas, args.methods, config, jobs=args.jobs)
    _emit(table, args, "sweep", config)


def cmd_adm_bench(args):
    frames, rate = _corpus(args)
    config = _sweep_config(args, sample_rate=rate, noiseless=args.noiseless)
    adm = codec.AdmParams(args.delta0, growth=args.growth)
    table = harness.adm_benchmark(frames, adm, args.methods, config, jobs=args.jobs)
    _emit(table, args, "adm", config)


def cmd_validate_theory(args):
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal(args.n)
    x /= np.linalg.norm(x)  # unit energy
    stats = analysis.validate_theorem1(x, args.p, args.delta, args.trials, args.seed)
    rows = stats.rows()
    if args.ratio_trials:
        frame = analysis.single_bin_frame(n=max(args.n, 256))
        trace = analysis.geometric_error_check(frame, args.lam, args.p, args.ratio_trials,
                                               args.seed)
        if np.isnan(trace.ratio):
            raise FloatingPointError("error ratio could not be fitted: no usable iterations")
        rows += trace.rows()
    if args.out:
        analysis.write_validation_csv(rows, args.out)
        print(args.out)
    else:
        print(analysis.format_validation(rows))


def cmd_synth(args):
    seeds = np.random.SeedSequence(args.seed).generate_state(args.frames)
    frames = [harness.synth_sparse_frame(harness.SyntheticSpec(
        n=args.n, k=args.k, band_split=args.band_split, seed=int(s), on_grid=args.on_grid,
        rms=args.rms)).samples for s in seeds]
    harness.write_wav(args.out, np.clip(np.concatenate(frames), -1, 1), SAMPLE_RATE,
                      args.wav_format)


COMMANDS = {
    "encode": cmd_encode, "decode": cmd_decode, "reconstruct": cmd_reconstruct,
    "sweep": cmd_sweep, "adm-bench": cmd_adm_bench, "validate-theory": cmd_validate_theory,
    "synth": cmd_synth,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(args, parser)
    try:
        if args.dump_config:
            _dump_config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", recon.ConvergenceWarning)
            COMMANDS[args.command](args)
    except InputError as exc:
        print(f"dmsparse: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"dmsparse: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"dmsparse: I/O error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
