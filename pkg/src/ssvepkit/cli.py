"""Command-line front end: train, eval, synth and inspect workflows.

Every command is deterministic for fixed arguments, input files and
seed; outputs land under --out (default: $SSVEPKIT_OUT or ./out) and
nowhere else. Exit code 0 means no error diagnostics were emitted.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import data_io
from .baselines import PsdaConfig
from .filterbank import load_bank_config, parse_keyvalue, save_bank_config
from .harness import evaluate_dataset, make_runner, subject_reports
from .metrics import SubjectReport
from .signals import (
    PreprocessConfig,
    Spectrum,
    WindowPlan,
    bandpass,
    magnitude_spectrum,
    normalize,
    sliding_windows,
)
from .training import LabeledTrial, TrainingGrid, train_baseline_window, train_filter_bank

METHOD_ORDER = ("psda", "cca", "bifb")


def _parse_band(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("band must look like LO:HI, e.g. 5:35")
    return float(lo), float(hi)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("SSVEPKIT_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _pre_config(args, manifest) -> PreprocessConfig:
    channel = args.channel.split(",")[0] if args.channel else None
    if channel is None:
        channel = "Oz" if "Oz" in manifest.channels else manifest.channels[0]
    if channel not in manifest.channels:
        raise ValueError(f"channel {channel!r} not in manifest channels {manifest.channels}")
    lo, hi = args.band
    return PreprocessConfig(band_low=lo, band_high=hi, channel=channel)


def _cca_channels(args, manifest) -> tuple[str, ...]:
    if args.channel:
        labels = tuple(c for c in args.channel.split(",") if c)
        for lbl in labels:
            if lbl not in manifest.channels:
                raise ValueError(f"channel {lbl!r} not in manifest channels {manifest.channels}")
        return labels
    return manifest.channels


def _model_path(model_arg: Path, subject: str, method: str) -> Path:
    if model_arg.is_dir():
        return model_arg / f"{subject}_{method}.model"
    return model_arg


def cmd_synth(args) -> int:
    out = Path(args.out) if args.out else _out_dir(args) / "synthetic"
    specs = data_io.corpus_specs(
        args.targets,
        args.trials_per_target,
        duration=args.duration,
        sampling_rate=args.rate,
        harmonic_amplitudes=args.harmonics,
        attenuation_exponent=args.attenuation,
        snr_db=args.snr_db,
        noise_only=args.noise_only,
        seed=args.seed,
        channels=tuple(args.channels.split(",")),
    )
    manifest_path = data_io.write_synthetic_dataset(
        out, args.name, specs, subjects=args.subjects, force=args.force
    )
    print(f"wrote {manifest_path}")
    return 0


def _split_train_holdout(trials, targets):
    """Leave the last trial per target out for the holdout estimate."""
    train, holdout = [], []
    for target in targets:
        matching = [t for t in trials if t.record.stimulus_frequency == target]
        if len(matching) < 2:
            raise ValueError(
                f"needs at least 2 trials per target for a train/holdout split; "
                f"target {target} Hz has {len(matching)}"
            )
        train.extend(matching[:-1])
        holdout.append(matching[-1])
    return train, holdout


def cmd_train(args) -> int:
    dataset = data_io.load_dataset(args.manifest)
    manifest = dataset.manifest
    pre = _pre_config(args, manifest)
    out = _out_dir(args)
    grid = TrainingGrid(
        bandwidths=args.bandwidths,
        gains=args.gains,
        harmonic_weights=args.harmonic_weights,
        window_seconds=args.windows,
    )
    summary_lines = []
    for subject, trials in sorted(dataset.by_subject().items()):
        try:
            train_trials, holdout_trials = _split_train_holdout(trials, manifest.targets)
        except ValueError as exc:
            raise ValueError(f"subject {subject}: {exc}") from exc
        labeled = [LabeledTrial(t.signal, t.record.stimulus_frequency) for t in train_trials]

        if args.method == "bifb":
            result = train_filter_bank(labeled, manifest.targets, grid, pre,
                                       step_seconds=args.step_sec)
            model_file = out / f"{subject}_bifb.model"
            save_bank_config(result.bank, result.plan, model_file)
            trace_file = out / f"training_trace_{subject}.csv"
            with open(trace_file, "w", encoding="utf-8") as fh:
                fh.write("bandwidth,gain,harmonic_weight,window_seconds,"
                         "train_accuracy,train_itr,feasible\n")
                for p in result.trace:
                    itr_txt = "-" if p.train_itr is None else f"{p.train_itr:.6f}"
                    fh.write(f"{p.bandwidth},{p.gain},{p.harmonic_weight},"
                             f"{p.window_seconds},{p.train_accuracy:.6f},{itr_txt},"
                             f"{int(p.feasible)}\n")
            runner = make_runner("bifb", targets=manifest.targets, plan=result.plan,
                                 pre=pre, bank=result.bank)
            plan = result.plan
            best_acc = result.best.train_accuracy
        else:
            plan, trace = train_baseline_window(
                labeled, manifest.targets, args.method, args.windows, pre,
                step_seconds=args.step_sec,
                channels=_cca_channels(args, manifest) if args.method == "cca" else None,
            )
            model_file = out / f"{subject}_{args.method}.model"
            extras = {}
            if args.method == "psda":
                extras["match_tolerance"] = PsdaConfig.for_targets(manifest.targets).match_tolerance
            else:
                extras["harmonic_count"] = 2
            data_io_lines = [
                f"method = {args.method}",
                f"window_seconds = {plan.window_seconds!r}",
                f"step_seconds = {plan.step_seconds!r}",
            ] + [f"{k} = {v!r}" for k, v in extras.items()]
            model_file.write_text("\n".join(data_io_lines) + "\n", encoding="utf-8")
            trace_file = out / f"training_trace_{subject}.csv"
            with open(trace_file, "w", encoding="utf-8") as fh:
                fh.write("window_seconds,train_accuracy,train_itr\n")
                for p in trace:
                    itr_txt = "-" if p.train_itr is None else f"{p.train_itr:.6f}"
                    fh.write(f"{p.window_seconds},{p.train_accuracy:.6f},{itr_txt}\n")
            runner = make_runner(
                args.method, targets=manifest.targets, plan=plan, pre=pre,
                sampling_rate=manifest.sampling_rate,
                channels=_cca_channels(args, manifest) if args.method == "cca" else None,
            )
            best_acc = max(p.train_accuracy for p in trace)

        holdout_outcomes = [
            (t, runner(t.signal, t.record.duration)) for t in holdout_trials
        ]
        holdout_correct = sum(
            1 for t, r in holdout_outcomes
            if getattr(r, "frequency", None) == t.record.stimulus_frequency
        )
        summary_lines.append(
            f"{subject} {args.method}: window={plan.window_seconds}s "
            f"train_accuracy={best_acc:.3f} "
            f"holdout_accuracy={holdout_correct}/{len(holdout_trials)}"
        )
        print(f"trained {subject}: model -> {model_file}")

    summary = out / f"training_summary_{args.method}.txt"
    summary.write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    return 0


def _eval_one_method(method, dataset, args, pre) -> list[SubjectReport]:
    manifest = dataset.manifest
    reports: list[SubjectReport] = []
    default_plan = WindowPlan(args.window_sec, args.step_sec)
    by_subject = dataset.by_subject()
    model_arg = Path(args.model) if args.model else None

    def runner_for(subject):
        bank, plan = None, default_plan
        extras = {}
        if model_arg is not None:
            path = _model_path(model_arg, subject, method)
            if not path.exists():
                # baselines run fine on defaults; only bifb needs a trained model
                if method != "bifb" and model_arg.is_dir():
                    return make_runner(
                        method,
                        targets=manifest.targets,
                        plan=default_plan,
                        pre=pre,
                        sampling_rate=manifest.sampling_rate,
                        channels=_cca_channels(args, manifest) if method == "cca" else None,
                    )
                raise FileNotFoundError(f"model not found: {path}")
            entries = parse_keyvalue(path)
            if entries.get("method", "bifb") != method:
                raise ValueError(f"model {path} is for method {entries.get('method')!r}, "
                                 f"not {method!r}")
            if method == "bifb":
                bank, plan = load_bank_config(path)
                bank_targets = tuple(round(t, 9) for t in bank.targets)
                data_targets = tuple(round(t, 9) for t in sorted(manifest.targets))
                if bank_targets != data_targets:
                    raise ValueError(
                        f"model/dataset mismatch: model targets {bank.targets} vs "
                        f"manifest targets {manifest.targets}"
                    )
            else:
                plan = WindowPlan(float(entries["window_seconds"]),
                                  float(entries["step_seconds"]))
                if method == "psda" and "match_tolerance" in entries:
                    extras["match_tolerance"] = float(entries["match_tolerance"])
                if method == "cca" and "harmonic_count" in entries:
                    extras["harmonic_count"] = int(entries["harmonic_count"])
        elif method == "bifb":
            raise ValueError("bifb evaluation requires --model (train one first)")
        return make_runner(
            method,
            targets=manifest.targets,
            plan=plan,
            pre=pre,
            bank=bank,
            sampling_rate=manifest.sampling_rate,
            channels=_cca_channels(args, manifest) if method == "cca" else None,
            **extras,
        )

    n_commands = len(manifest.targets)
    for subject in sorted(by_subject):
        runner = runner_for(subject)
        sub_dataset = data_io.Dataset(
            manifest=manifest, trials=tuple(by_subject[subject])
        )
        outcomes = evaluate_dataset(sub_dataset, runner)
        reports.extend(subject_reports(outcomes, n_commands, method))
    return reports


def cmd_eval(args) -> int:
    dataset = data_io.load_dataset(args.manifest)
    pre = _pre_config(args, dataset.manifest)
    out = _out_dir(args)
    methods = list(METHOD_ORDER) if args.method == "all" else [args.method]
    all_reports: list[SubjectReport] = []
    for method in methods:
        all_reports.extend(_eval_one_method(method, dataset, args, pre))
    # table order mirrors the comparison layout: subject-major, method columns
    order = {m: i for i, m in enumerate(METHOD_ORDER)}
    all_reports.sort(key=lambda r: (r.subject, order.get(r.method.lower(), 99)))
    suffix = "csv" if args.format == "csv" else "txt"
    path = data_io.export_report(all_reports, out / f"report.{suffix}", fmt=args.format)
    print(f"wrote {path}")
    return 0


def cmd_inspect(args) -> int:
    out = _out_dir(args)
    bank = None
    if args.model:
        bank, _ = load_bank_config(args.model)
    wrote = []
    if args.manifest:
        dataset = data_io.load_dataset(args.manifest)
        pre = _pre_config(args, dataset.manifest)
        trials = [t for t in dataset.trials if t.subject == args.subject] \
            if args.subject else list(dataset.trials)
        if not trials:
            raise ValueError(f"no trials for subject {args.subject!r}")
        if not 0 <= args.trial < len(trials):
            raise ValueError(f"trial index {args.trial} out of range (0..{len(trials) - 1})")
        trial = trials[args.trial]
        plan = WindowPlan(args.window_sec, args.step_sec)
        prepared = normalize(bandpass(trial.signal.channel(pre.channel),
                                      pre.band_low, pre.band_high))
        windows = sliding_windows(prepared, plan)
        if not windows:
            raise ValueError("trial shorter than one analysis window")
        spectrum = magnitude_spectrum(windows[0][1], pre).restricted(0.0, 2 * pre.band_high)
        name = f"spectrum_{trial.subject}_{args.trial:03d}.svg"
        wrote.append(data_io.plot_spectrum(spectrum, out / name, bank=bank,
                                           title=f"{trial.subject} trial {args.trial}"))
    elif bank is not None:
        empty = Spectrum(np.empty(0), np.empty(0))
        wrote.append(data_io.plot_spectrum(empty, out / "filterbank.svg", bank=bank,
                                           title="filter bank"))
    else:
        raise ValueError("inspect needs --manifest and/or --model")
    for p in wrote:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssvepkit",
        description="SSVEP frequency detection: filter-bank detector with PSDA/CCA baselines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_method=True):
        if with_method:
            p.add_argument("--method", choices=("bifb", "psda", "cca"), default="bifb")
        p.add_argument("--manifest", required=True, help="dataset manifest path")
        p.add_argument("--band", type=_parse_band, default=(5.0, 35.0),
                       help="analysis band LO:HI in Hz")
        p.add_argument("--channel", default=None,
                       help="analysis channel (comma list selects the CCA subset)")
        p.add_argument("--window-sec", type=float, default=4.0, dest="window_sec")
        p.add_argument("--step-sec", type=float, default=1.0, dest="step_sec")
        p.add_argument("--out", default=None, help="output directory (default $SSVEPKIT_OUT or ./out)")
        p.add_argument("--seed", type=int, default=0)

    p_train = sub.add_parser("train", help="grid-search detector parameters per subject")
    common(p_train)
    p_train.add_argument("--bandwidths", type=_parse_floats, default=(0.2, 0.4, 0.6, 1.0))
    p_train.add_argument("--gains", type=_parse_floats, default=(1.0, 1.5, 2.0, 3.0))
    p_train.add_argument("--harmonic-weights", type=_parse_floats,
                         default=(0.0, 0.25, 0.5, 1.0), dest="harmonic_weights")
    p_train.add_argument("--windows", type=_parse_floats, default=(2.0, 3.0, 4.0, 5.0, 6.0))
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate methods and emit the comparison table")
    common(p_eval, with_method=False)
    p_eval.add_argument("--method", choices=("bifb", "psda", "cca", "all"), default="all")
    p_eval.add_argument("--model", default=None,
                        help="model file, or directory of <subject>_<method>.model files")
    p_eval.add_argument("--format", choices=("csv", "text"), default="csv")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    p_synth.add_argument("--targets", type=_parse_floats, required=True)
    p_synth.add_argument("--trials-per-target", type=int, required=True,
                         dest="trials_per_target")
    p_synth.add_argument("--duration", type=float, default=12.0)
    p_synth.add_argument("--rate", type=float, default=256.0)
    p_synth.add_argument("--subjects", type=int, default=1)
    p_synth.add_argument("--channels", default="Oz")
    p_synth.add_argument("--harmonics", type=_parse_floats, default=(1.0, 0.5),
                         help="per-harmonic amplitudes, fundamental first")
    p_synth.add_argument("--snr-db", type=float, default=10.0, dest="snr_db")
    p_synth.add_argument("--attenuation", type=float, default=0.0,
                         help="amplitude falls as (f/f_min)^-a across targets")
    p_synth.add_argument("--noise-only", action="store_true", dest="noise_only")
    p_synth.add_argument("--name", default="synthetic")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", default=None)
    p_synth.add_argument("--force", action="store_true")
    p_synth.set_defaults(func=cmd_synth)

    p_inspect = sub.add_parser("inspect", help="plot spectra and filter banks as SVG")
    p_inspect.add_argument("--manifest", default=None)
    p_inspect.add_argument("--model", default=None)
    p_inspect.add_argument("--subject", default=None)
    p_inspect.add_argument("--trial", type=int, default=0)
    p_inspect.add_argument("--band", type=_parse_band, default=(5.0, 35.0))
    p_inspect.add_argument("--channel", default=None)
    p_inspect.add_argument("--window-sec", type=float, default=4.0, dest="window_sec")
    p_inspect.add_argument("--step-sec", type=float, default=1.0, dest="step_sec")
    p_inspect.add_argument("--out", default=None)
    p_inspect.add_argument("--seed", type=int, default=0)
    p_inspect.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single CLI error funnel
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
