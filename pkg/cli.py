#!/usr/bin/env python3
"""
Transition Toolkit CLI
Batch entry point for alignment mapping, detection replay, evaluation,
threshold training, SBA / BO / grid tuning, synthetic trials and plot-data export

Usage:
    python cli.py synth --scenario sd-outlier --out-dir data
    python cli.py run-fsm --system ewalk --in trial.csv --out log.csv
    python cli.py evaluate --in data --stage baseline --out-dir results
    python cli.py tune bo --pair wsd --budget 30 --seed 7 --out-dir results
    python cli.py export-plots --results results --out-dir plots
"""

import argparse
import glob
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from alignment_map import fit_map_from_cycles, load_weights, map_frames, resample_cycle, save_weights, segment_cycles
from bo_tuner import ObjectiveConfig, SearchSpace, TuneResult, personalize_pair, unit_lattice
from eval_harness import (SCENARIOS, Trial, build_labeled_sets, collect_transition_icfs, evaluate_trials,
                          load_trial_csv, load_trial_dir, replay, resolve_column_map, save_trial_csv,
                          scenario_trials, summarize_subjects)
from fsm_engine import write_detection_log
from gp_core import acquisition_value, default_hyper, gp_fit, gp_predict
from sba_tuner import stats_by_transition, tune_threshold_set_sba
from signal_core import DetectorConfig, Transition, detect_gait_events, ensure_derivatives, frames_to_arrays
from threshold_learn import LEARNERS, ThresholdSet, derive_threshold_set
from transition_config import (PAIR_IDS, TRANSITION_CONFIG, RunConfig, get_file_pattern, get_project_info,
                               get_system_defaults, load_config_file)
from transition_env import configure_logging, load_config_from_env
from transition_errors import (DegenerateStatsError, InvalidInputError,
                               OptimizationAbortedError, TransitionToolkitError, UsageError)

logger = logging.getLogger(__name__)

# Built-in data for `tune bo|grid` without --in: the scenario whose subject the defaults fail
DEFAULT_TUNE_SCENARIOS = {"ws": "slow-sit", "wsa": "w-sa", "wsd": "sd-outlier"}
ICF_TABLE_COLUMNS = ("transition", "value")


class CliArgumentParser(argparse.ArgumentParser):
    """argparse parser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# =============================================================================
# SHARED HELPERS
# =============================================================================

def resolve_run_config(args) -> RunConfig:
    """Flags > --config file > environment > built-in defaults."""
    file_settings = load_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {
        "system": args.system,
        "seed": args.seed,
        "pair": args.pair,
        "budget": args.budget,
        "output_dir": args.out_dir,
        "thresholds_path": args.thresholds,
        "map_weights_path": args.weights,
        "excluded_subjects": args.exclude,
        "log_level": args.log_level,
        "input_path": getattr(args, "input", None),
        "column_map": getattr(args, "column_map", None),
        "grf_scale": getattr(args, "grf_scale", None),
    }
    run = RunConfig.assemble(flags, file_settings, load_config_from_env()).validate()
    if getattr(args, "save_config", None):
        path = Path(args.save_config)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(run.to_dict(), f, indent=2)
    return run


def detector_for(run: RunConfig) -> DetectorConfig:
    return DetectorConfig.for_system(run.system, **run.detector)


def thresholds_for(run: RunConfig) -> ThresholdSet:
    if run.thresholds_path:
        return ThresholdSet.load(run.thresholds_path)
    return ThresholdSet.defaults(run.system)


def weights_for(run: RunConfig):
    return load_weights(run.map_weights_path) if run.map_weights_path else None


def load_trials(path, run: RunConfig, detector: DetectorConfig):
    """A trial CSV or a directory of them."""
    if path is None:
        raise UsageError("this command needs --in <trial.csv | directory>")
    path = Path(path)
    options = {"system": run.system, "detector_config": detector,
               "column_map": resolve_column_map(run.column_map), "grf_scale": run.grf_scale}
    if path.is_dir():
        return load_trial_dir(path, **options)
    return [load_trial_csv(path, **options)]


def output_path(run: RunConfig, kind, **kwargs) -> Path:
    return Path(run.output_dir) / get_file_pattern(kind, **kwargs)


def _print_report(report, title):
    print(f"\n>> {title}")
    for transition, tally in report.pooled().items():
        accuracy = "n/a" if tally.accuracy is None else f"{tally.accuracy:6.1f}%"
        print(f"   {transition.value:5s} {tally.detected:3d}/{tally.total:<3d} {accuracy}")


# =============================================================================
# SUBCOMMANDS
# =============================================================================

def cmd_synth(args, run):
    print(f">>> SYNTHETIC TRIALS: {args.scenario} x {args.instances}")
    overrides = {"system": run.system}
    if args.noise:
        overrides["noise_std"] = args.noise
    trials = scenario_trials(args.scenario, args.instances, run.seed, **overrides)
    for trial in trials:
        path = output_path(run, "trial", subject=trial.subject, scenario=args.scenario, index=trial.trial_index)
        save_trial_csv(trial, path)
        print(f"   ✓ {path} ({len(trial)} frames, {len(trial.gt_transitions)} transitions)")
    print(f"[OK] {len(trials)} trials written to {run.output_dir}")
    return 0


def _cycles(trials, detector):
    n_points = TRANSITION_CONFIG["mapping"]["cycle_points"]
    cycles = []
    for trial in trials:
        frames = ensure_derivatives(trial.frames, detector)
        cycles.extend(resample_cycle(c, n_points) for c in segment_cycles(frames, detector) if len(c) >= 2)
    if not cycles:
        raise InvalidInputError("No heel-strike delimited cycles found")
    return cycles


def cmd_fit_map(args, run):
    detector = detector_for(run)
    measured = _cycles(load_trials(run.input_path, run, detector), detector)
    reference_path = Path(args.reference)
    if not reference_path.exists():
        raise FileNotFoundError(f"Reference trials not found: {reference_path}")
    reference = _cycles(load_trials(reference_path, run, detector), detector)

    mean_reference = np.mean([frames_to_arrays(c)["theta"] for c in reference], axis=0)
    print(f">>> FIT ALIGNMENT MAP: {len(measured)} measured cycles, {len(reference)} reference cycles")
    weights, report = fit_map_from_cycles(measured, [mean_reference] * len(measured))

    weights_path = Path(args.out) if args.out else output_path(run, "map_weights")
    save_weights(weights, weights_path)
    report_path = output_path(run, "map_report")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, 'w', encoding='utf-8') as f:
        json.dump({"weights": list(weights.w), **report.to_dict()}, f, indent=2)

    print(f"   RMSE: {report.rmse_before:.3f} -> {report.rmse_after:.3f} deg")
    print(f"   Mean MHF: {report.mhf_mean_before:.2f} -> {report.mhf_mean_after:.2f} "
          f"(reference {report.mhf_mean_reference:.2f}) deg")
    if report.rank_deficient:
        print("[WARNING] Design matrix is rank deficient; weights are minimum-norm")
    print(f"[OK] Weights saved to {weights_path}")
    return 0


def cmd_apply_map(args, run):
    if not run.map_weights_path:
        raise UsageError("apply-map needs --weights <weights.json>")
    detector = detector_for(run)
    weights = weights_for(run)
    trials = load_trials(run.input_path, run, detector)
    for trial in trials:
        frames = map_frames(weights, ensure_derivatives(trial.frames, detector), detector)
        mapped = Trial(frames, trial.gt_transitions, trial.subject, trial.system, trial.trial_index)
        path = Path(args.out) if args.out and len(trials) == 1 else output_path(run, "mapped_trial", name=trial.name)
        save_trial_csv(mapped, path)
        print(f"   ✓ {path}")
    print(f"[OK] Mapped {len(trials)} trial(s)")
    return 0


def cmd_run_fsm(args, run):
    detector = detector_for(run)
    thresholds = thresholds_for(run)
    weights = weights_for(run)
    trials = load_trials(run.input_path, run, detector)

    icf_rows = []
    for trial in trials:
        detections = replay(trial, thresholds, detector, weights)
        path = Path(args.out) if args.out and len(trials) == 1 else output_path(run, "detection_log", name=trial.name)
        write_detection_log(detections, path)
        print(f"   ✓ {trial.name}: {len(detections)} detections -> {path}")

        if args.icf_out:
            frames = ensure_derivatives(trial.frames, detector)
            if weights is not None:
                frames = map_frames(weights, frames, detector)
            for event in detect_gait_events(frames, detector):
                if event.icf is not None:
                    icf_rows.append({"subject": trial.subject, "trial_index": trial.trial_index,
                                     "t": event.t, "event": event.kind.value, "icf_id": event.icf.icf_id.value,
                                     "pair": event.icf.transition_context.value, "value": event.icf.value})

    if args.icf_out:
        path = Path(args.icf_out)
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(icf_rows, columns=["subject", "trial_index", "t", "event", "icf_id", "pair", "value"]
                     ).to_csv(path, index=False, encoding='utf-8')
        print(f"   ✓ {len(icf_rows)} ICF samples -> {path}")
    print(f"[OK] Replayed {len(trials)} trial(s)")
    return 0


def cmd_evaluate(args, run):
    detector = detector_for(run)
    trials = load_trials(run.input_path, run, detector)
    report = evaluate_trials(trials, thresholds_for(run), detector, weights_for(run),
                             excluded_subjects=run.excluded_subjects)
    json_path = output_path(run, "report_json", name=args.stage)
    report.save(json_path, output_path(run, "report_csv", name=args.stage))
    summarize_subjects(report).to_csv(output_path(run, "summary", name=args.stage), index=False, encoding='utf-8')
    _print_report(report, f"ACCURACY ({args.stage})")
    print(f"[OK] Report saved to {json_path}")
    return 0


def cmd_train_thresholds(args, run):
    detector = detector_for(run)
    trials = load_trials(run.input_path, run, detector)
    sets = build_labeled_sets(trials, detector, weights_for(run))
    trained = derive_threshold_set(sets, system=run.system, learner=args.learner, fallback=thresholds_for(run))
    path = Path(args.out) if args.out else output_path(run, "thresholds", name="trained")
    trained.save(path)
    print(f">>> TRAINED THRESHOLDS ({len(sets)}/6 learned)")
    for transition, entry in trained.items():
        print(f"   {transition.value:5s} {entry.value:9.3f} ({entry.bound.value})")
    print(f"[OK] Thresholds saved to {path}")
    return 0


def _icf_table(path, run, detector):
    """An ICF CSV (transition, value columns) or trial data to collect transition ICFs from."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"ICF source not found: {path}")
    if path.is_file():
        header = pd.read_csv(path, nrows=0).columns
        if all(c in header for c in ICF_TABLE_COLUMNS) and "theta_th" not in header:
            return pd.read_csv(path), None
    trials = load_trials(path, run, detector)
    return collect_transition_icfs(trials, detector, weights_for(run)), trials


def cmd_tune_sba(args, run):
    detector = detector_for(run)
    base = thresholds_for(run)
    if args.train:
        train_table, _ = _icf_table(args.train, run, detector)
    else:
        train_table = collect_transition_icfs(
            scenario_trials("w-s", 5, run.seed, rate_jitter_std=3.0, system=run.system), detector)
    if args.new:
        new_table, new_trials = _icf_table(args.new, run, detector)
    else:
        new_trials = scenario_trials("slow-sit", 5, run.seed, system=run.system)
        new_table = collect_transition_icfs(new_trials, detector)

    print(f">>> SBA TUNING: {len(train_table)} training ICFs, {len(new_table)} new-subject ICFs")
    tuned, unchanged = tune_threshold_set_sba(base, stats_by_transition(train_table), stats_by_transition(new_table))
    if unchanged and args.strict:
        raise DegenerateStatsError(f"Degenerate statistics for {', '.join(t.value for t in unchanged)}")

    path = Path(args.out) if args.out else output_path(run, "thresholds", name="sba")
    tuned.save(path)
    for transition in Transition:
        before, after = base.value(transition), tuned.value(transition)
        marker = "" if before == after else "  *"
        print(f"   {transition.value:5s} {before:9.3f} -> {after:9.3f}{marker}")
    if unchanged:
        print(f"[WARNING] Left unchanged (degenerate statistics): {', '.join(t.value for t in unchanged)}")

    if new_trials:
        weights = weights_for(run)
        for stage, thresholds in (("sba_before", base), ("sba_after", tuned)):
            report = evaluate_trials(new_trials, thresholds, detector, weights, excluded_subjects=run.excluded_subjects)
            report.save(output_path(run, "report_json", name=stage), output_path(run, "report_csv", name=stage))
            _print_report(report, stage.upper())
    print(f"[OK] SBA thresholds saved to {path}")
    return 0


def cmd_tune_search(args, run):
    method = args.method
    if run.pair is None:
        raise UsageError(f"tune {method} needs --pair ({' | '.join(PAIR_IDS)})")
    detector = detector_for(run)
    base = thresholds_for(run)
    if run.input_path:
        trials = load_trials(run.input_path, run, detector)
    else:
        scenario = DEFAULT_TUNE_SCENARIOS[run.pair]
        print(f">> No --in given; using built-in scenario '{scenario}'")
        trials = scenario_trials(scenario, 5, run.seed, system=run.system)

    objective_config = ObjectiveConfig.for_pair(run.pair, **run.objective)
    print(f">>> {method.upper()} TUNING: pair {run.pair}, {len(trials)} trials, seed {run.seed}")
    result_path = output_path(run, "tune_result", method=method, pair=run.pair)
    try:
        result, tuned, before, after = personalize_pair(trials, run.pair, base, method, detector, objective_config,
                                                        weights_for(run), seed=run.seed, budget=run.budget)
    except OptimizationAbortedError as e:
        if e.partial is not None:
            e.partial.save(result_path)
            print(f"[WARNING] Partial trace ({e.partial.evaluations} evaluations) saved to {result_path}")
        raise

    result.save(result_path)
    tuned.save(output_path(run, "thresholds", name=f"{method}_{run.pair}"))
    for stage, report in (("before", before), ("after", after)):
        name = f"{method}_{run.pair}_{stage}"
        report.save(output_path(run, "report_json", name=name), output_path(run, "report_csv", name=name))
        _print_report(report, f"HELD-OUT ACCURACY {stage.upper()}")
    print(f"\n   Best thresholds: {result.best_th}  J = {result.best_J:.6f}  ({result.evaluations} evaluations)")
    print(f"[OK] Tune result saved to {result_path}")
    return 0


# =============================================================================
# PLOT-DATA EXPORT
# =============================================================================

def _name_from(path, kind, field_name="name"):
    prefix, suffix = get_file_pattern(kind, **{field_name: "|"}).split("|")
    name = Path(path).name
    return name[len(prefix):len(name) - len(suffix)]


def _surrogate_frame(result: TuneResult, resolution=None):
    """GP mean, std and acquisition over the full lattice, fitted on a BO trace."""
    resolution = resolution or TRANSITION_CONFIG["bo"]["resolution"]
    space = SearchSpace.for_pair(result.pair)
    X = np.array([space.normalize(th) for th, _ in result.trace])
    y = np.array([j for _, j in result.trace])
    model = gp_fit(X, y, default_hyper(y))
    units = unit_lattice(resolution)
    mean, std = gp_predict(model, units)
    th = space.denormalize(units)
    return pd.DataFrame({"th0": th[:, 0], "th1": th[:, 1], "mean": mean, "std": std,
                         "acquisition": acquisition_value(mean, std, TRANSITION_CONFIG["bo"]["k"])})


def export_plots(results_dir, out_dir) -> list:
    """
    Turn run artifacts into plot-ready CSV/JSON series. Returns the written paths;
    a directory with no artifacts raises InvalidInputError.
    """
    results_dir, out_dir = Path(results_dir), Path(out_dir)
    if not results_dir.is_dir():
        raise FileNotFoundError(f"Results directory not found: {results_dir}")

    tune_files = sorted(glob.glob(str(results_dir / get_file_pattern("tune_result", method="*", pair="*"))))
    report_files = sorted(glob.glob(str(results_dir / get_file_pattern("report_json", name="*"))))
    threshold_files = sorted(glob.glob(str(results_dir / get_file_pattern("thresholds", name="*"))))
    if not (tune_files or report_files or threshold_files):
        raise InvalidInputError(f"No run artifacts (tune results, reports, thresholds) in {results_dir}")

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(frame, kind, **kwargs):
        path = out_dir / get_file_pattern(kind, **kwargs)
        frame.to_csv(path, index=False, encoding='utf-8')
        written.append(path)

    results = [TuneResult.load(path) for path in tune_files]
    for result in results:
        rows = [{"iteration": i + 1, "th0": th[0], "th1": th[1], "J": j} for i, (th, j) in enumerate(result.trace)]
        lattice = pd.DataFrame(rows, columns=["iteration", "th0", "th1", "J"])
        emit(lattice, "lattice", method=result.method, pair=result.pair)
        trace = lattice[["iteration", "J"]].assign(best_so_far=lattice["J"].cummin())
        emit(trace, "trace", method=result.method, pair=result.pair)
        if result.method == "bo" and result.trace:
            emit(_surrogate_frame(result), "surrogate", method=result.method, pair=result.pair)

    by_pair = {}
    for result in results:
        by_pair.setdefault(result.pair, {})[result.method] = result
    for pair, methods in by_pair.items():
        if not {"bo", "grid"} <= set(methods):
            continue
        bo, grid = methods["bo"], methods["grid"]
        comparison = {
            "pair": pair,
            "bo": {"best_th": list(bo.best_th), "best_J": bo.best_J, "evaluations": bo.evaluations},
            "grid": {"best_th": list(grid.best_th), "best_J": grid.best_J, "evaluations": grid.evaluations},
            "max_abs_difference": float(np.max(np.abs(np.subtract(bo.best_th, grid.best_th)))),
            "evaluation_ratio": bo.evaluations / grid.evaluations if grid.evaluations else None,
        }
        path = out_dir / get_file_pattern("comparison", pair=pair)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(comparison, f, indent=2)
        written.append(path)

    if results:
        counts = pd.DataFrame([{"method": r.method, "pair": r.pair, "evaluations": r.evaluations,
                                "budget": r.budget, "best_J": r.best_J} for r in results])
        emit(counts, "evaluation_counts")

    if report_files:
        rows = []
        for path in report_files:
            with open(path, 'r', encoding='utf-8') as f:
                pooled = json.load(f).get("pooled", {})
            stage = _name_from(path, "report_json")
            for transition, entry in pooled.items():
                rows.append({"stage": stage, "transition": transition, "n_cdt": entry["n_cdt"],
                             "n_tt": entry["n_tt"], "accuracy": entry["accuracy"]})
        emit(pd.DataFrame(rows, columns=["stage", "transition", "n_cdt", "n_tt", "accuracy"]), "accuracy_bars")

    if threshold_files:
        rows = []
        for path in threshold_files:
            thresholds = ThresholdSet.load(path)
            defaults = get_system_defaults(thresholds.system)["thresholds"]
            for transition, entry in thresholds.items():
                default = defaults[transition.value]
                rows.append({"name": _name_from(path, "thresholds"), "system": thresholds.system,
                             "transition": transition.value, "default": default, "value": entry.value,
                             "change": entry.value - default})
        emit(pd.DataFrame(rows), "threshold_changes")

    return written


def cmd_export_plots(args, run):
    results_dir = args.results or run.output_dir
    print(f">>> EXPORT PLOT DATA: {results_dir} -> {run.output_dir}")
    written = export_plots(results_dir, run.output_dir)
    for path in written:
        print(f"   ✓ {path}")
    print(f"[OK] {len(written)} plot-data files written")
    return 0


# =============================================================================
# PARSER
# =============================================================================

def _add_common(parser):
    group = parser.add_argument_group("run settings")
    group.add_argument("--config", help="JSON file of run settings (overridden by flags)")
    group.add_argument("--system", help="System tag: ewalk, autonomyo or custom")
    group.add_argument("--seed", type=int, help="Random seed")
    group.add_argument("--pair", choices=PAIR_IDS, help="Transition pair to tune")
    group.add_argument("--budget", type=int, help="BO evaluation budget")
    group.add_argument("--thresholds", help="ThresholdSet JSON (default: system defaults)")
    group.add_argument("--weights", help="Alignment-map weights JSON")
    group.add_argument("--exclude", nargs="+", metavar="SUBJECT", help="Subjects left out of evaluation")
    group.add_argument("--out-dir", help="Output directory (default: results)")
    group.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    group.add_argument("--save-config", help="Write the effective run settings to this JSON file")


def _add_input_format(parser):
    group = parser.add_argument_group("trial format")
    group.add_argument("--column-map", help="Column renames: a preset (zenodo) or a JSON file {source: canonical}")
    group.add_argument("--grf-scale", type=float, help="Divide the grf column by this factor (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    project = get_project_info()
    parser = CliArgumentParser(prog="cli.py", description=project["description"])
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    synth = commands.add_parser("synth", help="Write built-in synthetic scenario trials")
    synth.add_argument("--scenario", required=True, choices=SCENARIOS)
    synth.add_argument("--instances", type=int, default=5)
    synth.add_argument("--noise", type=float, default=0.0, help="Angle noise std (deg)")
    synth.set_defaults(handler=cmd_synth)

    fit_map = commands.add_parser("fit-map", help="Fit alignment-map weights against reference trials")
    fit_map.add_argument("--in", dest="input", help="Measured trial CSV or directory")
    fit_map.add_argument("--reference", required=True, help="Reference trial CSV or directory")
    fit_map.add_argument("--out", help="Weights JSON path")
    fit_map.set_defaults(handler=cmd_fit_map)

    apply_map = commands.add_parser("apply-map", help="Rewrite trials through an alignment map")
    apply_map.add_argument("--in", dest="input")
    apply_map.add_argument("--out", help="Output CSV (single input trial)")
    apply_map.set_defaults(handler=cmd_apply_map)

    run_fsm = commands.add_parser("run-fsm", help="Replay trials and write detection logs")
    run_fsm.add_argument("--in", dest="input")
    run_fsm.add_argument("--out", help="Detection log CSV (single input trial)")
    run_fsm.add_argument("--icf-out", help="Also write every ICF sample to this CSV")
    run_fsm.set_defaults(handler=cmd_run_fsm)

    evaluate = commands.add_parser("evaluate", help="Score detections against ground truth")
    evaluate.add_argument("--in", dest="input")
    evaluate.add_argument("--stage", default="baseline", help="Name of this evaluation in output files")
    evaluate.set_defaults(handler=cmd_evaluate)

    train = commands.add_parser("train-thresholds", help="Learn thresholds from labeled trials")
    train.add_argument("--in", dest="input")
    train.add_argument("--learner", choices=sorted(LEARNERS), default=None)
    train.add_argument("--out", help="ThresholdSet JSON path")
    train.set_defaults(handler=cmd_train_thresholds)

    tune = commands.add_parser("tune", help="Personalize thresholds (sba, bo, grid)")
    methods = tune.add_subparsers(dest="method", metavar="method")
    methods.required = True

    sba = methods.add_parser("sba", help="Statistics-based rescaling")
    sba.add_argument("--train", help="Training-population ICF CSV or trials")
    sba.add_argument("--new", help="New-subject ICF CSV or trials")
    sba.add_argument("--out", help="ThresholdSet JSON path")
    sba.add_argument("--strict", action="store_true", help="Fail on degenerate statistics")
    sba.set_defaults(handler=cmd_tune_sba)

    for method, text in (("bo", "Bayesian optimization"), ("grid", "Exhaustive grid search")):
        search = methods.add_parser(method, help=text)
        search.add_argument("--in", dest="input", help="Trials (default: built-in scenario for the pair)")
        search.set_defaults(handler=cmd_tune_search)

    export = commands.add_parser("export-plots", help="Export plot-ready series from run artifacts")
    export.add_argument("--results", help="Directory of run artifacts (default: --out-dir)")
    export.set_defaults(handler=cmd_export_plots)

    for sub in (synth, fit_map, apply_map, run_fsm, evaluate, train, sba, export):
        _add_common(sub)
    for name in ("bo", "grid"):
        _add_common(methods.choices[name])
    for sub in (fit_map, apply_map, run_fsm, evaluate, train, sba, methods.choices["bo"], methods.choices["grid"]):
        _add_input_format(sub)
    return parser


# =============================================================================
# MAIN
# =============================================================================

def run_cli(argv=None) -> int:
    """Run one command; returns the process exit code (0 ok, 1 usage, 2 data, 3 numerical)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"[ERROR] {e}", file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        return int(e.code or 0)

    try:
        run = resolve_run_config(args)
        configure_logging(run.log_level)
        return args.handler(args, run)
    except FileNotFoundError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return 2
    except TransitionToolkitError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"[ERROR] Invalid data: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
