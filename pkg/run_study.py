#!/usr/bin/env python3
"""
Complete Study Runner
Runs every toolkit phase on the built-in synthetic scenarios: synthesize trials,
baseline evaluation, SBA, BO and grid tuning, then plot-data export.
Each phase is a cli.py subprocess streaming straight to the console
"""

import argparse
import glob
import subprocess
import sys
from pathlib import Path

from transition_config import get_file_pattern, get_project_info

CLI = str(Path(__file__).resolve().parent / "cli.py")
SCENARIOS = ("w-s", "w-sa", "w-sd", "slow-sit", "sd-outlier")


def run_phase(phase_name, cli_args):
    """Run one cli.py command without capturing output"""
    print(f"\n>>> PHASE {phase_name.upper()}: cli.py {' '.join(cli_args)}")
    print("=" * 60)

    try:
        result = subprocess.run([sys.executable, CLI, *cli_args])
    except OSError as e:
        print(f"\n[ERROR] Could not start {phase_name}: {e}")
        return False

    if result.returncode == 0:
        print(f"\n[OK] {phase_name.upper()} PHASE COMPLETED SUCCESSFULLY")
        return True
    print(f"\n[ERROR] {phase_name.upper()} PHASE FAILED")
    print(f"Return code: {result.returncode}")
    return False


def check_files_exist(pattern, phase_name):
    """Check that a phase left the artifacts the next one reads"""
    files = sorted(glob.glob(pattern))
    if files:
        print(f"[OK] Found {len(files)} files for {phase_name} phase: {pattern}")
        for file in files[:3]:
            print(f"      ✓ {file}")
        if len(files) > 3:
            print(f"      ... and {len(files) - 3} more")
        return True
    print(f"[ERROR] No files found for {phase_name} phase: {pattern}")
    return False


def main(argv=None):
    parser = argparse.ArgumentParser(description="Run the full synthetic transition study")
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--results-dir", default="results")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--budget", type=int, default=30)
    parser.add_argument("--pair", default="wsd", choices=("ws", "wsa", "wsd"))
    args = parser.parse_args(argv)

    project = get_project_info()
    data_dir, results_dir = Path(args.data_dir), Path(args.results_dir)
    seed = ["--seed", str(args.seed)]

    print(f">>> {project['name'].upper()} STUDY RUNNER")
    print("=" * 60)
    print(f"Data: {data_dir}  Results: {results_dir}  Seed: {args.seed}  Pair: {args.pair}")

    # Phase 1: Synthesize
    for scenario in SCENARIOS:
        if not run_phase(f"SYNTH {scenario}", ["synth", "--scenario", scenario,
                                                "--out-dir", str(data_dir / scenario), *seed]):
            print(f"\n[STOP] Phase 1 failed - stopping study")
            return False
    if not check_files_exist(str(data_dir / "*" / "*.csv"), "EVALUATE"):
        return False

    # Phase 2: Baseline evaluation with system defaults
    for scenario in SCENARIOS:
        if not run_phase(f"BASELINE {scenario}", ["evaluate", "--in", str(data_dir / scenario),
                                                   "--stage", f"baseline_{scenario}",
                                                   "--out-dir", str(results_dir)]):
            print(f"\n[STOP] Phase 2 failed - stopping study")
            return False

    # Phase 3: SBA on the slow sitter, statistics from the clean sit population
    success_sba = run_phase("SBA", ["tune", "sba", "--train", str(data_dir / "w-s"),
                                    "--new", str(data_dir / "slow-sit"), "--out-dir", str(results_dir)])
    if not success_sba:
        print(f"\n[WARNING] SBA phase had issues - continuing with optimization")

    # Phases 4 and 5: BO and the grid baseline on the same trials
    pair_data = {"ws": "slow-sit", "wsa": "w-sa", "wsd": "sd-outlier"}[args.pair]
    tune_args = ["--pair", args.pair, "--in", str(data_dir / pair_data), "--out-dir", str(results_dir), *seed]
    success_bo = run_phase("BO", ["tune", "bo", "--budget", str(args.budget), *tune_args])
    success_grid = run_phase("GRID", ["tune", "grid", *tune_args])
    if not (success_bo or success_grid):
        print(f"\n[STOP] Both tuning phases failed - stopping study")
        return False

    # Phase 6: Plot data
    tune_pattern = str(results_dir / get_file_pattern("tune_result", method="*", pair=args.pair))
    check_files_exist(tune_pattern, "EXPORT")
    success_export = run_phase("EXPORT", ["export-plots", "--results", str(results_dir),
                                          "--out-dir", str(results_dir / "plots")])

    print(f"\n>>> STUDY FINISHED!")
    print("=" * 60)
    for name, ok in (("SBA", success_sba), ("BO", success_bo), ("GRID", success_grid), ("EXPORT", success_export)):
        print(f"   {'[OK]' if ok else '[WARNING]'} {name}")

    print(f"\n>> Files created:")
    for pattern in ("plot_*.csv", "plot_*.json"):
        for file in sorted(glob.glob(str(results_dir / "plots" / pattern))):
            print(f"  >> {file}")

    return success_bo and success_grid and success_export


if __name__ == "__main__":
    try:
        sys.exit(0 if main() else 1)
    except KeyboardInterrupt:
        print(f"\n[CANCELLED] Study cancelled by user")
        sys.exit(130)
