#!/usr/bin/env python3
"""
Reliability CLI - Kommandozeile für Experimente, Policy-Auswertung und Theorie-Validatoren
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
from colorama import Fore, Style, init
from pydantic import ValidationError

from .exceptions import ConfigValidationError, ReliabilityError
from .harness.experiment_runner import ExperimentRunner
from .harness.harness_models import ExperimentConfig
from .harness.policy_evaluator import (
    evaluate_policies,
    gap_decomposition,
    make_fold_plan,
    technique_summary,
)
from .harness.router_cache import build_router_cache, make_embedder, save_router_cache
from .harness.run_cache import RunCache
from .routing.routing_models import CacheEntry
from .routing.semknn_router import lambda_sweep, sweep_frame
from .theory.crossover import critical_csi_variance, crossover_sweep, snr_egc, snr_mrc
from .theory.refinement import (
    classify_fixed_point,
    fixed_point,
    iterate_quality_map,
    trajectory_frame,
)
from .theory.theory_models import AmplitudeProfile, QualityMap, QualityMapKind
from .utils.config_loader import ConfigLoader
from .utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

ROUTER_CACHE_FILE = "router_cache.jsonl"


class ReliabilityCLI:
    """Command Line Interface der Reliability Engine"""

    def __init__(self, loader: Optional[ConfigLoader] = None) -> None:
        self.loader = loader or ConfigLoader()

    # Hilfen

    def _entries(self, config: ExperimentConfig) -> List[CacheEntry]:
        cache = RunCache(config.cache_dir)
        try:
            tasks = cache.load_tasks()
        except ReliabilityError:
            tasks = self.loader.tasks_for(config)
        entries = build_router_cache(cache, tasks, make_embedder(config.embedding))
        save_router_cache(entries, Path(config.cache_dir) / ROUTER_CACHE_FILE)
        return entries

    @staticmethod
    def _write(frame: pd.DataFrame, output: Path) -> None:
        output.parent.mkdir(parents=True, exist_ok=True)
        if output.suffix.lower() == ".json":
            frame.to_json(output, orient="records", indent=2)
        else:
            frame.to_csv(output, index=False)
        print(f"{Fore.GREEN}Tabelle geschrieben: {output}{Style.RESET_ALL}")

    @staticmethod
    def _print_frame(title: str, frame: pd.DataFrame) -> None:
        print(f"\n{Fore.CYAN}{title}{Style.RESET_ALL}")
        print("=" * 60)
        with pd.option_context("display.max_columns", None, "display.width", 160):
            print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))

    # Befehle

    def run(self, config_path: str) -> None:
        """Führt ein Experiment aus (gecachte Läufe werden übersprungen, fehlgeschlagene wiederholt)."""
        config = self.loader.load_experiment(config_path)
        summary = ExperimentRunner(config, loader=self.loader).run()
        color = Fore.GREEN if summary.failed == 0 else Fore.YELLOW
        print(
            f"{color}Ausgeführt: {summary.executed}, übersprungen: {summary.skipped}, "
            f"fehlgeschlagen: {summary.failed}{Style.RESET_ALL}"
        )
        for failure in summary.failures[:10]:
            print(f"  - {failure}")

    def evaluate(self, config_path: str, output: Optional[str] = None) -> pd.DataFrame:
        """Policy-Tabelle mit Bootstrap-CIs und Wilcoxon gegen Fixed-Best (CV)."""
        config = self.loader.load_experiment(config_path)
        entries = self._entries(config)
        records = RunCache(config.cache_dir).all_records()
        table = self.loader.load_mcs_table(config.mcs_table) if config.mcs_table else None
        frame = evaluate_policies(
            entries,
            make_fold_plan(entries, config.n_folds, config.seed),
            config.lambdas,
            records=records,
            k=config.k,
            l2=config.l2,
            mcs_table=table,
            n_boot=config.n_boot,
            seed=config.seed,
        )
        self._print_frame("POLICY-TABELLE", frame)

        realized = [e.per_technique["acm"].quality for e in entries if "acm" in e.per_technique]
        if len(realized) == len(entries) and "acm (simulated)" in set(frame["policy"]):
            gaps = gap_decomposition(frame, sum(realized) / len(realized))
            print(f"\n{Fore.CYAN}Orakel-Lücke:{Style.RESET_ALL}")
            print(f"  - Information:     {gaps.info_gap:+.4f}")
            print(f"  - Generalisierung: {gaps.generalization_gap:+.4f}")
            print(f"  - Policy:          {gaps.policy_gap:+.4f}")
            print(f"  - Realisierung:    {gaps.realization_gap:+.4f}")
            print(f"  = gesamt           {gaps.total:+.4f}")

        self._write(frame, Path(output) if output else Path(config.cache_dir) / "policy_table.csv")
        return frame

    def sweep_lambda(
        self, config_path: str, lambdas: Optional[List[float]] = None, output: Optional[str] = None
    ) -> pd.DataFrame:
        """Leave-one-out-Dispatch über ein λ-Gitter."""
        config = self.loader.load_experiment(config_path)
        entries = self._entries(config)
        rows = lambda_sweep(entries, entries, lambdas or config.lambdas, config.k)
        frame = sweep_frame(rows)
        self._print_frame("λ-SWEEP", frame)
        self._write(frame, Path(output) if output else Path(config.cache_dir) / "lambda_sweep.csv")
        return frame

    def theory_crossover(
        self,
        amplitudes: List[float],
        sigma: float = 1.0,
        grid: Optional[List[float]] = None,
        n_trials: int = 100_000,
        seed: int = 0,
        output: Optional[str] = None,
    ) -> pd.DataFrame:
        """MRC/EGC-Crossover: geschlossene Form gegen Monte Carlo."""
        try:
            profile = AmplitudeProfile(amplitudes=amplitudes, sigma=sigma)
        except ValidationError as e:
            raise ConfigValidationError(f"Ungültiges Amplitudenprofil: {e}") from e
        critical = critical_csi_variance(profile)
        print(f"\n{Fore.CYAN}γ_MRC = {snr_mrc(profile):.6f}, γ_EGC = {snr_egc(profile):.6f}{Style.RESET_ALL}")
        if critical.degenerate:
            print(f"{Fore.YELLOW}Gleiche Amplituden: σ_w*² = 0 (degeneriert){Style.RESET_ALL}")
        else:
            print(f"σ_w*² = {critical.value:.6f}")
        if grid is None:
            base = critical.value or 1.0
            grid = [base * f for f in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)]
        frame = crossover_sweep(profile, grid, n_trials, seed)
        self._print_frame("CROSSOVER-SWEEP", frame)
        if output:
            self._write(frame, Path(output))
        return frame

    def theory_threshold(
        self,
        kind: str = "power",
        params: Optional[Dict[str, float]] = None,
        q0: float = 0.5,
        k_max: int = 12,
        noise_sd: float = 0.0,
        guard: bool = True,
        seed: int = 0,
        output: Optional[str] = None,
    ) -> pd.DataFrame:
        """Trajektorie einer Verfeinerungsabbildung samt Fixpunkt-Klassifikation."""
        try:
            qmap = QualityMap(kind=QualityMapKind(kind), params=params or {"exponent": 0.5})
        except ValidationError as e:
            raise ConfigValidationError(f"Ungültige Qualitätsabbildung: {e}") from e
        points = iterate_quality_map(qmap, q0, k_max, noise_sd, guard, seed)
        q_star = fixed_point(qmap, q0)
        kind_of = classify_fixed_point(qmap, q_star)
        color = Fore.GREEN if kind_of.value == "contractive" else Fore.RED
        print(f"\n{color}Fixpunkt q∞ = {q_star:.6f} ({kind_of.value}){Style.RESET_ALL}")
        frame = trajectory_frame(points)
        self._print_frame("TRAJEKTORIE", frame)
        if output:
            self._write(frame, Path(output))
        return frame

    def export(self, config_path: str, output_dir: Optional[str] = None) -> None:
        """Technik-Zusammenfassung und Policy-Tabelle als CSV und JSON."""
        config = self.loader.load_experiment(config_path)
        target = Path(output_dir) if output_dir else Path(config.cache_dir) / "export"
        entries = self._entries(config)
        records = RunCache(config.cache_dir).all_records()
        summary = technique_summary(entries, records, config.n_boot, config.seed)
        policies = self.evaluate(config_path, str(target / "policy_table.csv"))
        for name, frame in (("technique_summary", summary), ("policy_table", policies)):
            self._write(frame, target / f"{name}.csv")
            self._write(frame, target / f"{name}.json")


def _params(items: List[str]) -> Dict[str, float]:
    params = {}
    for item in items:
        name, sep, value = item.partition("=")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            sep = ""
        if not sep:
            raise ConfigValidationError(f"Parameter muss NAME=WERT sein: {item!r}")
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reliability-engine",
        description="Zuverlässigkeits-Codierung für LLM-Kanäle",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Beispiele:
  # Experiment ausführen (idempotent)
  reliability-engine run configs/synthetic_experiment.yaml

  # Policy-Tabelle und λ-Sweep
  reliability-engine evaluate configs/synthetic_experiment.yaml
  reliability-engine sweep-lambda configs/synthetic_experiment.yaml --lambdas 0 0.01 0.1

  # Theorie-Validatoren
  reliability-engine theory crossover --amplitudes 1 2
  reliability-engine theory threshold --param exponent=2 --q0 0.9
        """,
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging-Level (Standard: WARNING)",
    )
    parser.add_argument("--log-file", help="Log zusätzlich in Datei schreiben")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Experiment ausführen")
    run.add_argument("config")

    evaluate = sub.add_parser("evaluate", help="Policy-Tabelle berechnen")
    evaluate.add_argument("config")
    evaluate.add_argument("-o", "--output", help="CSV- oder JSON-Datei")

    sweep = sub.add_parser("sweep-lambda", help="λ-Sweep des semKNN-Routers")
    sweep.add_argument("config")
    sweep.add_argument("--lambdas", type=float, nargs="+")
    sweep.add_argument("-o", "--output")

    theory = sub.add_parser("theory", help="Analytische Validatoren")
    theory_sub = theory.add_subparsers(dest="theory_command", required=True)
    crossover = theory_sub.add_parser("crossover", help="MRC/EGC-Crossover")
    crossover.add_argument("--amplitudes", type=float, nargs="+", required=True)
    crossover.add_argument("--sigma", type=float, default=1.0)
    crossover.add_argument("--grid", type=float, nargs="+", help="σ_w²-Werte")
    crossover.add_argument("--trials", type=int, default=100_000)
    crossover.add_argument("--seed", type=int, default=0)
    crossover.add_argument("-o", "--output")
    threshold = theory_sub.add_parser("threshold", help="Fixpunkt-Dynamik")
    threshold.add_argument(
        "--kind", default="power", choices=[k.value for k in QualityMapKind if k != QualityMapKind.PIECEWISE_LINEAR],
    )
    threshold.add_argument("--param", action="append", default=[], metavar="NAME=WERT",
                           help="Parameter der Abbildung, z.B. exponent=2")
    threshold.add_argument("--q0", type=float, default=0.5)
    threshold.add_argument("--k-max", type=int, default=12)
    threshold.add_argument("--noise-sd", type=float, default=0.0)
    threshold.add_argument("--no-guard", action="store_true")
    threshold.add_argument("--seed", type=int, default=0)
    threshold.add_argument("-o", "--output")

    export = sub.add_parser("export", help="Tabellen als CSV und JSON exportieren")
    export.add_argument("config")
    export.add_argument("--output-dir")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Hauptfunktion für CLI"""
    init(autoreset=True)
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level, log_file=Path(args.log_file) if args.log_file else None)
    cli = ReliabilityCLI()
    try:
        if args.command == "run":
            cli.run(args.config)
        elif args.command == "evaluate":
            cli.evaluate(args.config, args.output)
        elif args.command == "sweep-lambda":
            cli.sweep_lambda(args.config, args.lambdas, args.output)
        elif args.command == "theory" and args.theory_command == "crossover":
            cli.theory_crossover(
                args.amplitudes, args.sigma, args.grid, args.trials, args.seed, args.output
            )
        elif args.command == "theory":
            cli.theory_threshold(
                args.kind, _params(args.param), args.q0, args.k_max, args.noise_sd,
                not args.no_guard, args.seed, args.output,
            )
        else:
            cli.export(args.config, args.output_dir)
    except ReliabilityError as e:
        print(f"{Fore.RED}Fehler: {e}{Style.RESET_ALL}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
