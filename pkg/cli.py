"""
命令列介面
run / sweep / validate-config / gen-weather 四個子命令，輸出 records.csv 與 summary.json

結束代碼：0 成功、1 執行期或 I/O 失敗、2 用法或配置錯誤
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from config import get_config
from error_handling import (
    EXIT_RUNTIME_ERROR, EXIT_SUCCESS, EXIT_USAGE_ERROR, OutputWriteError, TunerException,
    UsageError, exit_code_for, format_error,
)
from experiment_config import (
    ALGORITHMS, FORMULATIONS, ExperimentConfig, load_experiment_config, with_overrides,
)
from harness import budget_rescale_factor, run_experiment, summarize
from logging_config import get_error_tracker, setup_logging
from models import DayRecord
from sweep_runner import SweepCell, SweepRunner, build_cells
from weather import synth_weather, write_weather_csv

logger = logging.getLogger(__name__)

RECORD_COLUMNS = (
    'day', 'ambient_c', 'irradiation_wm2', 'init_temp_c', 'kp', 'ki', 'day_setpoint_c',
    'heat_start_min', 'energy_kwh', 'discomfort_kh', 'lambda', 'threshold',
    'avg_energy_kwh', 'avg_discomfort_kh',
)
DEFAULT_SWEEP_ALGORITHMS = ('pdcbo', 'safeopt', 'cei')


@dataclass
class CliArgs:
    """解析後的命令列參數"""

    command: str
    config_path: Optional[str] = None
    algorithm: Optional[str] = None
    formulation: Optional[str] = None
    days: Optional[int] = None
    threshold: Optional[float] = None
    seed: Optional[int] = None
    weather_path: Optional[str] = None
    out_dir: Optional[str] = None
    jobs: Optional[int] = None
    algorithms: Optional[List[str]] = None
    thresholds: Optional[List[float]] = None

# ==================== 參數解析 ====================

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"必須為正整數: {text}")
    return value


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', dest='config_path', required=True, help='實驗配置 JSON 檔')
    parser.add_argument('--formulation', choices=FORMULATIONS, help='問題形式')
    parser.add_argument('--days', type=_positive_int, help='模擬天數')
    parser.add_argument('--seed', type=int, help='亂數種子')
    parser.add_argument('--weather', dest='weather_path', help='天氣 CSV 檔')
    parser.add_argument('--out', dest='out_dir', help='輸出目錄')


def build_parser() -> argparse.ArgumentParser:
    """建立命令列解析器"""
    parser = argparse.ArgumentParser(
        prog='pdcbo-tune',
        description='以情境式約束貝氏最佳化調校建築 PI 加熱控制器'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', help='執行單一實驗')
    _add_override_flags(run_parser)
    run_parser.add_argument('--algo', dest='algorithm', choices=ALGORITHMS, help='演算法')
    run_parser.add_argument('--threshold', type=float, help='單一閾值（取代排程）')

    sweep_parser = subparsers.add_parser('sweep', help='演算法 × 閾值掃描')
    _add_override_flags(sweep_parser)
    sweep_parser.add_argument('--algos', dest='algorithms', nargs='+', choices=ALGORITHMS,
                              help='要掃描的演算法')
    sweep_parser.add_argument('--thresholds', nargs='+', type=float, help='要掃描的閾值')
    sweep_parser.add_argument('--jobs', type=_positive_int, help='平行行程數')

    validate_parser = subparsers.add_parser('validate-config', help='只檢查配置檔')
    validate_parser.add_argument('--config', dest='config_path', required=True)

    weather_parser = subparsers.add_parser('gen-weather', help='產生合成天氣 CSV')
    weather_parser.add_argument('--seed', type=int, default=0)
    weather_parser.add_argument('--days', type=_positive_int, default=300)
    weather_parser.add_argument('--out', dest='out_dir', default='weather.csv', help='輸出 CSV 路徑')

    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> CliArgs:
    """
    解析命令列參數

    沒有任何參數時印出說明並以代碼 2 結束；未知旗標或無效選項由 argparse 以代碼 2 結束。
    """
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_help(sys.stderr)
        raise SystemExit(EXIT_USAGE_ERROR)

    namespace = parser.parse_args(argv)
    return CliArgs(**{
        name: getattr(namespace, name)
        for name in CliArgs.__dataclass_fields__
        if hasattr(namespace, name)
    })

# ==================== 輸出 ====================

def format_number(value: Any) -> str:
    """整數原樣輸出，浮點數使用最短可還原表示"""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return repr(float(value))


def record_to_row(record: DayRecord) -> List[str]:
    values = (
        record.day,
        record.context.ambient_temp, record.context.irradiation, record.context.init_temp,
        record.params.kp, record.params.ki, record.params.day_setpoint, record.params.heat_start,
        record.energy, record.discomfort, record.lam, record.active_threshold,
        record.running_avg_energy, record.running_avg_discomfort,
    )
    return [format_number(v) for v in values]


def write_records_csv(records: Sequence[DayRecord], path: Path) -> Path:
    """寫出 records.csv（欄位順序固定）"""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', encoding='utf-8', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(RECORD_COLUMNS)
            for record in records:
                writer.writerow(record_to_row(record))
    except OSError as exc:
        raise OutputWriteError(str(path), exc.strerror or str(exc)) from exc
    return path


def write_json(data: Dict[str, Any], path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + '\n',
                        encoding='utf-8')
    except OSError as exc:
        raise OutputWriteError(str(path), exc.strerror or str(exc)) from exc
    return path


def run_to_directory(config: ExperimentConfig, out_dir: Path,
                     rescale_factor: float = 1.0) -> Dict[str, Any]:
    """執行實驗並寫出 records.csv 與 summary.json，回傳摘要"""
    records = run_experiment(config)
    summary = {
        **summarize(records, config.formulation).to_dict(),
        'algorithm': config.algorithm,
        'seed': config.seed,
        'threshold_schedule': [list(segment) for segment in config.threshold_schedule],
        'budget_rescale_factor': rescale_factor,
    }
    write_records_csv(records, out_dir / 'records.csv')
    write_json(summary, out_dir / 'summary.json')
    return summary


def run_cell(cell: SweepCell) -> Dict[str, Any]:
    """掃描單格（在工作行程中執行）"""
    summary = run_to_directory(cell.config, Path(cell.out_dir), cell.budget_rescale_factor)
    summary['requested_threshold'] = cell.requested_threshold
    return summary

# ==================== 子命令 ====================

def _load_config(args: CliArgs) -> ExperimentConfig:
    config = load_experiment_config(args.config_path)
    schedule = None
    if args.threshold is not None:
        if 'threshold_schedule' in config.model_fields_set:
            raise UsageError("--threshold 不能與配置檔中的 threshold_schedule 同時使用")
        schedule = [(0, args.threshold)]
    return with_overrides(
        config,
        algorithm=args.algorithm,
        formulation=args.formulation,
        n_days=args.days,
        seed=args.seed,
        threshold_schedule=schedule,
        weather_path=args.weather_path,
    )


def _rescale_factor(config: ExperimentConfig, budgets: Sequence[float]) -> float:
    if config.formulation != 'energy_constrained' or not config.rescale_infeasible_budgets:
        return 1.0
    return budget_rescale_factor(config, budgets)


def _output_dir(args: CliArgs) -> Path:
    return Path(args.out_dir or get_config().runtime.output_dir)


def _cmd_run(args: CliArgs) -> int:
    config = _load_config(args)
    factor = _rescale_factor(config, [threshold for _, threshold in config.threshold_schedule])
    if factor != 1.0:
        config = with_overrides(config, threshold_schedule=[
            (start, threshold * factor) for start, threshold in config.threshold_schedule
        ])

    out_dir = _output_dir(args)
    summary = run_to_directory(config, out_dir, factor)
    print(f"完成 {summary['n_days']} 天: 平均能耗 {summary['final_avg_energy']:.3f} kWh, "
          f"平均不舒適度 {summary['final_avg_discomfort']:.3f} K·h -> {out_dir}")
    return EXIT_SUCCESS


def _cmd_sweep(args: CliArgs) -> int:
    config = _load_config(args)
    algorithms = args.algorithms or list(DEFAULT_SWEEP_ALGORITHMS)
    thresholds = args.thresholds or sorted({threshold for _, threshold in config.threshold_schedule})
    factor = _rescale_factor(config, thresholds)

    out_dir = _output_dir(args)
    cells = build_cells(config, algorithms, thresholds, out_dir, factor)
    result = SweepRunner(run_cell, jobs=args.jobs).run(cells)
    write_json({**result.to_dict(), 'budget_rescale_factor': factor},
               out_dir / 'sweep_summary.json')

    print(f"掃描完成: {result.stats.successful_cells}/{len(cells)} 格成功 -> {out_dir}")
    for name, message in sorted(result.failures.items()):
        print(f"{name}: {message}", file=sys.stderr)
    return EXIT_SUCCESS if result.ok else EXIT_RUNTIME_ERROR


def _cmd_validate_config(args: CliArgs) -> int:
    config = load_experiment_config(args.config_path)
    print(config.to_json())
    return EXIT_SUCCESS


def _cmd_gen_weather(args: CliArgs) -> int:
    path = Path(args.out_dir)
    days = synth_weather(args.seed, args.days)
    try:
        write_weather_csv(days, path)
    except OSError as exc:
        raise OutputWriteError(str(path), exc.strerror or str(exc)) from exc
    print(f"已寫出 {len(days)} 天合成天氣 -> {path}")
    return EXIT_SUCCESS


_COMMANDS = {
    'run': _cmd_run,
    'sweep': _cmd_sweep,
    'validate-config': _cmd_validate_config,
    'gen-weather': _cmd_gen_weather,
}


def execute(args: CliArgs) -> int:
    """
    執行子命令

    Returns:
        int: 結束代碼
    """
    try:
        return _COMMANDS[args.command](args)
    except TunerException as exc:
        get_error_tracker().track_error(exc, {'command': args.command}, exc.error_code)
        print(format_error(exc), file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        get_error_tracker().track_error(exc, {'command': args.command}, 'IO_ERROR')
        print(f"[IO_ERROR] {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return exit_code_for(exc)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    setup_logging()
    return execute(args)


if __name__ == "__main__":
    sys.exit(main())
