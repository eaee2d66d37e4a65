"""
參數掃描執行器
在演算法 × 閾值的笛卡兒積上平行執行獨立實驗（行程池，每格狀態與種子互相隔離）
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from config import get_config
from error_handling import ConfigurationError, format_error
from experiment_config import ExperimentConfig, with_overrides
from logging_config import get_error_tracker, get_performance_logger

logger = logging.getLogger(__name__)


@dataclass
class SweepCell:
    """單一掃描格：一組演算法與閾值的完整實驗"""

    name: str
    algorithm: str
    requested_threshold: float
    config: ExperimentConfig
    out_dir: str
    budget_rescale_factor: float = 1.0


@dataclass
class SweepStats:
    """掃描統計資料"""
    total_cells: int = 0
    successful_cells: int = 0
    failed_cells: int = 0
    total_time: float = 0.0

    def update_success(self, duration: float):
        """更新成功統計"""
        self.successful_cells += 1
        self.total_cells += 1
        self.total_time += duration

    def update_failure(self, duration: float):
        """更新失敗統計"""
        self.failed_cells += 1
        self.total_cells += 1
        self.total_time += duration

    def get_success_rate(self) -> float:
        """獲取成功率"""
        return (self.successful_cells / self.total_cells * 100) if self.total_cells > 0 else 0


@dataclass
class SweepResult:
    """掃描結果：每格摘要與失敗訊息"""

    summaries: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)
    stats: SweepStats = field(default_factory=SweepStats)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            'cells': dict(sorted(self.summaries.items())),
            'failures': dict(sorted(self.failures.items())),
            'stats': {**asdict(self.stats), 'success_rate': self.stats.get_success_rate()},
        }


def cell_name(algorithm: str, threshold: float) -> str:
    """格目錄名稱，例如 pdcbo_thr10"""
    return f"{algorithm}_thr{threshold:g}"


def build_cells(config: ExperimentConfig, algorithms: Sequence[str], thresholds: Sequence[float],
                out_dir: Path, budget_rescale_factor: float = 1.0) -> List[SweepCell]:
    """
    建立演算法 × 閾值的掃描格

    每格使用單段閾值排程；能耗預算需要縮放時，實際閾值為要求值乘以縮放係數，
    目錄名稱仍使用要求值。
    """
    if not algorithms or not thresholds:
        raise ConfigurationError("掃描需要至少一個演算法與一個閾值", field="sweep")

    cells = []
    for algorithm in algorithms:
        for threshold in thresholds:
            name = cell_name(algorithm, threshold)
            cell_config = with_overrides(
                config,
                algorithm=algorithm,
                threshold_schedule=[(0, float(threshold) * budget_rescale_factor)],
            )
            cells.append(SweepCell(
                name=name,
                algorithm=algorithm,
                requested_threshold=float(threshold),
                config=cell_config,
                out_dir=str(Path(out_dir) / name),
                budget_rescale_factor=budget_rescale_factor,
            ))

    names = [cell.name for cell in cells]
    if len(set(names)) != len(names):
        raise ConfigurationError("掃描格名稱重複（演算法或閾值重複）", field="sweep", value=names)
    return cells


class SweepRunner:
    """掃描執行器"""

    def __init__(self, cell_runner: Callable[[SweepCell], Dict[str, Any]],
                 jobs: Optional[int] = None):
        """
        初始化掃描執行器

        Args:
            cell_runner: 執行單格並回傳摘要的模組層級函數（需可被 pickle）
            jobs: 平行行程數，預設取自 PDCBO_TUNE_JOBS
        """
        self.cell_runner = cell_runner
        self.jobs = jobs if jobs is not None else get_config().runtime.jobs
        if self.jobs < 1:
            raise ConfigurationError("平行數至少為 1", field="jobs", value=self.jobs)
        self.performance_logger = get_performance_logger()
        self.error_tracker = get_error_tracker()

    def run(self, cells: Sequence[SweepCell]) -> SweepResult:
        """執行所有掃描格；單格失敗不會中斷其他格"""
        result = SweepResult()
        workers = min(self.jobs, len(cells))
        logger.info(f"開始掃描 {len(cells)} 格，平行數 {workers}")

        if workers <= 1:
            for cell in cells:
                started = time.perf_counter()
                try:
                    summary = self.cell_runner(cell)
                except Exception as exc:
                    self._record_failure(result, cell, exc, time.perf_counter() - started)
                else:
                    self._record_success(result, cell, summary, time.perf_counter() - started)
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                started = time.perf_counter()
                futures = {executor.submit(self.cell_runner, cell): cell for cell in cells}
                for future in as_completed(futures):
                    cell = futures[future]
                    try:
                        summary = future.result()
                    except Exception as exc:
                        self._record_failure(result, cell, exc, time.perf_counter() - started)
                    else:
                        self._record_success(result, cell, summary, time.perf_counter() - started)

        self.performance_logger.log_process_metrics("sweep")
        logger.info(
            f"掃描完成: 成功 {result.stats.successful_cells}，失敗 {result.stats.failed_cells}"
        )
        return result

    def _record_success(self, result: SweepResult, cell: SweepCell, summary: Dict[str, Any],
                        duration: float):
        result.summaries[cell.name] = summary
        result.stats.update_success(duration)
        self.performance_logger.log_sweep_cell(cell.name, duration, True)

    def _record_failure(self, result: SweepResult, cell: SweepCell, error: Exception,
                        duration: float):
        result.failures[cell.name] = format_error(error)
        result.stats.update_failure(duration)
        self.performance_logger.log_sweep_cell(cell.name, duration, False)
        self.error_tracker.track_error(error, {'cell': cell.name, 'out_dir': cell.out_dir})
