"""
日誌配置模組
為實驗迴圈、效能量測和錯誤追蹤提供結構化日誌
"""

import json
import logging
import logging.handlers
import sys
from datetime import datetime
from typing import Any, Dict, Optional

import psutil

from config import get_config


_STRUCTURED_FIELDS = (
    'event_type', 'experiment_id', 'day', 'algorithm',
    'duration', 'error_code', 'metadata',
)


class StructuredFormatter(logging.Formatter):
    """結構化日誌格式化器（每行一個 JSON 物件）"""

    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'module': record.name,
            'message': record.getMessage(),
            'line': record.lineno,
            'function': record.funcName
        }

        for field_name in _STRUCTURED_FIELDS:
            if hasattr(record, field_name):
                log_data[field_name] = getattr(record, field_name)

        if record.exc_info:
            log_data['exception'] = self.formatException(record.exc_info)

        return json.dumps(log_data, ensure_ascii=False, separators=(',', ':'), default=str)


class ExperimentLogger:
    """實驗迴圈專用日誌器"""

    def __init__(self, name: str = "pdcbo_tune.experiment"):
        self.logger = logging.getLogger(name)

    def log_experiment_start(self, experiment_id: str, algorithm: str, formulation: str,
                             n_days: int, seed: int):
        """記錄實驗開始"""
        self.logger.info(
            f"開始實驗 {experiment_id}: {algorithm} / {formulation}，共 {n_days} 天",
            extra={
                'event_type': 'experiment_start',
                'experiment_id': experiment_id,
                'algorithm': algorithm,
                'metadata': {'formulation': formulation, 'n_days': n_days, 'seed': seed}
            }
        )

    def log_day(self, experiment_id: str, day: int, algorithm: str, params: Dict[str, float],
                objective: float, constraint: float, lam: float):
        """記錄單日結果"""
        self.logger.debug(
            f"第 {day} 天: 目標={objective:.3f}, 約束={constraint:.3f}, λ={lam:.3f}",
            extra={
                'event_type': 'experiment_day',
                'experiment_id': experiment_id,
                'day': day,
                'algorithm': algorithm,
                'metadata': {'params': params, 'objective': objective,
                             'constraint': constraint, 'lambda': lam}
            }
        )

    def log_threshold_change(self, experiment_id: str, day: int, old: float, new: float):
        """記錄閾值變更（λ 與移動平均重設）"""
        self.logger.info(
            f"第 {day} 天閾值由 {old} 變更為 {new}，重設 λ 與移動平均",
            extra={
                'event_type': 'threshold_change',
                'experiment_id': experiment_id,
                'day': day,
                'metadata': {'old_threshold': old, 'new_threshold': new}
            }
        )

    def log_experiment_complete(self, experiment_id: str, algorithm: str, duration: float,
                                summary: Dict[str, Any]):
        """記錄實驗完成"""
        self.logger.info(
            f"實驗 {experiment_id} 完成，總耗時: {duration:.2f}秒",
            extra={
                'event_type': 'experiment_complete',
                'experiment_id': experiment_id,
                'algorithm': algorithm,
                'duration': duration,
                'metadata': summary
            }
        )

    def log_experiment_error(self, experiment_id: str, day: int, error: Exception,
                             error_code: Optional[str] = None):
        """記錄實驗錯誤"""
        self.logger.error(
            f"實驗 {experiment_id} 在第 {day} 天失敗: {error}",
            extra={
                'event_type': 'experiment_error',
                'experiment_id': experiment_id,
                'day': day,
                'error_code': error_code or 'EXPERIMENT_DAY_FAILED',
                'metadata': {'error_type': type(error).__name__}
            },
            exc_info=True
        )


class PerformanceLogger:
    """效能監控日誌器"""

    def __init__(self, name: str = "pdcbo_tune.performance"):
        self.logger = logging.getLogger(name)

    def log_step_timing(self, experiment_id: str, day: int, algorithm: str, duration: float):
        """記錄單步選點耗時"""
        self.logger.debug(
            f"{algorithm} 第 {day} 天選點耗時 {duration * 1000:.1f}ms",
            extra={
                'event_type': 'step_timing',
                'experiment_id': experiment_id,
                'day': day,
                'algorithm': algorithm,
                'duration': duration
            }
        )

    def log_sweep_cell(self, cell_name: str, duration: float, success: bool):
        """記錄掃描格點完成"""
        self.logger.info(
            f"掃描格點 {cell_name} {'完成' if success else '失敗'} - {duration:.2f}s",
            extra={
                'event_type': 'sweep_cell',
                'duration': duration,
                'metadata': {'cell': cell_name, 'success': success}
            }
        )

    def log_process_metrics(self, context: str):
        """記錄目前程序的記憶體與 CPU 使用量"""
        process = psutil.Process()
        rss_mb = process.memory_info().rss / 1024 ** 2
        cpu_percent = process.cpu_percent(interval=None)
        self.logger.info(
            f"程序指標 ({context}) - 記憶體: {rss_mb:.1f}MB, CPU: {cpu_percent:.1f}%",
            extra={
                'event_type': 'process_metrics',
                'metadata': {'context': context, 'rss_mb': rss_mb, 'cpu_percent': cpu_percent}
            }
        )


class ErrorTracker:
    """錯誤追蹤器"""

    def __init__(self, name: str = "pdcbo_tune.errors"):
        self.logger = logging.getLogger(name)

    def track_error(self, error: Exception, context: Optional[Dict[str, Any]] = None,
                    error_code: Optional[str] = None):
        """追蹤錯誤"""
        self.logger.error(
            f"錯誤發生: {error}",
            extra={
                'event_type': 'error_occurred',
                'error_code': error_code or getattr(error, 'error_code', 'UNKNOWN_ERROR'),
                'metadata': {
                    'error_type': type(error).__name__,
                    'context': context or {}
                }
            },
            exc_info=True
        )

    def track_warning(self, message: str, context: Optional[Dict[str, Any]] = None,
                      warning_code: Optional[str] = None):
        """追蹤警告"""
        self.logger.warning(
            message,
            extra={
                'event_type': 'warning_occurred',
                'error_code': warning_code or 'WARNING',
                'metadata': context or {}
            }
        )


def setup_logging(console: bool = True):
    """設定全域日誌配置"""
    config = get_config()
    config.ensure_log_directory()

    root_logger = logging.getLogger()
    level = logging.DEBUG if config.development.development_mode else config.logging.log_level
    root_logger.setLevel(level)

    # 避免重複添加處理器
    if not root_logger.handlers:
        main_handler = logging.handlers.RotatingFileHandler(
            filename=config.logging.log_file_path,
            maxBytes=config.logging.log_max_size_mb * 1024 * 1024,
            backupCount=config.logging.log_backup_count,
            encoding='utf-8'
        )

        if config.logging.enable_structured_logging:
            main_handler.setFormatter(StructuredFormatter())
        else:
            main_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            ))
        root_logger.addHandler(main_handler)

        if console:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            ))
            console_handler.setLevel(logging.DEBUG if config.development.development_mode else logging.WARNING)
            root_logger.addHandler(console_handler)


_experiment_logger: Optional[ExperimentLogger] = None
_performance_logger: Optional[PerformanceLogger] = None
_error_tracker: Optional[ErrorTracker] = None


def get_experiment_logger() -> ExperimentLogger:
    """獲取實驗日誌器"""
    global _experiment_logger
    if _experiment_logger is None:
        _experiment_logger = ExperimentLogger()
    return _experiment_logger


def get_performance_logger() -> PerformanceLogger:
    """獲取效能日誌器"""
    global _performance_logger
    if _performance_logger is None:
        _performance_logger = PerformanceLogger()
    return _performance_logger


def get_error_tracker() -> ErrorTracker:
    """獲取錯誤追蹤器"""
    global _error_tracker
    if _error_tracker is None:
        _error_tracker = ErrorTracker()
    return _error_tracker
