"""
配置管理模組
處理環境變數（與 .env 檔案）提供的執行期設定
"""

import os
import logging
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import psutil
from dotenv import load_dotenv

logger = logging.getLogger(__name__)


@dataclass
class RuntimeConfig:
    """執行期配置"""
    jobs: int = 1
    output_dir: str = "results"


@dataclass
class LoggingConfig:
    """日誌配置"""
    log_level: str = "INFO"
    log_file_path: str = "logs/pdcbo_tune.log"
    log_max_size_mb: int = 50
    log_backup_count: int = 5
    enable_structured_logging: bool = True


@dataclass
class DevelopmentConfig:
    """開發和除錯配置"""
    development_mode: bool = False


class ConfigManager:
    """配置管理器"""

    def __init__(self, env_file: Optional[str] = None):
        # .env 不存在時 load_dotenv 不做任何事
        load_dotenv(env_file, override=False)

        self.runtime = self._load_runtime_config()
        self.logging = self._load_logging_config()
        self.development = self._load_development_config()

        self._validate_config()

    def _get_env_bool(self, key: str, default: bool = False) -> bool:
        """獲取布林型環境變數"""
        value = os.environ.get(key, str(default)).lower()
        return value in ('true', '1', 'yes', 'on')

    def _get_env_int(self, key: str, default: int) -> int:
        """獲取整數型環境變數"""
        try:
            return int(os.environ.get(key, str(default)))
        except ValueError:
            logger.warning(f"無效的整數環境變數 {key}，使用預設值 {default}")
            return default

    @staticmethod
    def _default_jobs() -> int:
        """預設平行數：實體 CPU 核心數"""
        return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1

    def _load_runtime_config(self) -> RuntimeConfig:
        """載入執行期配置"""
        return RuntimeConfig(
            jobs=self._get_env_int("PDCBO_TUNE_JOBS", self._default_jobs()),
            output_dir=os.environ.get("PDCBO_TUNE_OUTPUT_DIR", "results")
        )

    def _load_logging_config(self) -> LoggingConfig:
        """載入日誌配置"""
        return LoggingConfig(
            log_level=os.environ.get("LOG_LEVEL", "INFO").upper(),
            log_file_path=os.environ.get("LOG_FILE_PATH", "logs/pdcbo_tune.log"),
            log_max_size_mb=self._get_env_int("LOG_MAX_SIZE_MB", 50),
            log_backup_count=self._get_env_int("LOG_BACKUP_COUNT", 5),
            enable_structured_logging=self._get_env_bool("ENABLE_STRUCTURED_LOGGING", True)
        )

    def _load_development_config(self) -> DevelopmentConfig:
        """載入開發配置"""
        return DevelopmentConfig(
            development_mode=self._get_env_bool("DEVELOPMENT_MODE", False)
        )

    def _validate_config(self):
        """驗證配置的有效性"""
        if self.runtime.jobs < 1:
            logger.warning(f"無效的平行數: {self.runtime.jobs}，將使用 1")
            self.runtime.jobs = 1

        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if self.logging.log_level not in valid_levels:
            logger.warning(f"未知的日誌級別: {self.logging.log_level}，將使用 INFO")
            self.logging.log_level = "INFO"

    def ensure_log_directory(self):
        """建立日誌目錄"""
        parent = Path(self.logging.log_file_path).parent
        if str(parent):
            parent.mkdir(parents=True, exist_ok=True)

    def to_dict(self) -> dict:
        """將配置轉換為字典格式"""
        return {
            'runtime': asdict(self.runtime),
            'logging': asdict(self.logging),
            'development': asdict(self.development),
        }


_config: Optional[ConfigManager] = None


def get_config() -> ConfigManager:
    """獲取配置管理器實例"""
    global _config
    if _config is None:
        _config = ConfigManager()
    return _config


def reset_config() -> None:
    """清除快取的配置（測試用）"""
    global _config
    _config = None
