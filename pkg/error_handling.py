"""
錯誤處理模組
定義錯誤代碼、例外類別階層，以及例外與 CLI 結束代碼的對應
"""

import logging
from datetime import datetime
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

# ==================== 結束代碼定義 ====================

EXIT_SUCCESS = 0
EXIT_RUNTIME_ERROR = 1
EXIT_USAGE_ERROR = 2

# ==================== 錯誤代碼定義 ====================

class ErrorCodes:
    """系統錯誤代碼定義"""

    # 通用錯誤
    INTERNAL_ERROR = "INTERNAL_ERROR"
    DOMAIN_ERROR = "DOMAIN_ERROR"

    # 配置相關錯誤
    CONFIGURATION_ERROR = "CONFIGURATION_ERROR"
    USAGE_ERROR = "USAGE_ERROR"

    # 數值計算錯誤
    INPUT_SHAPE_ERROR = "INPUT_SHAPE_ERROR"
    FACTORIZATION_ERROR = "FACTORIZATION_ERROR"
    SIMULATION_DIVERGED = "SIMULATION_DIVERGED"

    # 天氣資料錯誤
    WEATHER_SCHEMA_ERROR = "WEATHER_SCHEMA_ERROR"
    WEATHER_PARSE_ERROR = "WEATHER_PARSE_ERROR"
    WEATHER_VALIDATION_ERROR = "WEATHER_VALIDATION_ERROR"
    EMPTY_INPUT = "EMPTY_INPUT"

    # 實驗執行錯誤
    EXPERIMENT_DAY_FAILED = "EXPERIMENT_DAY_FAILED"
    OUTPUT_WRITE_FAILED = "OUTPUT_WRITE_FAILED"

# ==================== 自訂例外類別 ====================

class TunerException(Exception):
    """控制器調校工具的例外基礎類別"""

    exit_code: int = EXIT_RUNTIME_ERROR

    def __init__(
        self,
        detail: str,
        error_code: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None
    ):
        super().__init__(detail)
        self.detail = detail
        self.error_code = error_code or ErrorCodes.INTERNAL_ERROR
        self.context = context or {}
        self.timestamp = datetime.now().isoformat()

    def to_dict(self) -> Dict[str, Any]:
        """轉換為字典格式"""
        return {
            'error_code': self.error_code,
            'detail': self.detail,
            'context': self.context,
            'timestamp': self.timestamp,
        }


class ConfigurationError(TunerException):
    """配置錯誤（實驗設定或參數範圍無效）"""

    exit_code = EXIT_USAGE_ERROR

    def __init__(self, detail: str, field: Optional[str] = None, value: Any = None):
        context = {}
        if field:
            context['field'] = field
        if value is not None:
            context['invalid_value'] = str(value)
        super().__init__(detail, ErrorCodes.CONFIGURATION_ERROR, context)


class UsageError(TunerException):
    """命令列用法錯誤"""

    exit_code = EXIT_USAGE_ERROR

    def __init__(self, detail: str):
        super().__init__(detail, ErrorCodes.USAGE_ERROR)


class InputShapeError(TunerException):
    """輸入維度不符"""

    def __init__(self, expected: int, actual: int, what: str = "input"):
        super().__init__(
            f"{what} 維度不符: 預期 {expected}，實際 {actual}",
            ErrorCodes.INPUT_SHAPE_ERROR,
            {'expected': expected, 'actual': actual, 'what': what}
        )


class FactorizationError(TunerException):
    """Gram 矩陣分解失敗"""

    def __init__(self, n_observations: int, reason: str = ""):
        detail = f"Gram 矩陣 Cholesky 分解失敗 (n={n_observations})"
        if reason:
            detail += f" - {reason}"
        super().__init__(detail, ErrorCodes.FACTORIZATION_ERROR, {'n_observations': n_observations})


class SimulationDivergedError(TunerException):
    """閉迴路模擬發散（狀態出現 NaN 或無窮大）"""

    def __init__(self, step: int, value: float):
        super().__init__(
            f"模擬在第 {step} 步發散: T={value}",
            ErrorCodes.SIMULATION_DIVERGED,
            {'step': step, 'value': str(value)}
        )


class WeatherSchemaError(TunerException):
    """天氣 CSV 欄位結構錯誤"""

    def __init__(self, detail: str, row: int, path: Optional[str] = None):
        context: Dict[str, Any] = {'row': row}
        if path:
            context['path'] = path
        super().__init__(f"第 {row} 列: {detail}", ErrorCodes.WEATHER_SCHEMA_ERROR, context)


class WeatherParseError(TunerException):
    """天氣 CSV 數值解析錯誤"""

    def __init__(self, row: int, column: str, value: str):
        super().__init__(
            f"第 {row} 列欄位 {column} 無法解析為數值: {value!r}",
            ErrorCodes.WEATHER_PARSE_ERROR,
            {'row': row, 'column': column, 'invalid_value': value}
        )


class WeatherValidationError(TunerException):
    """天氣資料違反不變式（例如負的日照量）"""

    def __init__(self, row: int, column: str, value: float, reason: str):
        super().__init__(
            f"第 {row} 列欄位 {column}={value}: {reason}",
            ErrorCodes.WEATHER_VALIDATION_ERROR,
            {'row': row, 'column': column, 'invalid_value': str(value)}
        )


class EmptyInputError(TunerException):
    """輸入資料為空"""

    def __init__(self, what: str):
        super().__init__(f"{what} 沒有任何資料", ErrorCodes.EMPTY_INPUT, {'what': what})


class DomainError(TunerException):
    """函數輸入超出定義域"""

    def __init__(self, detail: str):
        super().__init__(detail, ErrorCodes.DOMAIN_ERROR)


class ExperimentDayError(TunerException):
    """實驗在某一天失敗，附帶失敗的日索引"""

    def __init__(self, day: int, cause: Exception):
        detail = f"實驗在第 {day} 天失敗: {cause}"
        context: Dict[str, Any] = {'day': day, 'cause_type': type(cause).__name__}
        if isinstance(cause, TunerException):
            context['cause_code'] = cause.error_code
        super().__init__(detail, ErrorCodes.EXPERIMENT_DAY_FAILED, context)
        self.day = day
        self.cause = cause
        # 用法或配置錯誤維持原本的結束代碼
        self.exit_code = getattr(cause, 'exit_code', EXIT_RUNTIME_ERROR)


class OutputWriteError(TunerException):
    """輸出檔案寫入失敗"""

    def __init__(self, path: str, reason: str):
        super().__init__(
            f"無法寫入 {path}: {reason}",
            ErrorCodes.OUTPUT_WRITE_FAILED,
            {'path': path}
        )

# ==================== 結束代碼對應 ====================

def exit_code_for(error: BaseException) -> int:
    """
    將例外對應到 CLI 結束代碼

    Args:
        error: 例外物件

    Returns:
        int: 0 成功、1 執行期或 I/O 失敗、2 用法或配置錯誤
    """
    if isinstance(error, TunerException):
        return error.exit_code
    return EXIT_RUNTIME_ERROR


def format_error(error: BaseException) -> str:
    """取得給使用者閱讀的錯誤訊息"""
    if isinstance(error, TunerException):
        return f"[{error.error_code}] {error.detail}"
    return f"[{ErrorCodes.INTERNAL_ERROR}] {type(error).__name__}: {error}"
