"""
實驗配置
以 pydantic 模型描述單一實驗（演算法、問題形式、閾值排程、房間模型、GP 與格點等），
從 JSON 文件載入並驗證
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from error_handling import ConfigurationError
from gp import MIN_FIT_OBSERVATIONS, SeKernelHyper
from models import (
    HEAT_START_RANGE, SETPOINT_RANGE, ComfortProfile, ControllerParams, RoomModel,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ('pdcbo', 'safeopt', 'cei', 'fixed')
FORMULATIONS = ('discomfort_constrained', 'energy_constrained')

# GP 輸入維度：log kp, log ki, 日間設定溫度, 開始時間, 外氣溫度, 日照量, 初始室溫
INPUT_DIM = 7
CONTEXT_LENGTHSCALES = [8.0, 150.0, 2.0]
# 模擬器沒有量測雜訊時，雜訊變異數取訊號變異數的 1e-4 倍
NOISE_RATIO = 1e-4
# 未指定 ε 時依問題形式取用：不舒適度約束 K·h，能耗約束 kWh
DEFAULT_EPSILON = {'discomfort_constrained': 3.0, 'energy_constrained': 0.0}


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')

# ==================== 物理模型 ====================

class RoomSettings(_Section):
    """房間熱模型參數"""

    thermal_capacitance: float = Field(3.0, gt=0)
    envelope_conductance: float = Field(0.02, gt=0)
    solar_gain_coeff: float = Field(0.002, gt=0)
    max_heat_power: float = Field(2.0, gt=0)
    timestep_minutes: int = Field(15, gt=0)
    integral_clamp: float = Field(10.0, gt=0)
    intraday_modulation: bool = False

    @field_validator('timestep_minutes')
    @classmethod
    def validate_timestep(cls, v):
        if 1440 % v != 0:
            raise ValueError('時間步長必須整除 1440 分鐘')
        return v

    @model_validator(mode='after')
    def validate_stability(self):
        if self.timestep_minutes / 60.0 * self.envelope_conductance / self.thermal_capacitance >= 1.0:
            raise ValueError('Δt·G/C 必須小於 1（顯式 Euler 穩定性）')
        return self

    def to_room_model(self) -> RoomModel:
        return RoomModel(
            thermal_capacitance=self.thermal_capacitance,
            envelope_conductance=self.envelope_conductance,
            solar_gain_coeff=self.solar_gain_coeff,
            max_heat_power=self.max_heat_power,
            timestep=self.timestep_minutes,
            integral_clamp=self.integral_clamp,
            intraday_modulation=self.intraday_modulation,
        )


class ComfortSettings(_Section):
    """舒適區間與電價時段"""

    night_lo: float = 21.0
    night_hi: float = 24.0
    day_lo: float = 23.0
    day_hi: float = 24.0
    day_begin: int = Field(480, ge=0, le=1440)
    day_end: int = Field(1080, ge=0, le=1440)
    day_tariff: float = Field(2.0, gt=0)

    @model_validator(mode='after')
    def validate_bands(self):
        if not (self.night_lo < self.night_hi and self.day_lo < self.day_hi):
            raise ValueError('舒適區間下限必須小於上限')
        if self.day_begin >= self.day_end:
            raise ValueError('day_begin 必須小於 day_end')
        return self

    def to_profile(self) -> ComfortProfile:
        return ComfortProfile(**self.model_dump())

# ==================== GP 與最佳化 ====================

class KernelSettings(_Section):
    """單一 GP 的 SE 核函數超參數"""

    signal_variance: float = Field(gt=0)
    lengthscales: List[float]
    noise_variance: Optional[float] = Field(None, ge=0)
    prior_mean: Optional[float] = None

    @field_validator('lengthscales')
    @classmethod
    def validate_lengthscales(cls, v):
        if len(v) != INPUT_DIM:
            raise ValueError(f'長度尺度必須有 {INPUT_DIM} 個')
        if any(not scale > 0 for scale in v):
            raise ValueError('長度尺度必須為正數')
        return v

    def to_hyper(self) -> SeKernelHyper:
        return SeKernelHyper(self.signal_variance, tuple(self.lengthscales))


def _energy_kernel() -> KernelSettings:
    return KernelSettings(signal_variance=56.7, noise_variance=NOISE_RATIO * 56.7,
                          lengthscales=[5.9, 3.1, 2.7, 1290.6] + CONTEXT_LENGTHSCALES)


def _discomfort_kernel() -> KernelSettings:
    return KernelSettings(signal_variance=546.1, noise_variance=NOISE_RATIO * 546.1,
                          lengthscales=[6.0, 8.8, 5.2, 1188.0] + CONTEXT_LENGTHSCALES)


class GpSettings(_Section):
    """能耗與不舒適度兩個 GP 的設定"""

    energy: KernelSettings = Field(default_factory=_energy_kernel)
    discomfort: KernelSettings = Field(default_factory=_discomfort_kernel)
    history_days: int = Field(30, ge=0)
    fit_after_days: int = Field(0, ge=0)
    fit_levels: int = Field(5, ge=2)
    fit_log_range: float = Field(1.0, gt=0)

    @field_validator('history_days', 'fit_after_days')
    @classmethod
    def validate_fit_days(cls, v, info):
        if 0 < v < MIN_FIT_OBSERVATIONS:
            raise ValueError(f'{info.field_name} 必須為 0（停用）或至少 {MIN_FIT_OBSERVATIONS}')
        return v


class OptimizerSettings(_Section):
    """演算法常數"""

    eta: float = Field(1.0, gt=0)
    # None 表示依問題形式取 DEFAULT_EPSILON
    epsilon: Optional[float] = Field(None, ge=0)
    beta_sqrt: float = Field(1.0, gt=0)
    safeopt_beta_sqrt: float = Field(3.0, gt=0)

    def epsilon_for(self, formulation: str) -> float:
        """實際使用的悲觀項 ε（單位同約束：K·h 或 kWh）"""
        if self.epsilon is not None:
            return self.epsilon
        return DEFAULT_EPSILON[formulation]

    def beta_sqrt_for(self, algorithm: str) -> float:
        return self.safeopt_beta_sqrt if algorithm == 'safeopt' else self.beta_sqrt


class GridSettings(_Section):
    """控制器參數候選格點"""

    levels: Union[int, Tuple[int, int, int, int]] = 6
    kp_min: float = Field(0.05, gt=0)
    kp_max: float = Field(5.0, gt=0)
    ki_min: float = Field(0.01, gt=0)
    ki_max: float = Field(2.0, gt=0)
    setpoint_min: float = SETPOINT_RANGE[0]
    setpoint_max: float = SETPOINT_RANGE[1]
    start_min: float = HEAT_START_RANGE[0]
    start_max: float = HEAT_START_RANGE[1]

    @field_validator('levels')
    @classmethod
    def validate_levels(cls, v):
        values = (v,) if isinstance(v, int) else v
        if any(n < 1 for n in values):
            raise ValueError('每維格點數至少為 1')
        return v

    @model_validator(mode='after')
    def validate_bounds(self):
        if self.kp_min > self.kp_max or self.ki_min > self.ki_max:
            raise ValueError('增益範圍下限不能大於上限')
        lo, hi = SETPOINT_RANGE
        if not lo <= self.setpoint_min <= self.setpoint_max <= hi:
            raise ValueError(f'設定溫度範圍必須在 [{lo}, {hi}] 之內')
        lo, hi = HEAT_START_RANGE
        if not lo <= self.start_min <= self.start_max <= hi:
            raise ValueError(f'加熱開始時間範圍必須在 [{lo:g}, {hi:g}] 之內')
        return self

    def min_heating_params(self) -> ControllerParams:
        """最弱增益、最低設定溫度、最晚開始的角落點"""
        return ControllerParams(self.kp_min, self.ki_min, self.setpoint_min, self.start_max)

# ==================== 天氣與控制器 ====================

class WeatherSettings(_Section):
    """天氣來源"""

    source: Literal['synthetic', 'csv'] = 'synthetic'
    path: Optional[str] = None
    seed: Optional[int] = None

    @model_validator(mode='after')
    def validate_source(self):
        if self.source == 'csv' and not self.path:
            raise ValueError('CSV 天氣來源需要指定 path')
        return self


class ParamsSettings(_Section):
    """固定控制器（也用於暖機天）"""

    kp: float = Field(1.0, gt=0)
    ki: float = Field(0.1, gt=0)
    day_setpoint: float = Field(23.5, ge=SETPOINT_RANGE[0], le=SETPOINT_RANGE[1])
    heat_start: float = Field(360.0, ge=HEAT_START_RANGE[0], le=HEAT_START_RANGE[1])

    def to_params(self) -> ControllerParams:
        return ControllerParams(self.kp, self.ki, self.day_setpoint, self.heat_start)


class NoiseSettings(_Section):
    """量測雜訊標準差"""

    energy_std: float = Field(0.0, ge=0)
    discomfort_std: float = Field(0.0, ge=0)

# ==================== 實驗 ====================

class ExperimentConfig(_Section):
    """單一實驗的完整配置"""

    algorithm: Literal['pdcbo', 'safeopt', 'cei', 'fixed'] = 'pdcbo'
    formulation: Literal['discomfort_constrained', 'energy_constrained'] = 'discomfort_constrained'
    n_days: int = Field(300, ge=1)
    threshold_schedule: List[Tuple[int, float]] = Field(default_factory=lambda: [(0, 10.0)])
    seed: int = Field(0, ge=0)
    warmup_days: int = Field(1, ge=0)
    rescale_infeasible_budgets: bool = True
    room: RoomSettings = Field(default_factory=RoomSettings)
    comfort: ComfortSettings = Field(default_factory=ComfortSettings)
    gp: GpSettings = Field(default_factory=GpSettings)
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    grid: GridSettings = Field(default_factory=GridSettings)
    weather: WeatherSettings = Field(default_factory=WeatherSettings)
    fixed_params: ParamsSettings = Field(default_factory=ParamsSettings)
    measurement_noise: NoiseSettings = Field(default_factory=NoiseSettings)

    @field_validator('threshold_schedule')
    @classmethod
    def validate_schedule(cls, v):
        if not v:
            raise ValueError('閾值排程不能為空')
        if v[0][0] != 0:
            raise ValueError('閾值排程的第一段必須從第 0 天開始')
        starts = [start for start, _ in v]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError('閾值排程的開始日必須嚴格遞增')
        if any(not threshold > 0 for _, threshold in v):
            raise ValueError('閾值必須為正數')
        return v

    @property
    def weather_seed(self) -> int:
        return self.seed if self.weather.seed is None else self.weather.seed

    def to_json(self) -> str:
        """正規化後的 JSON 文件"""
        return json.dumps(self.model_dump(mode='json'), ensure_ascii=False, indent=2, sort_keys=True)


def _configuration_error(exc: ValidationError) -> ConfigurationError:
    first = exc.errors()[0]
    location = '.'.join(str(part) for part in first.get('loc', ()))
    return ConfigurationError(
        f"實驗配置驗證失敗 ({exc.error_count()} 項): {location}: {first.get('msg')}",
        field=location or None,
        value=first.get('input')
    )


def parse_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    """
    從字典建立 ExperimentConfig

    Raises:
        ConfigurationError: 驗證失敗
    """
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise _configuration_error(exc) from exc


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    從 JSON 檔案載入實驗配置

    Raises:
        ConfigurationError: JSON 格式錯誤或驗證失敗
        OSError: 檔案無法讀取
    """
    path = Path(path)
    text = path.read_text(encoding='utf-8')
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"配置檔 {path} 不是有效的 JSON: {exc.msg} (第 {exc.lineno} 行)",
                                 field="config") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"配置檔 {path} 必須是 JSON 物件", field="config")

    config = parse_experiment_config(data)
    logger.info(f"已載入實驗配置: {path}")
    return config


def with_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """套用覆寫值（None 表示不覆寫）並重新驗證"""
    data = config.model_dump()
    for key, value in overrides.items():
        if value is None:
            continue
        if key == 'weather_path':
            data['weather'] = {**data['weather'], 'source': 'csv', 'path': str(value)}
        else:
            data[key] = value
    return parse_experiment_config(data)
