"""
資料模型定義
包含控制器參數、每日情境、房間熱模型、舒適區間與每日結果等資料結構
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from error_handling import ConfigurationError, DomainError

MINUTES_PER_DAY = 1440

# ==================== 控制器參數 ====================

SETPOINT_RANGE = (20.0, 26.0)
HEAT_START_RANGE = (0.0, 540.0)


@dataclass(frozen=True)
class ControllerParams:
    """PI 控制器的四維調校向量 θ"""

    kp: float
    ki: float
    day_setpoint: float
    heat_start: float

    def __post_init__(self):
        if not (self.kp >= 0 and self.ki >= 0):
            raise ConfigurationError("PI 增益不能為負數", field="kp/ki", value=(self.kp, self.ki))
        lo, hi = SETPOINT_RANGE
        if not lo <= self.day_setpoint <= hi:
            raise ConfigurationError(
                f"日間設定溫度必須在 {lo}-{hi} °C 之間", field="day_setpoint", value=self.day_setpoint
            )
        lo, hi = HEAT_START_RANGE
        if not lo <= self.heat_start <= hi:
            raise ConfigurationError(
                f"加熱開始時間必須在 {lo:g}-{hi:g} 分鐘之間", field="heat_start", value=self.heat_start
            )

    def to_features(self) -> np.ndarray:
        """GP 輸入：增益取對數，設定溫度與開始時間維持原單位"""
        return np.array([math.log(self.kp), math.log(self.ki), self.day_setpoint, self.heat_start])

    def to_dict(self) -> Dict[str, float]:
        """轉換為字典格式"""
        return asdict(self)

# ==================== 每日情境與天氣 ====================

# 外氣溫度、日照量、初始室溫
CONTEXT_DIM = 3
INIT_TEMP_RANGE = (5.0, 35.0)


@dataclass(frozen=True)
class Context:
    """每日情境變數 z_n"""

    ambient_temp: float
    irradiation: float
    init_temp: float

    def __post_init__(self):
        if not self.irradiation >= 0:
            raise DomainError(f"日照量不能為負數: {self.irradiation}")
        if not -30.0 <= self.ambient_temp <= 45.0:
            raise DomainError(f"外氣溫度超出範圍 [-30, 45] °C: {self.ambient_temp}")
        lo, hi = INIT_TEMP_RANGE
        if not lo <= self.init_temp <= hi:
            raise DomainError(f"初始室溫超出範圍 [{lo:g}, {hi:g}] °C: {self.init_temp}")

    def to_features(self) -> np.ndarray:
        return np.array([self.ambient_temp, self.irradiation, self.init_temp])

    def to_dict(self) -> Dict[str, float]:
        """轉換為字典格式"""
        return asdict(self)


@dataclass(frozen=True)
class WeatherDay:
    """單日天氣（完美預報的日平均值）"""

    day_index: int
    ambient_mean: float
    irradiation_mean: float

    def __post_init__(self):
        if not self.irradiation_mean >= 0:
            raise DomainError(f"日照量不能為負數: {self.irradiation_mean}")

# ==================== 房間與舒適區間 ====================

@dataclass(frozen=True)
class RoomModel:
    """單電阻單電容 (1R1C) 房間熱模型"""

    thermal_capacitance: float = 3.0    # kWh/°C
    envelope_conductance: float = 0.02  # kW/°C
    solar_gain_coeff: float = 0.002     # kW per W/m²
    max_heat_power: float = 2.0         # kW
    timestep: int = 15                  # 分鐘
    integral_clamp: float = 10.0        # °C·h
    intraday_modulation: bool = False

    def __post_init__(self):
        for name in ('thermal_capacitance', 'envelope_conductance', 'solar_gain_coeff',
                     'max_heat_power', 'integral_clamp'):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} 必須大於 0", field=name, value=getattr(self, name))
        if self.timestep <= 0 or MINUTES_PER_DAY % self.timestep != 0:
            raise ConfigurationError("時間步長必須整除 1440 分鐘", field="timestep", value=self.timestep)
        # 顯式 Euler 穩定條件
        if self.timestep_hours * self.envelope_conductance / self.thermal_capacitance >= 1.0:
            raise ConfigurationError(
                "Δt·G/C 必須小於 1（顯式 Euler 穩定性）", field="timestep", value=self.timestep
            )

    @property
    def timestep_hours(self) -> float:
        return self.timestep / 60.0

    @property
    def steps_per_day(self) -> int:
        return MINUTES_PER_DAY // self.timestep


@dataclass(frozen=True)
class ComfortProfile:
    """時變舒適溫度區間與電價時段"""

    night_lo: float = 21.0
    night_hi: float = 24.0
    day_lo: float = 23.0
    day_hi: float = 24.0
    day_begin: int = 480
    day_end: int = 1080
    day_tariff: float = 2.0

    def __post_init__(self):
        if not (self.night_lo < self.night_hi and self.day_lo < self.day_hi):
            raise ConfigurationError("舒適區間下限必須小於上限", field="comfort_band")
        if not 0 <= self.day_begin < self.day_end <= MINUTES_PER_DAY:
            raise ConfigurationError(
                "日間時段必須滿足 0 ≤ day_begin < day_end ≤ 1440",
                field="day_begin/day_end", value=(self.day_begin, self.day_end)
            )
        if not self.day_tariff > 0:
            raise ConfigurationError("日間電價權重必須大於 0", field="day_tariff", value=self.day_tariff)

    def is_daytime(self, t: float) -> bool:
        return self.day_begin <= t < self.day_end

    def band_at(self, t: float) -> Tuple[float, float]:
        """取得時間 t（分鐘）的舒適區間 [T_min, T_max]"""
        if self.is_daytime(t):
            return self.day_lo, self.day_hi
        return self.night_lo, self.night_hi

# ==================== 模擬結果 ====================

@dataclass(frozen=True)
class PiState:
    """PI 控制器積分狀態（°C·h）"""

    integral: float = 0.0


@dataclass
class DayOutcome:
    """單日閉迴路模擬結果"""

    energy: float            # kWh（依電價加權）
    discomfort: float        # K·h
    temp_trace: np.ndarray   # 每步開始時的室溫
    power_trace: np.ndarray  # 每步加熱功率 kW
    control_trace: np.ndarray
    end_temp: float


@dataclass
class DayRecord:
    """實驗中單日的輸出紀錄"""

    day: int
    context: Context
    params: ControllerParams
    energy: float
    discomfort: float
    lam: float
    active_threshold: float
    running_avg_energy: float
    running_avg_discomfort: float
    end_temp: float = field(default=float('nan'))

    def to_dict(self) -> Dict[str, Any]:
        """轉換為字典格式"""
        data = asdict(self)
        data['context'] = self.context.to_dict()
        data['params'] = self.params.to_dict()
        return data
