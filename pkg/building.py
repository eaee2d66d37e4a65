"""
建築熱模擬器
1R1C 房間模型搭配 PI 加熱控制，模擬一整天並回傳加權能耗與不舒適度
"""

import logging
import math
from typing import Tuple

import numpy as np

from error_handling import SimulationDivergedError
from models import (
    MINUTES_PER_DAY, ComfortProfile, Context, ControllerParams, DayOutcome, PiState, RoomModel,
)

logger = logging.getLogger(__name__)

NIGHT_SETPOINT = 22.5
DAY_SETPOINT_END = 1080
AMBIENT_SWING = 3.0           # °C，日內外氣溫振幅
AMBIENT_PEAK_MINUTE = 900     # 15:00
SUNRISE_MINUTE = 420
SUNSET_MINUTE = 1020


def setpoint_at(t: float, params: ControllerParams) -> float:
    """t ∈ [heat_start, 18:00) 使用日間設定溫度，其餘時間為夜間 22.5 °C"""
    if params.heat_start <= t < DAY_SETPOINT_END:
        return params.day_setpoint
    return NIGHT_SETPOINT


def pi_control(error: float, state: PiState, kp: float, ki: float,
               timestep_hours: float = 0.25, integral_clamp: float = 10.0) -> Tuple[float, PiState]:
    """
    PI 控制律

    積分項先以 error·Δt 推進並截斷在 ±integral_clamp，再計算 u = clamp(kp·e + ki·I, 0, 1)。

    Returns:
        Tuple[float, PiState]: 控制量 u ∈ [0, 1] 與新的積分狀態
    """
    integral = min(max(state.integral + error * timestep_hours, -integral_clamp), integral_clamp)
    u = min(max(kp * error + ki * integral, 0.0), 1.0)
    return u, PiState(integral)


def thermal_step(temp: float, u: float, ambient: float, irradiation: float,
                 model: RoomModel) -> float:
    """顯式 Euler：T' = T + (Δt/C)·(u·P_max − G·(T − T_amb) + a·I)"""
    heat_flow = (
        u * model.max_heat_power
        - model.envelope_conductance * (temp - ambient)
        + model.solar_gain_coeff * irradiation
    )
    return temp + model.timestep_hours / model.thermal_capacitance * heat_flow


def discomfort_instant(temp: float, t: float, profile: ComfortProfile) -> float:
    """室溫偏離舒適區間的距離（°C）"""
    lo, hi = profile.band_at(t)
    if temp > hi:
        return temp - hi
    if temp < lo:
        return lo - temp
    return 0.0


def tariff_weight(t: float, profile: ComfortProfile) -> float:
    """日間時段的電價權重（預設 2.0），其餘為 1.0"""
    return profile.day_tariff if profile.is_daytime(t) else 1.0


def forcing_at(t: float, z: Context, model: RoomModel) -> Tuple[float, float]:
    """
    時間 t 的外氣溫度與日照量

    未開啟日內變化時維持日平均值；開啟時外氣溫度為正弦變化（15:00 最高），
    日照為日出到日落之間的半正弦，兩者日平均值與情境一致。
    """
    if not model.intraday_modulation:
        return z.ambient_temp, z.irradiation

    phase = 2 * math.pi * (t - AMBIENT_PEAK_MINUTE) / MINUTES_PER_DAY
    ambient = z.ambient_temp + AMBIENT_SWING * math.cos(phase)

    if SUNRISE_MINUTE <= t < SUNSET_MINUTE:
        daylight = SUNSET_MINUTE - SUNRISE_MINUTE
        peak = z.irradiation * MINUTES_PER_DAY * math.pi / (2 * daylight)
        irradiation = peak * math.sin(math.pi * (t - SUNRISE_MINUTE) / daylight)
    else:
        irradiation = 0.0
    return ambient, irradiation


def simulate_day(params: ControllerParams, z: Context, model: RoomModel,
                 profile: ComfortProfile, noise_seed: int = 0,
                 energy_noise_std: float = 0.0, discomfort_noise_std: float = 0.0) -> DayOutcome:
    """
    模擬一天（00:00 到 24:00）的閉迴路運轉

    能耗與不舒適度以每步開始時的狀態做左端點累加；量測雜訊為可選項，
    以 noise_seed 決定亂數，相同輸入必得相同輸出。

    Args:
        params: PI 控制器參數
        z: 當日情境
        model: 房間熱模型
        profile: 舒適區間與電價時段
        noise_seed: 雜訊亂數種子
        energy_noise_std: 能耗量測雜訊標準差（kWh）
        discomfort_noise_std: 不舒適度量測雜訊標準差（K·h）

    Returns:
        DayOutcome: 模擬結果

    Raises:
        SimulationDivergedError: 室溫出現非有限值
    """
    n_steps = model.steps_per_day
    dt_hours = model.timestep_hours

    temps = np.empty(n_steps)
    controls = np.empty(n_steps)
    powers = np.empty(n_steps)

    temp = z.init_temp
    pi_state = PiState()
    energy = 0.0
    discomfort = 0.0

    for step in range(n_steps):
        t = step * model.timestep
        temps[step] = temp

        u, pi_state = pi_control(setpoint_at(t, params) - temp, pi_state, params.kp, params.ki,
                                 dt_hours, model.integral_clamp)
        power = u * model.max_heat_power
        controls[step] = u
        powers[step] = power

        energy += tariff_weight(t, profile) * power * dt_hours
        discomfort += discomfort_instant(temp, t, profile) * dt_hours

        ambient, irradiation = forcing_at(t, z, model)
        temp = thermal_step(temp, u, ambient, irradiation, model)
        if not math.isfinite(temp):
            raise SimulationDivergedError(step, temp)

    if energy_noise_std > 0 or discomfort_noise_std > 0:
        rng = np.random.default_rng(noise_seed)
        # 量測值不能為負
        energy = max(0.0, energy + float(rng.normal(0.0, energy_noise_std)))
        discomfort = max(0.0, discomfort + float(rng.normal(0.0, discomfort_noise_std)))

    return DayOutcome(
        energy=float(energy),
        discomfort=float(discomfort),
        temp_trace=temps,
        power_trace=powers,
        control_trace=controls,
        end_temp=float(temp),
    )
