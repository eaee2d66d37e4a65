"""
實驗執行器
每日迴圈：取得天氣與情境、呼叫演算法選點、模擬一天、更新閾值與移動平均並輸出紀錄
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from building import NIGHT_SETPOINT, simulate_day
from error_handling import ConfigurationError, DomainError, ExperimentDayError
from experiment_config import ExperimentConfig
from gp import MIN_FIT_OBSERVATIONS, GpModel, fit_hyperparameters
from logging_config import get_error_tracker, get_experiment_logger, get_performance_logger
from models import INIT_TEMP_RANGE, Context, ControllerParams, DayOutcome, DayRecord, WeatherDay
from optimizer import (
    STEP_FUNCTIONS, CandidateGrid, TunerState, build_controller_grid, fixed_step, warmup_step,
)
from weather import load_weather_csv, synth_weather

logger = logging.getLogger(__name__)

# evaluator(θ, z, day) -> DayOutcome
DayEvaluator = Callable[[ControllerParams, Context, int], DayOutcome]

BUDGET_MARGIN = 1.05
BUDGET_TARGET = 1.1

HISTORY_WEATHER_OFFSET = 100_000
HISTORY_STREAM = 1
HISTORY_INIT_TEMP_RANGE = (21.0, 24.0)

# ==================== 移動平均與閾值 ====================

def running_average(values: Sequence[float]) -> float:
    """
    算術平均

    Raises:
        DomainError: 空序列
    """
    if len(values) == 0:
        raise DomainError("移動平均需要至少一個數值")
    return math.fsum(values) / len(values)


def active_threshold(day: int, schedule: Sequence[Tuple[int, float]]) -> float:
    """回傳最後一個 start_day ≤ day 的排程段閾值"""
    threshold = schedule[0][1]
    for start_day, value in schedule:
        if start_day > day:
            break
        threshold = value
    return float(threshold)


def carry_over_temp(end_temp: float, day: int) -> float:
    """前一日結束室溫作為隔日初始室溫，超出情境允許範圍時截斷"""
    lo, hi = INIT_TEMP_RANGE
    carried = min(max(end_temp, lo), hi)
    if carried != end_temp:
        logger.warning(f"第 {day} 天結束室溫 {end_temp:.2f} °C 超出 [{lo:g}, {hi:g}]，隔日以 {carried:g} °C 起算")
    return carried


def noise_seed_for(seed: int, day: int) -> int:
    """由實驗種子與日索引衍生當日量測雜訊種子，負的日索引為實驗開始前的歷史日"""
    entropy = [seed, day] if day >= 0 else [seed, -day, HISTORY_STREAM]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def split_outcome(outcome: DayOutcome, formulation: str) -> Tuple[float, float]:
    """依問題形式回傳 (目標, 約束)"""
    if formulation == 'energy_constrained':
        return outcome.discomfort, outcome.energy
    return outcome.energy, outcome.discomfort

# ==================== 建構 ====================

def build_weather(config: ExperimentConfig) -> List[WeatherDay]:
    """依配置取得 n_days 天的天氣"""
    if config.weather.source == 'csv':
        days = load_weather_csv(config.weather.path)
        if len(days) < config.n_days:
            raise ConfigurationError(
                f"天氣檔案只有 {len(days)} 天，少於實驗天數 {config.n_days}",
                field="weather.path", value=config.weather.path
            )
        return days[:config.n_days]
    return synth_weather(config.weather_seed, config.n_days)


def make_simulator_evaluator(config: ExperimentConfig) -> DayEvaluator:
    """以建築模擬器作為每日黑箱評估"""
    room = config.room.to_room_model()
    profile = config.comfort.to_profile()
    noise = config.measurement_noise

    def evaluate(params: ControllerParams, z: Context, day: int) -> DayOutcome:
        return simulate_day(
            params, z, room, profile,
            noise_seed=noise_seed_for(config.seed, day),
            energy_noise_std=noise.energy_std,
            discomfort_noise_std=noise.discomfort_std,
        )

    return evaluate


def build_tuner_state(config: ExperimentConfig) -> TunerState:
    """建立 GP、候選格點與對偶變數初始狀態"""
    grid_settings = config.grid
    grid = build_controller_grid(
        levels=grid_settings.levels,
        kp_bounds=(grid_settings.kp_min, grid_settings.kp_max),
        ki_bounds=(grid_settings.ki_min, grid_settings.ki_max),
        setpoint_bounds=(grid_settings.setpoint_min, grid_settings.setpoint_max),
        start_bounds=(grid_settings.start_min, grid_settings.start_max),
    )

    def make_gp(settings) -> GpModel:
        return GpModel(settings.to_hyper(), settings.noise_variance, settings.prior_mean)

    gp_energy = make_gp(config.gp.energy)
    gp_discomfort = make_gp(config.gp.discomfort)
    if config.formulation == 'energy_constrained':
        gp_obj, gp_con = gp_discomfort, gp_energy
    else:
        gp_obj, gp_con = gp_energy, gp_discomfort

    return TunerState(
        lam=0.0,
        eta=config.optimizer.eta,
        epsilon=config.optimizer.epsilon_for(config.formulation),
        beta_sqrt=config.optimizer.beta_sqrt_for(config.algorithm),
        gp_obj=gp_obj,
        gp_con=gp_con,
        threshold=active_threshold(0, config.threshold_schedule),
        grid=grid,
    )


def _fit_models(state: TunerState, config: ExperimentConfig) -> None:
    half_width = config.gp.fit_log_range
    for name, model in (('objective', state.gp_obj), ('constraint', state.gp_con)):
        bounds = [(v - half_width, v + half_width) for v in model.hyper.to_log_vector()]
        model.set_hyper(fit_hyperparameters(model, bounds, levels=config.gp.fit_levels))
        logger.info(f"{name} GP 超參數已更新: σ²={model.hyper.signal_variance:.4g}")

# ==================== 歷史運轉資料 ====================

def collect_history(config: ExperimentConfig, grid: CandidateGrid,
                    evaluator: DayEvaluator) -> List[Tuple[ControllerParams, Context, DayOutcome]]:
    """
    產生實驗開始前的歷史運轉資料

    歷史日使用另一段合成天氣（種子偏移 HISTORY_WEATHER_OFFSET）、格點上隨機抽取的控制器參數
    與 21-24 °C 之間隨機的初始室溫。日索引為 -n..-1，不寫入每日紀錄。
    """
    n_days = config.gp.history_days
    if n_days == 0:
        return []
    rng = np.random.default_rng([config.seed, HISTORY_STREAM])
    history = []
    for i, w in enumerate(synth_weather(config.weather_seed + HISTORY_WEATHER_OFFSET, n_days)):
        params = grid.points[int(rng.integers(len(grid)))]
        z = Context(w.ambient_mean, w.irradiation_mean, float(rng.uniform(*HISTORY_INIT_TEMP_RANGE)))
        history.append((params, z, evaluator(params, z, i - n_days)))
    return history


def prime_with_history(state: TunerState, config: ExperimentConfig, evaluator: DayEvaluator) -> int:
    """
    以歷史運轉資料填入兩個 GP，資料足夠時依此擬合超參數

    Returns:
        int: 加入的歷史日數
    """
    history = collect_history(config, state.grid, evaluator)
    for params, z, outcome in history:
        objective, constraint = split_outcome(outcome, config.formulation)
        state.record_observation(params, z, objective, constraint)
    if len(history) >= MIN_FIT_OBSERVATIONS:
        _fit_models(state, config)
    logger.info(f"已加入 {len(history)} 天歷史運轉資料")
    return len(history)

# ==================== 實驗迴圈 ====================

def run_experiment(config: ExperimentConfig, evaluator: Optional[DayEvaluator] = None,
                   weather: Optional[Sequence[WeatherDay]] = None,
                   experiment_id: Optional[str] = None) -> List[DayRecord]:
    """
    執行整個多日實驗

    Args:
        config: 實驗配置
        evaluator: 每日評估函數，預設為建築模擬器（測試可替換為解析函數）
        weather: 預先準備的天氣序列，預設依配置產生
        experiment_id: 日誌用識別碼

    Returns:
        List[DayRecord]: 每天一筆紀錄

    Raises:
        ExperimentDayError: 任一天失敗，附帶失敗的日索引
    """
    experiment_id = experiment_id or f"{config.algorithm}-{config.formulation}-seed{config.seed}"
    experiment_logger = get_experiment_logger()
    performance_logger = get_performance_logger()

    weather = list(weather) if weather is not None else build_weather(config)
    if len(weather) < config.n_days:
        raise ConfigurationError(f"天氣資料只有 {len(weather)} 天，少於實驗天數 {config.n_days}",
                                 field="weather")
    evaluator = evaluator or make_simulator_evaluator(config)
    fixed_params = config.fixed_params.to_params()
    state = None if config.algorithm == 'fixed' else build_tuner_state(config)
    if state is not None:
        prime_with_history(state, config, evaluator)

    experiment_logger.log_experiment_start(experiment_id, config.algorithm, config.formulation,
                                           config.n_days, config.seed)
    started = time.perf_counter()

    records: List[DayRecord] = []
    segment_energy: List[float] = []
    segment_discomfort: List[float] = []
    init_temp = NIGHT_SETPOINT
    threshold = active_threshold(0, config.threshold_schedule)

    for day in range(config.n_days):
        try:
            new_threshold = active_threshold(day, config.threshold_schedule)
            if new_threshold != threshold:
                experiment_logger.log_threshold_change(experiment_id, day, threshold, new_threshold)
                threshold = new_threshold
                segment_energy, segment_discomfort = [], []
                if state is not None:
                    state.lam = 0.0
            if state is not None:
                state.threshold = threshold

            w = weather[day]
            z = Context(w.ambient_mean, w.irradiation_mean, init_temp)
            outcomes: List[DayOutcome] = []

            def observe(params, context):
                outcome = evaluator(params, context, day)
                outcomes.append(outcome)
                return split_outcome(outcome, config.formulation)

            lam = state.lam if state is not None else 0.0
            step_started = time.perf_counter()
            if state is None:
                params = fixed_params
                fixed_step(params, z, observe)
            elif day < config.warmup_days:
                params, state = warmup_step(state, fixed_params, z, observe)
            else:
                params, state = STEP_FUNCTIONS[config.algorithm](state, z, observe)
            performance_logger.log_step_timing(experiment_id, day, config.algorithm,
                                               time.perf_counter() - step_started)

            if state is not None and config.gp.fit_after_days and day + 1 == config.gp.fit_after_days:
                _fit_models(state, config)
        except Exception as exc:
            experiment_logger.log_experiment_error(experiment_id, day, exc,
                                                   getattr(exc, 'error_code', None))
            raise ExperimentDayError(day, exc) from exc

        outcome = outcomes[-1]
        segment_energy.append(outcome.energy)
        segment_discomfort.append(outcome.discomfort)
        record = DayRecord(
            day=day,
            context=z,
            params=params,
            energy=outcome.energy,
            discomfort=outcome.discomfort,
            lam=lam,
            active_threshold=threshold,
            running_avg_energy=running_average(segment_energy),
            running_avg_discomfort=running_average(segment_discomfort),
            end_temp=outcome.end_temp,
        )
        records.append(record)
        objective, constraint = split_outcome(outcome, config.formulation)
        experiment_logger.log_day(experiment_id, day, config.algorithm, params.to_dict(),
                                  objective, constraint, lam)
        init_temp = carry_over_temp(outcome.end_temp, day)

    summary = summarize(records, config.formulation)
    experiment_logger.log_experiment_complete(experiment_id, config.algorithm,
                                              time.perf_counter() - started, summary.to_dict())
    return records

# ==================== 摘要 ====================

@dataclass
class SegmentSummary:
    """單一閾值排程段的統計"""

    start_day: int
    n_days: int
    threshold: float
    avg_energy: float
    avg_discomfort: float
    violation_percentage: Optional[float]


@dataclass
class ExperimentSummary:
    """整個實驗的摘要"""

    formulation: str
    n_days: int
    final_avg_energy: float
    final_avg_discomfort: float
    violation_percentage: Optional[float]
    violation_day_fraction: float
    total_objective: float
    mean_objective: float
    segments: List[SegmentSummary] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def violation_percentage(average: float, threshold: float) -> Optional[float]:
    """(平均 − 閾值) / 閾值 × 100；閾值為 0 時無定義"""
    if threshold == 0:
        return None
    return (average - threshold) / threshold * 100.0


def summarize(records: Sequence[DayRecord],
              formulation: str = 'discomfort_constrained') -> ExperimentSummary:
    """
    彙整實驗紀錄

    排程段以 active_threshold 的變化切分；違反百分比以約束量（依問題形式為不舒適度或能耗）
    的段平均計算。

    Raises:
        DomainError: 紀錄為空
    """
    if not records:
        raise DomainError("無法彙整空的實驗紀錄")

    segments: List[SegmentSummary] = []
    start = 0
    for i in range(1, len(records) + 1):
        if i < len(records) and records[i].active_threshold == records[start].active_threshold:
            continue
        chunk = records[start:i]
        avg_energy = running_average([r.energy for r in chunk])
        avg_discomfort = running_average([r.discomfort for r in chunk])
        threshold = chunk[0].active_threshold
        constrained = avg_energy if formulation == 'energy_constrained' else avg_discomfort
        segments.append(SegmentSummary(
            start_day=chunk[0].day,
            n_days=len(chunk),
            threshold=threshold,
            avg_energy=avg_energy,
            avg_discomfort=avg_discomfort,
            violation_percentage=violation_percentage(constrained, threshold),
        ))
        start = i

    energy_constrained = formulation == 'energy_constrained'
    objectives = [r.discomfort if energy_constrained else r.energy for r in records]
    violations = sum(
        1 for r in records
        if (r.energy if energy_constrained else r.discomfort) > r.active_threshold
    )
    final = segments[-1]

    return ExperimentSummary(
        formulation=formulation,
        n_days=len(records),
        final_avg_energy=final.avg_energy,
        final_avg_discomfort=final.avg_discomfort,
        violation_percentage=final.violation_percentage,
        violation_day_fraction=violations / len(records),
        total_objective=math.fsum(objectives),
        mean_objective=running_average(objectives),
        segments=segments,
    )

# ==================== 能耗預算可行性 ====================

def budget_rescale_factor(config: ExperimentConfig, budgets: Sequence[float],
                          weather: Optional[Sequence[WeatherDay]] = None) -> float:
    """
    檢查能耗預算是否可行

    以格點的最小加熱角落點（最小增益、最低設定溫度、最晚開始）作為固定控制器跑同樣的天氣；
    若任一預算低於其平均能耗的 1.05 倍，回傳讓最小預算成為該平均能耗 1.1 倍的縮放係數，否則回傳 1.0。

    基準不是「全天最大加熱」控制器：後者的能耗是格點上限而非下限，幾乎任何預算都會低於它。
    """
    if not budgets:
        raise DomainError("預算清單不能為空")
    baseline_config = config.model_copy(update={
        'algorithm': 'fixed',
        'fixed_params': config.fixed_params.model_copy(update=config.grid.min_heating_params().to_dict()),
    })
    records = run_experiment(baseline_config, weather=weather,
                             experiment_id=f"budget-baseline-seed{config.seed}")
    baseline = running_average([r.energy for r in records])
    smallest = min(budgets)
    if smallest >= BUDGET_MARGIN * baseline:
        return 1.0

    factor = BUDGET_TARGET * baseline / smallest
    get_error_tracker().track_warning(
        f"最小能耗預算 {smallest} 低於基準 {baseline:.3f} kWh 的 {BUDGET_MARGIN} 倍，所有預算乘以 {factor:.4f}",
        {'baseline_energy': baseline, 'smallest_budget': smallest, 'factor': factor},
        'BUDGET_RESCALED'
    )
    return factor
