"""
情境式約束貝氏最佳化
原始-對偶 (PDCBO) 選點與對偶更新，以及 SafeOPT、CEI、固定控制器等基準方法
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, List, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm

from error_handling import ConfigurationError, EmptyInputError, InputShapeError
from gp import GpModel
from models import CONTEXT_DIM, ControllerParams

logger = logging.getLogger(__name__)

# observe(θ, z) -> (目標值, 約束值)
Observe = Callable[[Any, Any], Tuple[float, float]]


def as_features(obj) -> np.ndarray:
    """將參數或情境轉為 GP 輸入特徵"""
    if hasattr(obj, 'to_features'):
        return np.asarray(obj.to_features(), dtype=float)
    return np.asarray(obj, dtype=float).ravel()

# ==================== 候選格點 ====================

@dataclass
class CandidateGrid:
    """有限候選集合：points 為參數物件，features 為對應的 GP 輸入列"""

    points: List[Any]
    features: np.ndarray

    def __post_init__(self):
        if not self.points:
            raise EmptyInputError("候選格點")
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        if self.features.shape[0] != len(self.points):
            raise InputShapeError(len(self.points), self.features.shape[0], "grid features")

    @classmethod
    def from_points(cls, points: Sequence[Any]) -> 'CandidateGrid':
        points = list(points)
        if not points:
            raise EmptyInputError("候選格點")
        return cls(points, np.vstack([as_features(p) for p in points]))

    def __len__(self) -> int:
        return len(self.points)

    def joint_inputs(self, z) -> np.ndarray:
        """每個候選點與情境 z 串接後的 (m, d) 輸入"""
        context = as_features(z)
        return np.hstack([self.features, np.tile(context, (len(self.points), 1))])


def build_controller_grid(levels: Union[int, Sequence[int]] = 6,
                          kp_bounds: Tuple[float, float] = (0.05, 5.0),
                          ki_bounds: Tuple[float, float] = (0.01, 2.0),
                          setpoint_bounds: Tuple[float, float] = (20.0, 26.0),
                          start_bounds: Tuple[float, float] = (0.0, 540.0)) -> CandidateGrid:
    """
    建立 PI 控制器參數格點

    增益在對數尺度上等距，設定溫度與開始時間在線性尺度上等距。
    預設每維 6 點，共 1296 個候選。
    """
    if isinstance(levels, int):
        levels = (levels,) * 4
    if len(levels) != 4 or any(n < 1 for n in levels):
        raise ConfigurationError("格點數必須為 4 個正整數", field="levels", value=levels)
    for name, (lo, hi) in (('kp', kp_bounds), ('ki', ki_bounds)):
        if not 0 < lo <= hi:
            raise ConfigurationError(f"{name} 範圍必須為正且遞增", field=name, value=(lo, hi))

    kp_axis = np.geomspace(*kp_bounds, levels[0])
    ki_axis = np.geomspace(*ki_bounds, levels[1])
    sp_axis = np.linspace(*setpoint_bounds, levels[2])
    start_axis = np.linspace(*start_bounds, levels[3])

    points = [
        ControllerParams(float(kp), float(ki), float(sp), float(start))
        for kp, ki, sp, start in itertools.product(kp_axis, ki_axis, sp_axis, start_axis)
    ]
    return CandidateGrid.from_points(points)

# ==================== 調校狀態 ====================

@dataclass
class TunerState:
    """演算法在兩天之間保存的狀態"""

    lam: float
    eta: float
    epsilon: float
    beta_sqrt: float
    gp_obj: GpModel
    gp_con: GpModel
    threshold: float
    grid: CandidateGrid
    context_dim: int = CONTEXT_DIM

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError("對偶變數不能為負數", field="lam", value=self.lam)
        if not self.eta > 0:
            raise ConfigurationError("對偶步長必須大於 0", field="eta", value=self.eta)
        if self.epsilon < 0:
            raise ConfigurationError("悲觀項 ε 不能為負數", field="epsilon", value=self.epsilon)
        if self.beta_sqrt < 0:
            raise ConfigurationError("信賴係數 β 不能為負數", field="beta_sqrt", value=self.beta_sqrt)
        expected = self.grid.features.shape[1] + self.context_dim
        for name, model in (('gp_obj', self.gp_obj), ('gp_con', self.gp_con)):
            if model.dim != expected:
                raise InputShapeError(expected, model.dim, name)

    def record_observation(self, theta, z, objective: float, constraint: float) -> None:
        """兩個 GP 同步加入 (θ, z) 的觀測"""
        x = np.concatenate([as_features(theta), as_features(z)])
        self.gp_obj.add_observation(x, objective)
        self.gp_con.add_observation(x, constraint)

# ==================== 信賴界 ====================

def _grid_posterior(model: GpModel, grid: CandidateGrid, z) -> Tuple[np.ndarray, np.ndarray]:
    mean, variance = model.predict(grid.joint_inputs(z))
    return mean, np.sqrt(variance)


def lcb(model: GpModel, theta, z, beta_sqrt: float) -> float:
    """下信賴界 μ(θ, z) - β·σ(θ, z)"""
    if beta_sqrt < 0:
        raise ConfigurationError("信賴係數 β 不能為負數", field="beta_sqrt", value=beta_sqrt)
    posterior = model.posterior(np.concatenate([as_features(theta), as_features(z)]))
    return posterior.mean - beta_sqrt * posterior.std


def _lagrangian_lcb(state: TunerState, z) -> Tuple[np.ndarray, np.ndarray]:
    mean_obj, std_obj = _grid_posterior(state.gp_obj, state.grid, z)
    mean_con, std_con = _grid_posterior(state.gp_con, state.grid, z)
    lcb_obj = mean_obj - state.beta_sqrt * std_obj
    lcb_con = mean_con - state.beta_sqrt * std_con
    return lcb_obj + state.lam * lcb_con, lcb_con

# ==================== PDCBO ====================

def primal_update(state: TunerState, z):
    """在格點上最小化樂觀拉格朗日函數 LCB_f + λ·LCB_g，平手時取第一個"""
    lagrangian, _ = _lagrangian_lcb(state, z)
    return state.grid.points[int(np.argmin(lagrangian))]


def dual_update(lam: float, g_lcb: float, threshold: float, eta: float, epsilon: float) -> float:
    """λ ← max(0, λ + η·(g_lcb − c) + ε)"""
    return max(0.0, lam + eta * (g_lcb - threshold) + epsilon)


def pdcbo_step(state: TunerState, z, observe: Observe):
    """
    執行一天的 PDCBO

    先選點並計算所選點的約束下信賴界，再呼叫 observe。observe 失敗時例外直接傳出，
    狀態不做任何修改；成功時以選點當下的下信賴界更新 λ，之後才把觀測加入兩個 GP。

    Returns:
        Tuple[θ, TunerState]
    """
    lagrangian, lcb_con = _lagrangian_lcb(state, z)
    index = int(np.argmin(lagrangian))
    theta = state.grid.points[index]
    g_lcb = float(lcb_con[index])

    objective, constraint = observe(theta, z)

    state.lam = dual_update(state.lam, g_lcb, state.threshold, state.eta, state.epsilon)
    state.record_observation(theta, z, objective, constraint)
    return theta, state

# ==================== 基準方法 ====================

def safeopt_step(state: TunerState, z, observe: Observe):
    """
    安全集合內最小化目標下信賴界

    安全集合為約束上信賴界不超過閾值的候選點；集合為空時改選約束上信賴界最小者。
    """
    mean_con, std_con = _grid_posterior(state.gp_con, state.grid, z)
    ucb_con = mean_con + state.beta_sqrt * std_con
    safe = ucb_con <= state.threshold

    if safe.any():
        mean_obj, std_obj = _grid_posterior(state.gp_obj, state.grid, z)
        lcb_obj = mean_obj - state.beta_sqrt * std_obj
        index = int(np.argmin(np.where(safe, lcb_obj, np.inf)))
    else:
        logger.debug("安全集合為空，選擇約束上信賴界最小的候選點")
        index = int(np.argmin(ucb_con))

    theta = state.grid.points[index]
    objective, constraint = observe(theta, z)
    state.record_observation(theta, z, objective, constraint)
    return theta, state


def best_feasible_objective(state: TunerState) -> float:
    """已觀測資料中滿足目前閾值的最佳目標值；沒有可行觀測時為 NaN"""
    objectives = state.gp_obj.outputs
    constraints = state.gp_con.outputs
    feasible = constraints <= state.threshold
    if not feasible.any():
        return math.nan
    return float(objectives[feasible].min())


def constrained_expected_improvement(state: TunerState, z) -> np.ndarray:
    """格點上的 EI(θ)·P(g(θ) ≤ c)"""
    mean_con, std_con = _grid_posterior(state.gp_con, state.grid, z)
    degenerate_con = std_con <= 0
    pof = np.where(
        degenerate_con,
        (mean_con <= state.threshold).astype(float),
        norm.cdf((state.threshold - mean_con) / np.where(degenerate_con, 1.0, std_con))
    )

    best = best_feasible_objective(state)
    if math.isnan(best):
        return pof

    mean_obj, std_obj = _grid_posterior(state.gp_obj, state.grid, z)
    improvement = best - mean_obj
    degenerate_obj = std_obj <= 0
    safe_std = np.where(degenerate_obj, 1.0, std_obj)
    u = improvement / safe_std
    ei = np.where(
        degenerate_obj,
        np.maximum(improvement, 0.0),
        improvement * norm.cdf(u) + safe_std * norm.pdf(u)
    )
    return np.maximum(ei, 0.0) * pof


def cei_step(state: TunerState, z, observe: Observe):
    """最大化約束期望改進量，平手時取第一個"""
    acquisition = constrained_expected_improvement(state, z)
    theta = state.grid.points[int(np.argmax(acquisition))]
    objective, constraint = observe(theta, z)
    state.record_observation(theta, z, objective, constraint)
    return theta, state


def fixed_step(params, z, observe: Observe) -> Tuple[float, float]:
    """固定控制器：直接評估給定參數"""
    return observe(params, z)


def warmup_step(state: TunerState, params, z, observe: Observe):
    """以固定參數收集初始資料，λ 不變"""
    objective, constraint = observe(params, z)
    state.record_observation(params, z, objective, constraint)
    return params, state


STEP_FUNCTIONS = {
    'pdcbo': pdcbo_step,
    'safeopt': safeopt_step,
    'cei': cei_step,
}
