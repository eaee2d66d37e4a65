"""
高斯過程代理模型
平方指數 (SE) 核函數、快取 Cholesky 分解的精確後驗，以及超參數格點搜尋
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from error_handling import ConfigurationError, DomainError, FactorizationError, InputShapeError

logger = logging.getLogger(__name__)

# 對角線穩定項（相對於訊號變異數）
JITTER = 1e-8
# 自動先驗平均使用的前幾筆觀測數
PRIOR_MEAN_WINDOW = 5
MIN_FIT_OBSERVATIONS = 5

# ==================== 核函數 ====================

@dataclass(frozen=True)
class SeKernelHyper:
    """SE 核函數超參數"""

    signal_variance: float
    lengthscales: Tuple[float, ...]

    def __post_init__(self):
        scales = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, 'lengthscales', scales)
        if not (math.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ConfigurationError("訊號變異數必須為正數", field="signal_variance",
                                     value=self.signal_variance)
        if not scales or not all(math.isfinite(v) and v > 0 for v in scales):
            raise ConfigurationError("長度尺度必須為正數", field="lengthscales", value=scales)

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def to_log_vector(self) -> np.ndarray:
        """[log σ², log l_1, ..., log l_d]"""
        return np.log(np.array((self.signal_variance,) + self.lengthscales))

    @classmethod
    def from_log_vector(cls, vector: Sequence[float]) -> 'SeKernelHyper':
        values = np.exp(np.asarray(vector, dtype=float))
        return cls(float(values[0]), tuple(values[1:]))


def _as_row(x, dim: int, what: str = "input") -> np.ndarray:
    row = np.asarray(x, dtype=float).ravel()
    if row.shape[0] != dim:
        raise InputShapeError(dim, row.shape[0], what)
    return row


def _as_matrix(X, dim: int, what: str = "input") -> np.ndarray:
    matrix = np.asarray(X, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2 or matrix.shape[1] != dim:
        actual = matrix.shape[-1] if matrix.ndim else 0
        raise InputShapeError(dim, actual, what)
    return matrix


def se_kernel(x, y, hyper: SeKernelHyper) -> float:
    """
    k(x, y) = σ² · exp(-Σ ((x_i - y_i) / l_i)²)

    Raises:
        InputShapeError: x、y 維度與長度尺度不一致
    """
    a = _as_row(x, hyper.dim, "x")
    b = _as_row(y, hyper.dim, "y")
    scaled = (a - b) / np.asarray(hyper.lengthscales)
    return float(hyper.signal_variance * np.exp(-np.dot(scaled, scaled)))


def se_gram(A, B, hyper: SeKernelHyper) -> np.ndarray:
    """批次核矩陣 K[i, j] = k(A[i], B[j])"""
    scales = np.asarray(hyper.lengthscales)
    A = _as_matrix(A, hyper.dim, "A") / scales
    B = _as_matrix(B, hyper.dim, "B") / scales
    return hyper.signal_variance * np.exp(-cdist(A, B, 'sqeuclidean'))

# ==================== 後驗 ====================

@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


class GpModel:
    """
    精確 GP 迴歸模型

    觀測以 add_observation 就地累加；Cholesky 分解在第一次查詢時建立並快取，
    任何新增觀測或超參數變更都會讓快取失效。
    """

    def __init__(self, hyper: SeKernelHyper, noise_variance: Optional[float] = None,
                 prior_mean: Optional[float] = None):
        """
        Args:
            hyper: 核函數超參數
            noise_variance: 觀測雜訊變異數，None 時為 1e-2·σ²
            prior_mean: 固定先驗平均；None 時使用前 5 筆觀測的經驗平均（無資料時為 0）
        """
        if noise_variance is None:
            noise_variance = 1e-2 * hyper.signal_variance
        if not (math.isfinite(noise_variance) and noise_variance >= 0):
            raise ConfigurationError("雜訊變異數不能為負數", field="noise_variance", value=noise_variance)

        self.hyper = hyper
        self.noise_variance = float(noise_variance)
        self._fixed_prior_mean = prior_mean
        self._inputs: List[np.ndarray] = []
        self._outputs: List[float] = []
        self._chol: Optional[np.ndarray] = None
        self._alpha: Optional[np.ndarray] = None

    # ---------- 資料 ----------

    @property
    def dim(self) -> int:
        return self.hyper.dim

    @property
    def n_observations(self) -> int:
        return len(self._outputs)

    @property
    def inputs(self) -> np.ndarray:
        if not self._inputs:
            return np.empty((0, self.dim))
        return np.vstack(self._inputs)

    @property
    def outputs(self) -> np.ndarray:
        return np.asarray(self._outputs, dtype=float)

    @property
    def prior_mean(self) -> float:
        if self._fixed_prior_mean is not None:
            return float(self._fixed_prior_mean)
        if not self._outputs:
            return 0.0
        return float(np.mean(self._outputs[:PRIOR_MEAN_WINDOW]))

    def add_observation(self, x, y: float) -> 'GpModel':
        """加入一筆觀測 (x, y)，回傳自身"""
        row = _as_row(x, self.dim, "observation")
        self._inputs.append(row)
        self._outputs.append(float(y))
        self._invalidate()
        return self

    def set_hyper(self, hyper: SeKernelHyper) -> None:
        """替換核函數超參數（雜訊變異數維持不變）"""
        if hyper.dim != self.dim:
            raise InputShapeError(self.dim, hyper.dim, "hyper")
        self.hyper = hyper
        self._invalidate()

    def _invalidate(self) -> None:
        self._chol = None
        self._alpha = None

    # ---------- 分解 ----------

    def _factorize(self, hyper: SeKernelHyper) -> Tuple[np.ndarray, np.ndarray]:
        X = self.inputs
        n = X.shape[0]
        K = se_gram(X, X, hyper)
        K[np.diag_indices(n)] += self.noise_variance + JITTER * hyper.signal_variance
        try:
            chol = cholesky(K, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise FactorizationError(n, str(exc)) from exc
        alpha = cho_solve((chol, True), self.outputs - self.prior_mean)
        return chol, alpha

    def _ensure_factor(self) -> None:
        if self._chol is None:
            self._chol, self._alpha = self._factorize(self.hyper)

    # ---------- 查詢 ----------

    def predict(self, X) -> Tuple[np.ndarray, np.ndarray]:
        """
        批次後驗預測

        Args:
            X: (m, d) 查詢點

        Returns:
            Tuple[np.ndarray, np.ndarray]: 平均與變異數（變異數已截斷為非負）
        """
        X = _as_matrix(X, self.dim, "query")
        m = X.shape[0]
        if self.n_observations == 0:
            return (np.full(m, self.prior_mean),
                    np.full(m, self.hyper.signal_variance))

        self._ensure_factor()
        K_star = se_gram(X, self.inputs, self.hyper)
        mean = self.prior_mean + K_star @ self._alpha
        v = solve_triangular(self._chol, K_star.T, lower=True)
        variance = self.hyper.signal_variance - np.einsum('ij,ij->j', v, v)
        return mean, np.maximum(variance, 0.0)

    def posterior(self, x) -> Posterior:
        """單點後驗平均與變異數"""
        row = _as_row(x, self.dim, "query")
        mean, variance = self.predict(row[None, :])
        return Posterior(float(mean[0]), float(variance[0]))

    def log_marginal_likelihood(self, hyper: Optional[SeKernelHyper] = None) -> float:
        """
        目前資料的對數邊際似然

        Args:
            hyper: 以其他超參數評估（不改變模型）

        Raises:
            DomainError: 尚無任何觀測
            FactorizationError: Gram 矩陣無法分解
        """
        if self.n_observations == 0:
            raise DomainError("計算邊際似然需要至少一筆觀測")
        if hyper is None:
            self._ensure_factor()
            chol, alpha = self._chol, self._alpha
        else:
            chol, alpha = self._factorize(hyper)
        residual = self.outputs - self.prior_mean
        n = self.n_observations
        return float(
            -0.5 * residual @ alpha
            - np.sum(np.log(np.diag(chol)))
            - 0.5 * n * math.log(2 * math.pi)
        )

# ==================== 超參數搜尋 ====================

def _grid_axes(bounds: Sequence[Tuple[float, float]], levels: int) -> List[np.ndarray]:
    axes = []
    for lo, hi in bounds:
        if lo == hi:
            axes.append(np.array([lo]))
        else:
            axes.append(np.linspace(lo, hi, levels))
    return axes


def _safe_lml(model: GpModel, vector: Sequence[float]) -> float:
    try:
        return model.log_marginal_likelihood(SeKernelHyper.from_log_vector(vector))
    except (FactorizationError, ConfigurationError):
        return -math.inf


def fit_hyperparameters(model: GpModel, bounds: Sequence[Tuple[float, float]],
                        levels: int = 7, max_exhaustive: int = 4096,
                        max_sweeps: int = 3) -> SeKernelHyper:
    """
    在對數尺度的有界格點上最大化邊際似然

    格點總數不超過 max_exhaustive 時逐點列舉，否則改為座標搜尋。
    位於界內的現有超參數也會參與比較，因此結果不會比它差。
    雜訊變異數維持固定，模型本身不會被修改。

    Args:
        model: 至少有 5 筆觀測的 GP
        bounds: [(lo, hi), ...]，依序為 log σ² 與各維 log l_i
        levels: 每維格點數

    Returns:
        SeKernelHyper: 最佳超參數
    """
    if not bounds:
        raise ConfigurationError("超參數搜尋範圍不能為空", field="bounds")
    if len(bounds) != model.dim + 1:
        raise ConfigurationError(
            f"超參數搜尋範圍需要 {model.dim + 1} 維", field="bounds", value=len(bounds)
        )
    for lo, hi in bounds:
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ConfigurationError("超參數搜尋範圍無效", field="bounds", value=(lo, hi))
    if levels < 2:
        raise ConfigurationError("每維格點數至少為 2", field="levels", value=levels)
    if model.n_observations < MIN_FIT_OBSERVATIONS:
        raise DomainError(f"超參數搜尋需要至少 {MIN_FIT_OBSERVATIONS} 筆觀測")

    lower = np.array([lo for lo, _ in bounds])
    upper = np.array([hi for _, hi in bounds])
    incumbent = model.hyper.to_log_vector()

    best_vector: Optional[np.ndarray] = None
    best_value = -math.inf
    if np.all(incumbent >= lower) and np.all(incumbent <= upper):
        best_vector, best_value = incumbent, _safe_lml(model, incumbent)

    axes = _grid_axes(bounds, levels)
    grid_size = math.prod(len(axis) for axis in axes)

    if grid_size <= max_exhaustive:
        for point in itertools.product(*axes):
            value = _safe_lml(model, point)
            if value > best_value:
                best_vector, best_value = np.array(point), value
    else:
        current = np.clip(incumbent, lower, upper)
        current_value = _safe_lml(model, current)
        if current_value > best_value:
            best_vector, best_value = current, current_value
        sweeps_run = 0
        for _ in range(max_sweeps):
            sweeps_run += 1
            improved = False
            for i, axis in enumerate(axes):
                for level in axis:
                    candidate = current.copy()
                    candidate[i] = level
                    value = _safe_lml(model, candidate)
                    if value > best_value:
                        best_vector, best_value = candidate, value
                        current, improved = candidate, True
            if not improved:
                break
        logger.debug(f"座標搜尋結束，共 {sweeps_run} 輪")

    if best_vector is None:
        raise FactorizationError(model.n_observations, "所有候選超參數皆無法分解")

    logger.info(f"超參數搜尋完成: log 似然={best_value:.4f}")
    return SeKernelHyper.from_log_vector(best_vector)
