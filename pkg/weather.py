"""
天氣資料
讀寫日平均天氣 CSV，以及產生可重現的合成供暖季天氣
"""

import csv
import logging
import math
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from error_handling import (
    ConfigurationError, EmptyInputError, WeatherParseError, WeatherSchemaError,
    WeatherValidationError,
)
from models import WeatherDay

logger = logging.getLogger(__name__)

WEATHER_COLUMNS = ('day', 'ambient_c', 'irradiation_wm2')

# 合成天氣預設值
SEASON_MEAN_C = 5.0
SEASON_AMPLITUDE_C = 7.0
SEASON_PERIOD_DAYS = 300
AMBIENT_NOISE_STD = 3.0
AMBIENT_CLIP = (-15.0, 20.0)
IRRADIATION_BASE = 60.0
IRRADIATION_SLOPE = 6.0       # W/m² per °C
IRRADIATION_NOISE_STD = 20.0


def _parse_number(text: str, row: int, column: str, cast=float):
    try:
        return cast(text.strip())
    except ValueError:
        raise WeatherParseError(row, column, text) from None


def load_weather_csv(path: Union[str, Path]) -> List[WeatherDay]:
    """
    讀取天氣 CSV（欄位：day, ambient_c, irradiation_wm2）

    day_index 依檔案順序重新編號為 0..n-1；空白列會被略過。
    錯誤訊息中的列號從 1 起算（表頭為第 1 列）。

    Raises:
        WeatherSchemaError: 表頭或欄位數不符
        WeatherParseError: 數值無法解析
        WeatherValidationError: 數值非有限或日照量為負
        EmptyInputError: 沒有任何資料列
        OSError: 檔案無法讀取
    """
    path = Path(path)
    days: List[WeatherDay] = []

    with path.open('r', encoding='utf-8', newline='') as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(cell.strip() for cell in header) != WEATHER_COLUMNS:
            raise WeatherSchemaError(
                f"表頭必須為 {','.join(WEATHER_COLUMNS)}，實際為 {header}", row=1, path=str(path)
            )

        for row_number, cells in enumerate(reader, start=2):
            if not cells or all(not cell.strip() for cell in cells):
                continue
            if len(cells) != len(WEATHER_COLUMNS):
                raise WeatherSchemaError(
                    f"預期 {len(WEATHER_COLUMNS)} 個欄位，實際 {len(cells)} 個",
                    row=row_number, path=str(path)
                )

            _parse_number(cells[0], row_number, 'day', int)
            ambient = _parse_number(cells[1], row_number, 'ambient_c')
            irradiation = _parse_number(cells[2], row_number, 'irradiation_wm2')

            for column, value in (('ambient_c', ambient), ('irradiation_wm2', irradiation)):
                if not math.isfinite(value):
                    raise WeatherValidationError(row_number, column, value, "數值必須為有限值")
            if irradiation < 0:
                raise WeatherValidationError(row_number, 'irradiation_wm2', irradiation,
                                             "日照量不能為負數")

            days.append(WeatherDay(len(days), ambient, irradiation))

    if not days:
        raise EmptyInputError(f"天氣檔案 {path}")

    logger.info(f"已載入 {len(days)} 天天氣資料: {path}")
    return days


def write_weather_csv(days: Sequence[WeatherDay], path: Union[str, Path]) -> Path:
    """寫出天氣 CSV；浮點數以 repr 表示以確保讀回後完全一致"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(WEATHER_COLUMNS)
        for day in days:
            writer.writerow([day.day_index, repr(float(day.ambient_mean)),
                             repr(float(day.irradiation_mean))])
    return path


def synth_weather(seed: int, n_days: int) -> List[WeatherDay]:
    """
    產生合成供暖季天氣

    外氣溫度為季節性餘弦（週期 300 天，第 150 天最冷）加上高斯雜訊並截斷；
    日照量與外氣溫度正相關，截斷為非負。

    Args:
        seed: 亂數種子，相同種子產生相同序列
        n_days: 天數（至少 1）
    """
    if n_days < 1:
        raise ConfigurationError("天數至少為 1", field="n_days", value=n_days)

    rng = np.random.default_rng(seed)
    day_index = np.arange(n_days)
    seasonal = SEASON_MEAN_C + SEASON_AMPLITUDE_C * np.cos(2 * np.pi * day_index / SEASON_PERIOD_DAYS)
    ambient = np.clip(seasonal + rng.normal(0.0, AMBIENT_NOISE_STD, n_days), *AMBIENT_CLIP)
    irradiation = np.maximum(
        IRRADIATION_BASE + IRRADIATION_SLOPE * (ambient - SEASON_MEAN_C)
        + rng.normal(0.0, IRRADIATION_NOISE_STD, n_days),
        0.0
    )

    return [
        WeatherDay(int(i), float(amb), float(irr))
        for i, amb, irr in zip(day_index, ambient, irradiation)
    ]
