"""共用測試夾具"""

import numpy as np
import pytest

from config import reset_config


@pytest.fixture(autouse=True)
def isolated_runtime(tmp_path, monkeypatch):
    """每個測試使用獨立的日誌路徑與重新載入的執行期配置"""
    monkeypatch.setenv("LOG_FILE_PATH", str(tmp_path / "logs" / "test.log"))
    monkeypatch.setenv("PDCBO_TUNE_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("PDCBO_TUNE_JOBS", "1")
    reset_config()
    yield
    reset_config()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
