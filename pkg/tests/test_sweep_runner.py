"""參數掃描測試"""

import pytest

from error_handling import ConfigurationError, DomainError
from experiment_config import parse_experiment_config
from sweep_runner import SweepRunner, SweepStats, build_cells, cell_name


def base_config():
    return parse_experiment_config({"n_days": 2, "grid": {"levels": 2}})


def test_cell_name():
    assert cell_name("pdcbo", 10.0) == "pdcbo_thr10"
    assert cell_name("cei", 7.5) == "cei_thr7.5"


class TestBuildCells:
    def test_cartesian_product(self, tmp_path):
        cells = build_cells(base_config(), ["pdcbo", "safeopt"], [5.0, 10.0, 15.0], tmp_path)
        assert len(cells) == 6
        assert {c.name for c in cells} == {
            "pdcbo_thr5", "pdcbo_thr10", "pdcbo_thr15",
            "safeopt_thr5", "safeopt_thr10", "safeopt_thr15",
        }
        for cell in cells:
            assert cell.config.algorithm == cell.algorithm
            assert cell.config.threshold_schedule == [(0, cell.requested_threshold)]

    def test_rescaled_thresholds_keep_requested_names(self, tmp_path):
        cells = build_cells(base_config(), ["pdcbo"], [9.0], tmp_path, budget_rescale_factor=2.0)
        assert cells[0].name == "pdcbo_thr9"
        assert cells[0].config.threshold_schedule == [(0, 18.0)]

    def test_duplicates_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            build_cells(base_config(), ["pdcbo", "pdcbo"], [5.0], tmp_path)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            build_cells(base_config(), [], [5.0], tmp_path)

    def test_nonpositive_threshold_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            build_cells(base_config(), ["pdcbo"], [-1.0], tmp_path)


def fake_runner(cell):
    if cell.algorithm == "cei":
        raise DomainError("模擬失敗")
    return {"name": cell.name}


class TestSweepRunner:
    def test_failures_do_not_stop_other_cells(self, tmp_path):
        cells = build_cells(base_config(), ["pdcbo", "cei"], [5.0, 10.0], tmp_path)
        result = SweepRunner(fake_runner, jobs=1).run(cells)
        assert set(result.summaries) == {"pdcbo_thr5", "pdcbo_thr10"}
        assert set(result.failures) == {"cei_thr5", "cei_thr10"}
        assert result.failures["cei_thr5"].startswith("[DOMAIN_ERROR]")
        assert not result.ok
        assert result.stats.total_cells == 4
        assert result.stats.get_success_rate() == pytest.approx(50.0)

    def test_jobs_default_from_environment(self):
        assert SweepRunner(fake_runner).jobs == 1

    def test_invalid_jobs(self):
        with pytest.raises(ConfigurationError):
            SweepRunner(fake_runner, jobs=0)

    def test_to_dict(self, tmp_path):
        cells = build_cells(base_config(), ["pdcbo"], [5.0], tmp_path)
        data = SweepRunner(fake_runner, jobs=1).run(cells).to_dict()
        assert data["cells"] == {"pdcbo_thr5": {"name": "pdcbo_thr5"}}
        assert data["stats"]["success_rate"] == 100.0


def test_stats_empty():
    assert SweepStats().get_success_rate() == 0
