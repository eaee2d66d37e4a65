"""實驗配置、執行期配置、錯誤與日誌測試"""

import json
import logging

import pytest

from config import ConfigManager, get_config, reset_config
from error_handling import (
    EXIT_RUNTIME_ERROR, EXIT_USAGE_ERROR, ConfigurationError, DomainError, ErrorCodes,
    ExperimentDayError, OutputWriteError, SimulationDivergedError, UsageError, exit_code_for,
    format_error,
)
from experiment_config import (
    ExperimentConfig, load_experiment_config, parse_experiment_config, with_overrides,
)
from logging_config import StructuredFormatter


class TestExperimentConfig:
    def test_defaults(self):
        config = parse_experiment_config({})
        assert config.algorithm == 'pdcbo'
        assert config.formulation == 'discomfort_constrained'
        assert config.n_days == 300
        assert config.threshold_schedule == [(0, 10.0)]
        assert config.gp.energy.signal_variance == pytest.approx(56.7)
        assert len(config.gp.discomfort.lengthscales) == 7
        assert config.weather_seed == 0
        assert config.optimizer.epsilon_for('discomfort_constrained') == 3.0
        assert config.optimizer.epsilon_for('energy_constrained') == 0.0
        assert config.optimizer.beta_sqrt_for('pdcbo') == 1.0
        assert config.optimizer.beta_sqrt_for('safeopt') == 3.0

    @pytest.mark.parametrize("schedule", [
        [],
        [[1, 5.0]],
        [[0, 5.0], [10, 6.0], [10, 7.0]],
        [[0, 5.0], [20, 6.0], [10, 7.0]],
        [[0, -1.0]],
    ])
    def test_bad_schedule(self, schedule):
        with pytest.raises(ConfigurationError) as exc_info:
            parse_experiment_config({"threshold_schedule": schedule})
        assert exc_info.value.context['field'] == 'threshold_schedule'

    def test_lengthscale_count(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"gp": {"energy": {"signal_variance": 1.0,
                                                       "lengthscales": [1.0, 2.0]}}})

    def test_unstable_room(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"room": {"thermal_capacitance": 0.1,
                                              "envelope_conductance": 1.0,
                                              "timestep_minutes": 60}})

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"algorithm": "pdcbo", "colour": "blue"})
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"room": {"volume": 30}})

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"algorithm": "random"})

    def test_fit_after_days_needs_five_observations(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"gp": {"fit_after_days": 3}})
        assert parse_experiment_config({"gp": {"fit_after_days": 5}}).gp.fit_after_days == 5

    def test_history_days_need_five_observations(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"gp": {"history_days": 4}})
        assert parse_experiment_config({"gp": {"history_days": 0}}).gp.history_days == 0

    def test_negative_seed_rejected(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"seed": -1})

    def test_csv_weather_needs_path(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"weather": {"source": "csv"}})

    def test_grid_bounds_inside_domain(self):
        with pytest.raises(ConfigurationError):
            parse_experiment_config({"grid": {"setpoint_min": 18.0}})

    def test_min_heating_corner(self):
        params = parse_experiment_config({}).grid.min_heating_params()
        assert (params.kp, params.ki, params.day_setpoint, params.heat_start) == (0.05, 0.01, 20.0, 540.0)

    def test_json_round_trip(self):
        config = parse_experiment_config({"n_days": 12, "threshold_schedule": [[0, 5.0], [6, 8.0]]})
        assert parse_experiment_config(json.loads(config.to_json())) == config

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"algorithm": "cei", "seed": 9}', encoding="utf-8")
        config = load_experiment_config(path)
        assert config.algorithm == 'cei'
        assert config.seed == 9

    def test_load_rejects_non_object(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('[1, 2]', encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_experiment_config(path)

    def test_shipped_configs_are_valid(self):
        from pathlib import Path
        for path in sorted((Path(__file__).parent.parent / "configs").glob("*.json")):
            assert isinstance(load_experiment_config(path), ExperimentConfig)


class TestWithOverrides:
    def test_none_means_keep(self):
        config = parse_experiment_config({"n_days": 40})
        assert with_overrides(config, n_days=None, seed=None) == config

    def test_values_revalidated(self):
        config = parse_experiment_config({})
        assert with_overrides(config, n_days=7).n_days == 7
        with pytest.raises(ConfigurationError):
            with_overrides(config, n_days=0)

    def test_weather_path_switches_source(self):
        config = with_overrides(parse_experiment_config({}), weather_path="w.csv")
        assert config.weather.source == 'csv'
        assert config.weather.path == 'w.csv'


class TestConfigManager:
    def test_environment_values(self, monkeypatch):
        monkeypatch.setenv("PDCBO_TUNE_JOBS", "3")
        monkeypatch.setenv("PDCBO_TUNE_OUTPUT_DIR", "out/here")
        monkeypatch.setenv("LOG_LEVEL", "debug")
        manager = ConfigManager()
        assert manager.runtime.jobs == 3
        assert manager.runtime.output_dir == "out/here"
        assert manager.logging.log_level == "DEBUG"

    def test_invalid_values_fall_back(self, monkeypatch):
        monkeypatch.setenv("PDCBO_TUNE_JOBS", "0")
        monkeypatch.setenv("LOG_LEVEL", "chatty")
        monkeypatch.setenv("LOG_BACKUP_COUNT", "many")
        manager = ConfigManager()
        assert manager.runtime.jobs == 1
        assert manager.logging.log_level == "INFO"
        assert manager.logging.log_backup_count == 5

    def test_default_jobs_uses_cpu_count(self, monkeypatch):
        monkeypatch.delenv("PDCBO_TUNE_JOBS", raising=False)
        assert ConfigManager().runtime.jobs >= 1

    def test_boolean_parsing(self, monkeypatch):
        monkeypatch.setenv("DEVELOPMENT_MODE", "yes")
        monkeypatch.setenv("ENABLE_STRUCTURED_LOGGING", "0")
        manager = ConfigManager()
        assert manager.development.development_mode is True
        assert manager.logging.enable_structured_logging is False

    def test_singleton_and_reset(self):
        first = get_config()
        assert get_config() is first
        reset_config()
        assert get_config() is not first

    def test_to_dict_sections(self):
        assert set(ConfigManager().to_dict()) == {'runtime', 'logging', 'development'}


class TestErrors:
    def test_exit_codes(self):
        assert exit_code_for(ConfigurationError("bad")) == EXIT_USAGE_ERROR
        assert exit_code_for(UsageError("bad")) == EXIT_USAGE_ERROR
        assert exit_code_for(DomainError("bad")) == EXIT_RUNTIME_ERROR
        assert exit_code_for(OutputWriteError("/x", "denied")) == EXIT_RUNTIME_ERROR
        assert exit_code_for(ValueError("bad")) == EXIT_RUNTIME_ERROR

    def test_day_error_inherits_cause_exit_code(self):
        assert ExperimentDayError(3, ConfigurationError("bad")).exit_code == EXIT_USAGE_ERROR
        wrapped = ExperimentDayError(3, SimulationDivergedError(10, float('inf')))
        assert wrapped.exit_code == EXIT_RUNTIME_ERROR
        assert wrapped.context['cause_code'] == ErrorCodes.SIMULATION_DIVERGED
        assert wrapped.context['day'] == 3

    def test_to_dict(self):
        error = ConfigurationError("bad value", field="n_days", value=0)
        data = error.to_dict()
        assert data['error_code'] == ErrorCodes.CONFIGURATION_ERROR
        assert data['context'] == {'field': 'n_days', 'invalid_value': '0'}
        assert 'timestamp' in data

    def test_format_error(self):
        assert format_error(OutputWriteError("/x/y", "denied")).startswith("[OUTPUT_WRITE_FAILED]")
        assert "/x/y" in format_error(OutputWriteError("/x/y", "denied"))
        assert format_error(KeyError("k")).startswith("[INTERNAL_ERROR]")


def test_structured_formatter_emits_json():
    record = logging.LogRecord("pdcbo_tune.test", logging.INFO, __file__, 10, "第 %d 天", (4,), None)
    record.experiment_id = "exp-1"
    record.day = 4
    data = json.loads(StructuredFormatter().format(record))
    assert data['message'] == "第 4 天"
    assert data['level'] == "INFO"
    assert data['experiment_id'] == "exp-1"
    assert data['day'] == 4
