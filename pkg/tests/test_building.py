"""建築熱模擬器測試"""

import math

import numpy as np
import pytest

from building import (
    NIGHT_SETPOINT, discomfort_instant, forcing_at, pi_control, setpoint_at, simulate_day,
    tariff_weight, thermal_step,
)
from error_handling import ConfigurationError
from models import ComfortProfile, Context, ControllerParams, PiState, RoomModel

PARAMS = ControllerParams(kp=1.0, ki=0.1, day_setpoint=23.5, heat_start=360.0)
PROFILE = ComfortProfile()
ROOM = RoomModel()


class TestSetpoint:
    def test_midnight_is_night_setpoint(self):
        assert setpoint_at(0, PARAMS) == 22.5

    def test_heat_start_is_inclusive(self):
        assert setpoint_at(359, PARAMS) == NIGHT_SETPOINT
        assert setpoint_at(360, PARAMS) == 23.5

    def test_six_pm_switches_back(self):
        assert setpoint_at(1079, PARAMS) == 23.5
        assert setpoint_at(1080, PARAMS) == 22.5


class TestPiControl:
    def test_zero_error(self):
        u, state = pi_control(0.0, PiState(), kp=1.0, ki=1.0)
        assert u == 0.0
        assert state.integral == 0.0

    def test_saturates_at_one(self):
        u, _ = pi_control(1.0, PiState(), kp=100.0, ki=0.0)
        assert u == 1.0

    def test_proportional_only(self):
        u, _ = pi_control(0.4, PiState(), kp=0.5, ki=0.0)
        assert u == pytest.approx(0.2)

    def test_negative_output_truncated(self):
        u, _ = pi_control(-2.0, PiState(), kp=1.0, ki=0.0)
        assert u == 0.0

    def test_integral_advances_by_error_times_timestep(self):
        _, state = pi_control(2.0, PiState(1.0), kp=0.0, ki=0.0, timestep_hours=0.25)
        assert state.integral == pytest.approx(1.5)

    def test_integral_clamped(self):
        _, state = pi_control(100.0, PiState(9.0), kp=0.0, ki=0.0, timestep_hours=0.25)
        assert state.integral == 10.0
        _, state = pi_control(-100.0, PiState(-9.0), kp=0.0, ki=0.0, timestep_hours=0.25)
        assert state.integral == -10.0


class TestThermalStep:
    def test_equilibrium(self):
        assert thermal_step(12.0, 0.0, 12.0, 0.0, ROOM) == 12.0

    def test_heating_increases_temperature(self, rng):
        for _ in range(100):
            temp, ambient, irradiation = rng.uniform(5, 30), rng.uniform(-15, 20), rng.uniform(0, 300)
            assert thermal_step(temp, 1.0, ambient, irradiation, ROOM) > \
                thermal_step(temp, 0.0, ambient, irradiation, ROOM)

    def test_hand_euler_step(self):
        room = RoomModel(thermal_capacitance=10.0, envelope_conductance=0.2, max_heat_power=2.0,
                         timestep=15)
        expected = 20.0 + 0.25 / 10.0 * (0.5 * 2.0 - 0.2 * (20.0 - 10.0))
        assert thermal_step(20.0, 0.5, 10.0, 0.0, room) == pytest.approx(19.975)
        assert thermal_step(20.0, 0.5, 10.0, 0.0, room) == pytest.approx(expected, rel=1e-15)

    def test_monotone_in_power_trace(self, rng):
        high = rng.uniform(0, 1, 96)
        low = high * rng.uniform(0, 1, 96)
        t_high = t_low = 18.0
        for u_high, u_low in zip(high, low):
            t_high = thermal_step(t_high, u_high, 0.0, 50.0, ROOM)
            t_low = thermal_step(t_low, u_low, 0.0, 50.0, ROOM)
            assert t_high >= t_low

    def test_free_response_converges_to_ambient(self):
        temp, gaps = 30.0, []
        for _ in range(500):
            temp = thermal_step(temp, 0.0, 5.0, 0.0, ROOM)
            gaps.append(abs(temp - 5.0))
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))


class TestComfortAndTariff:
    def test_inside_night_band(self):
        assert discomfort_instant(22.0, 60, PROFILE) == 0.0

    def test_above_band(self):
        assert discomfort_instant(25.0, 600, PROFILE) == pytest.approx(1.0)

    def test_below_band(self):
        assert discomfort_instant(20.0, 60, PROFILE) == pytest.approx(1.0)

    def test_daytime_band_is_tighter(self):
        assert discomfort_instant(22.0, 600, PROFILE) == pytest.approx(1.0)

    def test_tariff(self):
        assert tariff_weight(600, PROFILE) == 2.0
        assert tariff_weight(60, PROFILE) == 1.0
        assert tariff_weight(PROFILE.day_begin, PROFILE) == 2.0
        assert tariff_weight(PROFILE.day_end, PROFILE) == 1.0


class TestRoomModel:
    def test_default_is_euler_stable(self):
        assert ROOM.timestep_hours * ROOM.envelope_conductance / ROOM.thermal_capacitance < 1.0
        assert ROOM.steps_per_day == 96

    def test_unstable_timestep_rejected(self):
        with pytest.raises(ConfigurationError):
            RoomModel(thermal_capacitance=0.1, envelope_conductance=1.0, timestep=60)

    def test_timestep_must_divide_day(self):
        with pytest.raises(ConfigurationError):
            RoomModel(timestep=7)

    def test_nonpositive_coefficient_rejected(self):
        with pytest.raises(ConfigurationError):
            RoomModel(max_heat_power=0.0)


def reference_day(params, z, room, profile):
    """逐步參考迴圈"""
    dt = room.timestep / 60.0
    temp, integral, energy, discomfort = z.init_temp, 0.0, 0.0, 0.0
    for step in range(1440 // room.timestep):
        t = step * room.timestep
        setpoint = params.day_setpoint if params.heat_start <= t < 1080 else 22.5
        error = setpoint - temp
        integral = min(max(integral + error * dt, -10.0), 10.0)
        u = min(max(params.kp * error + params.ki * integral, 0.0), 1.0)
        power = u * room.max_heat_power
        daytime = profile.day_begin <= t < profile.day_end
        energy += (profile.day_tariff if daytime else 1.0) * power * dt
        lo, hi = (profile.day_lo, profile.day_hi) if daytime else (profile.night_lo, profile.night_hi)
        discomfort += (max(temp - hi, 0.0) + max(lo - temp, 0.0)) * dt
        temp = temp + dt / room.thermal_capacitance * (
            power - room.envelope_conductance * (temp - z.ambient_temp)
            + room.solar_gain_coeff * z.irradiation
        )
    return energy, discomfort, temp


class TestSimulateDay:
    def test_heater_off_in_comfort(self):
        profile = ComfortProfile(day_lo=22.0, day_hi=24.0)
        z = Context(ambient_temp=22.5, irradiation=0.0, init_temp=22.5)
        outcome = simulate_day(ControllerParams(0.0, 0.0, 23.0, 360.0), z, ROOM, profile)
        assert outcome.energy == 0.0
        assert outcome.discomfort == 0.0
        assert outcome.end_temp == pytest.approx(22.5)

    def test_full_power_all_day(self):
        profile = ComfortProfile(day_tariff=1.0)
        z = Context(ambient_temp=-20.0, irradiation=0.0, init_temp=5.0)
        outcome = simulate_day(ControllerParams(1e6, 0.0, 26.0, 0.0), z, ROOM, profile)
        np.testing.assert_array_equal(outcome.control_trace, np.ones(96))
        assert outcome.energy == pytest.approx(48.0)

    def test_matches_reference_loop(self):
        z = Context(ambient_temp=3.0, irradiation=80.0, init_temp=21.7)
        outcome = simulate_day(PARAMS, z, ROOM, PROFILE, noise_seed=7)
        energy, discomfort, end_temp = reference_day(PARAMS, z, ROOM, PROFILE)
        assert outcome.energy == pytest.approx(energy, abs=1e-9)
        assert outcome.discomfort == pytest.approx(discomfort, abs=1e-9)
        assert outcome.end_temp == pytest.approx(end_temp, abs=1e-9)

    def test_trace_lengths_and_bounds(self, rng):
        for _ in range(20):
            params = ControllerParams(rng.uniform(0.05, 5), rng.uniform(0.01, 2),
                                      rng.uniform(20, 26), rng.uniform(0, 540))
            z = Context(rng.uniform(-15, 20), rng.uniform(0, 200), rng.uniform(15, 28))
            outcome = simulate_day(params, z, ROOM, PROFILE)
            assert len(outcome.temp_trace) == len(outcome.power_trace) == 96
            assert np.all((outcome.control_trace >= 0) & (outcome.control_trace <= 1))
            assert outcome.energy >= 0
            assert outcome.discomfort >= 0

    def test_deterministic_with_noise(self):
        z = Context(0.0, 40.0, 22.0)
        first = simulate_day(PARAMS, z, ROOM, PROFILE, noise_seed=3, energy_noise_std=0.5,
                             discomfort_noise_std=0.5)
        second = simulate_day(PARAMS, z, ROOM, PROFILE, noise_seed=3, energy_noise_std=0.5,
                              discomfort_noise_std=0.5)
        assert first.energy == second.energy
        assert first.discomfort == second.discomfort
        np.testing.assert_array_equal(first.temp_trace, second.temp_trace)

    def test_noise_leaves_traces_untouched(self):
        z = Context(0.0, 40.0, 22.0)
        clean = simulate_day(PARAMS, z, ROOM, PROFILE)
        noisy = simulate_day(PARAMS, z, ROOM, PROFILE, noise_seed=9, energy_noise_std=1.0)
        np.testing.assert_array_equal(clean.temp_trace, noisy.temp_trace)
        assert clean.energy != noisy.energy

    def test_default_calibration_energy_range(self):
        """預設控制器在寒冷日的能耗落在數 kWh 到十幾 kWh"""
        z = Context(ambient_temp=0.0, irradiation=30.0, init_temp=22.5)
        outcome = simulate_day(PARAMS, z, ROOM, PROFILE)
        assert 5.0 < outcome.energy < 30.0


class TestIntradayModulation:
    def test_daily_means_preserved(self):
        room = RoomModel(intraday_modulation=True)
        z = Context(ambient_temp=4.0, irradiation=90.0, init_temp=22.0)
        samples = [forcing_at(step * room.timestep, z, room) for step in range(room.steps_per_day)]
        assert np.mean([a for a, _ in samples]) == pytest.approx(4.0, abs=1e-9)
        assert np.mean([i for _, i in samples]) == pytest.approx(90.0, rel=0.02)
        assert min(i for _, i in samples) >= 0.0

    def test_constant_forcing_by_default(self):
        z = Context(ambient_temp=4.0, irradiation=90.0, init_temp=22.0)
        assert forcing_at(123, z, ROOM) == (4.0, 90.0)
        assert not math.isnan(forcing_at(900, z, RoomModel(intraday_modulation=True))[0])


def random_case(seed):
    rng = np.random.default_rng(seed)
    params = ControllerParams(rng.uniform(0.05, 5), rng.uniform(0.01, 2), rng.uniform(20, 26),
                              rng.uniform(0, 540))
    z = Context(rng.uniform(-15, 20), rng.uniform(0, 300), rng.uniform(5, 35))
    return rng, params, z


class TestRandomizedProperties:
    @pytest.mark.parametrize("seed", range(200))
    def test_control_is_truncated_pi_law(self, seed):
        rng = np.random.default_rng(seed)
        error, integral = rng.uniform(-10, 10), rng.uniform(-10, 10)
        kp, ki = rng.uniform(0, 5), rng.uniform(0, 2)
        u, state = pi_control(error, PiState(integral), kp=kp, ki=ki)
        assert -10.0 <= state.integral <= 10.0
        assert u == pytest.approx(min(max(kp * error + ki * state.integral, 0.0), 1.0))

    @pytest.mark.parametrize("seed", range(200))
    def test_outcomes_nonnegative(self, seed):
        _, params, z = random_case(seed)
        outcome = simulate_day(params, z, ROOM, PROFILE)
        assert outcome.energy >= 0
        assert outcome.discomfort >= 0
        assert np.all((outcome.control_trace >= 0) & (outcome.control_trace <= 1))

    @pytest.mark.parametrize("seed", range(200))
    def test_more_heat_never_cools(self, seed):
        rng = np.random.default_rng(seed)
        temp, ambient, irradiation = rng.uniform(5, 35), rng.uniform(-15, 20), rng.uniform(0, 300)
        low = rng.uniform(0, 1)
        high = rng.uniform(low, 1)
        assert thermal_step(temp, high, ambient, irradiation, ROOM) >= \
            thermal_step(temp, low, ambient, irradiation, ROOM)

    @pytest.mark.parametrize("seed", range(200))
    def test_free_response_approaches_ambient(self, seed):
        rng = np.random.default_rng(seed)
        temp, ambient = rng.uniform(5, 35), rng.uniform(-15, 20)
        start_gap, previous = abs(temp - ambient), abs(temp - ambient)
        for _ in range(300):
            temp = thermal_step(temp, 0.0, ambient, 0.0, ROOM)
            assert abs(temp - ambient) <= previous + 1e-12
            previous = abs(temp - ambient)
        assert previous <= 0.61 * start_gap + 1e-12

    @pytest.mark.parametrize("seed", range(200))
    def test_same_inputs_same_day(self, seed):
        rng, params, z = random_case(seed)
        noise_seed = int(rng.integers(0, 2**31))
        first = simulate_day(params, z, ROOM, PROFILE, noise_seed=noise_seed,
                             energy_noise_std=0.3, discomfort_noise_std=0.3)
        second = simulate_day(params, z, ROOM, PROFILE, noise_seed=noise_seed,
                              energy_noise_std=0.3, discomfort_noise_std=0.3)
        assert first.energy == second.energy
        assert first.discomfort == second.discomfort
        np.testing.assert_array_equal(first.power_trace, second.power_trace)
