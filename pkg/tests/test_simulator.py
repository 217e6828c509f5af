import math

import numpy as np
import pytest
from scipy import signal

from msk_pinn import simulator as S
from msk_pinn.metrics import pearson_cc
from msk_pinn.physics import DynamicsParams, eom_residual_values


def small_config(**overrides):
    return S.knee_config(duration=2.0, **overrides)


class TestSimConfig:
    def test_presets_build(self):
        assert S.wrist_config().n_muscles == 5
        assert S.knee_config().n_muscles == 2

    def test_f_max_arity_checked(self):
        with pytest.raises(S.SimulationError, match="f_max"):
            S.SimConfig(dynamics=S.knee_config().dynamics, f_max=(100.0,))

    def test_dt_rate_consistency(self):
        with pytest.raises(S.SimulationError, match="1/rate"):
            S.knee_config(rate=500.0)

    def test_dict_roundtrip(self):
        cfg = S.wrist_config(snr=math.inf)
        again = S.SimConfig.from_dict(cfg.to_dict())
        assert again == cfg


class TestGenExcitation:
    def test_zero_amplitude(self):
        spec = S.ExcitationSpec(amplitude=0.0)
        u = S.gen_excitation(spec, 1000, 2, 1e-3, 1.0, seed=0)
        assert np.array_equal(u, np.zeros((1000, 2)))

    def test_range_and_phase_opposition(self):
        spec = S.ExcitationSpec(jitter=0.0)
        u = S.gen_excitation(spec, 4000, 2, 1e-3, 1.0, seed=0)
        assert u.min() >= 0.0 and u.max() <= 1.0
        # antagonists never burst simultaneously for half-sine bursts
        assert (u[:, 0] * u[:, 1]).max() < 1e-12

    def test_speed_doubles_burst_count(self):
        spec = S.ExcitationSpec(jitter=0.0)

        def onsets(speed):
            u = S.gen_excitation(spec, 8000, 2, 1e-3, speed, seed=0)[:, 0]
            return int(np.sum((u[1:] > 0) & (u[:-1] == 0)))

        assert onsets(2.0) == 2 * onsets(1.0)

    def test_determinism(self):
        spec = S.ExcitationSpec()
        a = S.gen_excitation(spec, 500, 3, 1e-3, 1.0, seed=9)
        b = S.gen_excitation(spec, 500, 3, 1e-3, 1.0, seed=9)
        assert np.array_equal(a, b)

    def test_smoothed_noise_kind(self):
        spec = S.ExcitationSpec(kind="smoothed-noise")
        u = S.gen_excitation(spec, 2000, 2, 1e-3, 1.0, seed=3)
        assert u.min() >= 0.0 and u.max() <= spec.amplitude * (1 + spec.jitter) + 1e-12

    def test_invalid_muscle_count(self):
        with pytest.raises(S.SimulationError, match="muscles"):
            S.gen_excitation(S.ExcitationSpec(), 100, 1, 1e-3, 1.0, 0)


class TestActivationDynamics:
    def test_constant_input_converges(self):
        dt, tau = 1e-3, 0.03
        c = 0.8
        u = np.full((3000, 1), c)
        u[0] = 0.0
        a = S.activation_dynamics(u, tau, dt)
        assert abs(a[-1, 0] - c) < c * math.exp(-3.0 / tau) + 1e-12

    def test_zero_stays_zero(self):
        a = S.activation_dynamics(np.zeros((100, 2)), 0.03, 1e-3)
        assert np.array_equal(a, np.zeros((100, 2)))

    def test_step_matches_closed_form(self):
        dt, tau = 1e-3, 0.05
        n = 2000
        u = np.zeros((n, 1))
        u[1:] = 1.0  # a[0] = u[0] = 0, step starts driving from index 1
        a = S.activation_dynamics(u, tau, dt)
        t = np.arange(n) * dt
        expected = np.where(t >= dt, 1.0 - np.exp(-(t - dt) / tau), 0.0)
        assert np.abs(a[:, 0] - expected).max() < 1e-10

    def test_tau_must_exceed_dt(self):
        with pytest.raises(S.SimulationError, match="tau_act"):
            S.activation_dynamics(np.zeros((10, 1)), 1e-4, 1e-3)


class TestIntegrateTrial:
    def test_no_forcing_no_gravity(self):
        cfg = small_config()
        cfg = S.knee_config(duration=2.0, dynamics=DynamicsParams(
            0.05, 1.5, 0.0, (0.04, -0.04), 1e-3))
        res = S.integrate_trial(np.zeros((cfg.n_samples, 2)), cfg)
        assert np.array_equal(res.theta, np.zeros(cfg.n_samples))

    def test_terminal_velocity(self):
        m, b = 0.05, 1.5
        params = DynamicsParams(m, b, 0.0, (0.04, -0.04), 1e-3)
        cfg = S.SimConfig(dynamics=params, f_max=(150.0, 150.0),
                          duration=max(1.0, 5 * m / b + 0.5))
        tau_star = 0.04 * 150.0 * 0.5  # constant activation 0.5 on muscle 0
        a = np.zeros((cfg.n_samples, 2))
        a[:, 0] = 0.5
        res = S.integrate_trial(a, cfg)
        v_limit = tau_star / b
        assert abs(res.theta_dot[-1] - v_limit) < 0.01 * v_limit

    def test_energy_audit_without_damping(self):
        params = DynamicsParams(0.05, 0.0, 2.0, (0.04, -0.04), 1e-3)
        cfg = S.SimConfig(dynamics=params, f_max=(80.0, 80.0), duration=2.0,
                          excitation=S.ExcitationSpec(amplitude=0.4, jitter=0.0))
        u = S.gen_excitation(cfg.excitation, cfg.n_samples, 2, 1e-3, 1.0, 0)
        a = S.activation_dynamics(u, cfg.tau_act, 1e-3)
        res = S.integrate_trial(a, cfg)
        m, g = params.inertia, params.gravity_coeff
        energy = 0.5 * m * res.theta_dot**2 + g * (1 - np.cos(res.theta))
        drift = np.abs(energy - energy[0] - res.work)
        scale = max(np.abs(res.work).max(), energy.max())
        assert drift.max() / scale < 1e-6

    def test_instability_detected(self):
        params = DynamicsParams(1e-6, 0.0, 0.0, (0.04, -0.04), 1e-3)
        cfg = S.SimConfig(dynamics=params, f_max=(150.0, 150.0), duration=2.0)
        a = np.zeros((cfg.n_samples, 2))
        a[:, 0] = 1.0
        with pytest.raises(S.SimulationError, match="unstable"):
            S.integrate_trial(a, cfg)


class TestSynthEmg:
    def test_silent_muscle_clean_recording(self):
        raw = S.synth_emg(np.zeros((1000, 2)), 1000.0, (20.0, 450.0), math.inf, 0)
        assert np.array_equal(raw, np.zeros((1000, 2)))

    def test_full_activation_variance(self):
        n = 100_000
        raw = S.synth_emg(np.ones((n, 1)), 1000.0, (20.0, 450.0), math.inf, 1)
        assert abs(raw.var() - 1.0) < 0.05

    def test_nyquist_violation(self):
        with pytest.raises(S.SimulationError, match="Nyquist"):
            S.synth_emg(np.ones((100, 1)), 800.0, (20.0, 450.0), 20.0, 0)

    def test_determinism(self):
        a = np.random.default_rng(0).uniform(size=(500, 2))
        x = S.synth_emg(a, 1000.0, (20.0, 450.0), 20.0, 5)
        y = S.synth_emg(a, 1000.0, (20.0, 450.0), 20.0, 5)
        assert np.array_equal(x, y)


class TestEmgPipeline:
    def test_zero_in_zero_out(self):
        env = S.emg_pipeline(np.zeros((2000, 2)), 1000.0, np.ones(2))
        assert np.abs(env).max() == 0.0

    def test_low_frequency_attenuated(self):
        # 5 Hz tone sits below the 20 Hz band-pass corner; forward-backward
        # second-order sections give >= 20 dB attenuation there
        rate = 1000.0
        sos = signal.butter(2, (20.0, 450.0), btype="bandpass", fs=rate, output="sos")
        w, h = signal.sosfreqz(sos, worN=[5.0], fs=rate)
        gain_db = 40 * np.log10(np.abs(h[0]))  # squared response (filtfilt)
        assert gain_db <= -20.0
        t = np.arange(4000) / rate
        tone = np.sin(2 * np.pi * 5.0 * t)[:, None]
        filtered = signal.sosfiltfilt(sos, tone, axis=0)
        interior = slice(500, 3500)  # ignore filtfilt edge transients
        assert np.abs(filtered[interior]).max() <= 10 ** (-20 / 20)

    def test_envelope_tracks_modulator(self):
        rate = 1000.0
        t = np.arange(8000) / rate
        modulator = 0.5 + 0.5 * np.sin(2 * np.pi * 1.0 * t)
        carrier = np.sin(2 * np.pi * 100.0 * t)
        env = S.emg_pipeline((modulator * carrier)[:, None], rate, np.array([1.0]))
        cc = pearson_cc(modulator[500:-500], env[500:-500, 0])
        assert cc > 0.95

    def test_rate_too_low(self):
        with pytest.raises(S.SimulationError, match="too low"):
            S.emg_pipeline(np.zeros((100, 1)), 800.0, np.ones(1))

    def test_mvc_positive(self):
        with pytest.raises(S.SimulationError, match="MVC"):
            S.emg_pipeline(np.zeros((100, 1)), 1000.0, np.zeros(1))


class TestGenerateDataset:
    def test_single_trial(self):
        trials = S.generate_dataset(small_config(), 1, [1.0], seed=0)
        assert len(trials) == 1
        assert trials[0].n_muscles == 2

    def test_speed_partition(self):
        speeds = [0.75, 1.0, 1.25, 1.5]
        trials = S.generate_dataset(small_config(), 2, speeds, seed=0)
        assert len(trials) == 8
        assert sorted({t.speed for t in trials}) == speeds

    def test_every_trial_passes_residual_audit(self):
        cfg = small_config()
        trials = S.generate_dataset(cfg, 2, [1.0, 1.5], seed=3)
        for tr in trials:
            res = S.validate_trial(tr, cfg.dynamics)
            assert res < 1e-3 * np.abs(tr.tau).max()

    def test_determinism(self):
        cfg = small_config()
        a = S.generate_dataset(cfg, 1, [1.0], seed=11)[0]
        b = S.generate_dataset(cfg, 1, [1.0], seed=11)[0]
        assert np.array_equal(a.theta, b.theta)
        assert np.array_equal(a.emg_raw, b.emg_raw)
        assert np.array_equal(a.emg_env, b.emg_env)

    def test_halving_dt_shrinks_residual(self):
        def max_residual(rate):
            from dataclasses import replace
            dyn = DynamicsParams(0.05, 1.5, 2.0, (0.04, -0.04), 1.0 / rate)
            cfg = S.SimConfig(dynamics=dyn, f_max=(150.0, 150.0), duration=2.0,
                              rate=rate, excitation=S.ExcitationSpec(jitter=0.0))
            tr = S.generate_trial(cfg, 1.0, 5, np.ones(2))
            return np.abs(eom_residual_values(tr.theta, tr.forces, dyn)).max()

        coarse = max_residual(1000.0)
        fine = max_residual(2000.0)
        assert coarse / fine >= 3.0

    def test_envelope_correlates_with_activation(self):
        cfg = small_config()
        tr = S.generate_dataset(cfg, 1, [1.0], seed=4)[0]
        for n in range(tr.n_muscles):
            assert pearson_cc(tr.activation[:, n], tr.emg_env[:, n]) > 0.9


class TestResample:
    def test_resampled_trial_shape_and_dt(self):
        cfg = small_config(resample_frames=100)
        tr = S.generate_dataset(cfg, 1, [1.0], seed=0)[0]
        assert tr.n_samples == 100
        assert tr.dt == pytest.approx(2.0 / 100)

    def test_resampled_trial_still_physical(self):
        cfg = small_config(resample_frames=100)
        tr = S.generate_dataset(cfg, 1, [1.0], seed=0)[0]
        dyn = S.knee_config().dynamics
        res = S.validate_trial(tr, dyn)
        assert np.isfinite(res)


class TestTrialIO:
    def test_csv_roundtrip(self, tmp_path):
        cfg = small_config()
        tr = S.generate_dataset(cfg, 1, [1.25], seed=8)[0]
        path = tmp_path / "trial.csv"
        S.write_trial_csv(tr, path)
        back = S.read_trial_csv(path)
        assert back.dt == tr.dt
        assert back.speed == tr.speed
        assert back.seed == tr.seed
        assert np.array_equal(back.theta, tr.theta)
        assert np.array_equal(back.forces, tr.forces)
        assert np.array_equal(back.emg_env, tr.emg_env)

    def test_csv_header_schema(self, tmp_path):
        cfg = small_config()
        tr = S.generate_dataset(cfg, 1, [1.0], seed=1)[0]
        path = tmp_path / "trial.csv"
        S.write_trial_csv(tr, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#")
        header = next(l for l in lines if not l.startswith("#"))
        assert header == "time,emg_raw_1,emg_raw_2,emg_env_1,emg_env_2,force_1,force_2,theta,tau"

    def test_manifest_roundtrip(self, tmp_path):
        cfg = small_config()
        entries = [{"file": "trial_000.csv", "speed": 1.0, "seed": 3}]
        S.write_manifest(tmp_path / "manifest.json", cfg, 7, entries)
        data = S.read_manifest(tmp_path / "manifest.json")
        assert data["seed"] == 7
        assert data["config"] == cfg

    def test_corrupt_manifest_names_field(self, tmp_path):
        import json
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"format_version": 1, "seed": 0, "trials": []}))
        with pytest.raises(S.SimulationError, match="config"):
            S.read_manifest(path)
