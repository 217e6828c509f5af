"""Synthetic trial generation: excitation, activation, forward dynamics, EMG.

Each trial is produced by driving a single-DoF joint model forward in time
with RK4 and synthesizing raw surface EMG from the muscle activations, so
that the stored (envelope, force, angle, torque) channels are physically
consistent by construction. Every generated trial is audited against the
equation-of-motion residual before it is accepted.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import signal

from .physics import DynamicsParams, eom_residual_values


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class ExcitationSpec:
    """Volitional drive pattern for the muscle set."""

    kind: str = "sinusoid-burst"       # or "smoothed-noise"
    amplitude: float = 0.6
    base_frequency: float = 1.0        # Hz at speed 1.0
    jitter: float = 0.1                # per-trial relative amplitude jitter

    def __post_init__(self):
        if self.kind not in ("sinusoid-burst", "smoothed-noise"):
            raise SimulationError(f"unknown excitation kind '{self.kind}'")
        if not 0.0 <= self.amplitude <= 1.0:
            raise SimulationError(f"excitation amplitude must be in [0, 1], got {self.amplitude}")
        if self.base_frequency <= 0:
            raise SimulationError("excitation base_frequency must be > 0")


@dataclass(frozen=True)
class SimConfig:
    dynamics: DynamicsParams
    f_max: tuple[float, ...]                 # N, per muscle
    tau_act: float = 0.03                    # s, excitation-to-activation time constant
    excitation: ExcitationSpec = ExcitationSpec()
    duration: float = 4.0                    # s
    rate: float = 1000.0                     # Hz, EMG sampling rate
    noise_band: tuple[float, float] = (20.0, 450.0)  # Hz, EMG carrier band
    snr: float = 20.0                        # signal-to-measurement-noise power ratio
    resample_frames: int = 0                 # 0 keeps physical time

    def __post_init__(self):
        if len(self.f_max) != self.dynamics.n_muscles:
            raise SimulationError(
                f"f_max has {len(self.f_max)} entries for {self.dynamics.n_muscles} muscles"
            )
        if any(f <= 0 for f in self.f_max):
            raise SimulationError("every f_max must be > 0")
        if self.tau_act <= self.dynamics.dt:
            raise SimulationError("tau_act must exceed the sampling interval")
        if self.duration * self.rate < 3:
            raise SimulationError("trial must contain at least 3 samples")
        if abs(self.dynamics.dt * self.rate - 1.0) > 1e-9:
            raise SimulationError("dynamics.dt must equal 1/rate")
        if self.noise_band[0] <= 0 or self.noise_band[1] <= self.noise_band[0]:
            raise SimulationError(f"invalid noise band {self.noise_band}")

    @property
    def n_muscles(self) -> int:
        return self.dynamics.n_muscles

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.rate))

    def to_dict(self) -> dict:
        d = self.dynamics
        return {
            "dynamics": {
                "inertia": d.inertia,
                "damping": d.damping,
                "gravity_coeff": d.gravity_coeff,
                "moment_arms": list(d.moment_arms),
                "dt": d.dt,
            },
            "f_max": list(self.f_max),
            "tau_act": self.tau_act,
            "excitation": {
                "kind": self.excitation.kind,
                "amplitude": self.excitation.amplitude,
                "base_frequency": self.excitation.base_frequency,
                "jitter": self.excitation.jitter,
            },
            "duration": self.duration,
            "rate": self.rate,
            "noise_band": list(self.noise_band),
            "snr": self.snr if math.isfinite(self.snr) else "inf",
            "resample_frames": self.resample_frames,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        try:
            dyn = data["dynamics"]
            params = DynamicsParams(
                inertia=float(dyn["inertia"]),
                damping=float(dyn["damping"]),
                gravity_coeff=float(dyn["gravity_coeff"]),
                moment_arms=tuple(float(r) for r in dyn["moment_arms"]),
                dt=float(dyn["dt"]),
            )
            exc = data["excitation"]
            snr = data["snr"]
            return cls(
                dynamics=params,
                f_max=tuple(float(f) for f in data["f_max"]),
                tau_act=float(data["tau_act"]),
                excitation=ExcitationSpec(
                    kind=str(exc["kind"]),
                    amplitude=float(exc["amplitude"]),
                    base_frequency=float(exc["base_frequency"]),
                    jitter=float(exc["jitter"]),
                ),
                duration=float(data["duration"]),
                rate=float(data["rate"]),
                noise_band=tuple(float(x) for x in data["noise_band"]),
                snr=math.inf if snr == "inf" else float(snr),
                resample_frames=int(data["resample_frames"]),
            )
        except KeyError as exc_key:
            raise SimulationError(f"simulator config missing field {exc_key}") from None


def wrist_config(**overrides) -> SimConfig:
    """Five-muscle wrist-like preset (chosen defaults, not measurements).

    Damping and F_max are sized so bursts of activation produce bounded
    flexion/extension of roughly +/- 1 rad rather than continuous rotation.
    """
    params = DynamicsParams(
        inertia=0.02, damping=0.5, gravity_coeff=4.0,
        moment_arms=(0.03, 0.025, -0.03, -0.025, -0.02), dt=1e-3,
    )
    # gravity-dominated plant: quasi-static theta ~ asin(tau / g), bounded
    return replace(SimConfig(dynamics=params, f_max=(120.0,) * 5,
                             excitation=ExcitationSpec(amplitude=0.5, jitter=0.3)),
                   **overrides)


def knee_config(**overrides) -> SimConfig:
    """Two-muscle knee-like preset (flexor/extensor pair)."""
    params = DynamicsParams(
        inertia=0.05, damping=1.5, gravity_coeff=2.0,
        moment_arms=(0.04, -0.04), dt=1e-3,
    )
    return replace(SimConfig(dynamics=params, f_max=(150.0, 150.0),
                             excitation=ExcitationSpec(amplitude=0.5)), **overrides)


@dataclass
class Trial:
    """One simulated motion episode; channels are aligned on the same grid."""

    dt: float
    time: np.ndarray                  # [T] s
    forces: np.ndarray                # [T, N] N
    theta: np.ndarray                 # [T] rad
    tau: np.ndarray                   # [T] N m
    emg_raw: np.ndarray               # [T, N]
    emg_env: np.ndarray               # [T, N] in [0, 1]
    speed: float
    seed: int
    excitation: np.ndarray | None = None   # [T, N] in [0, 1]
    activation: np.ndarray | None = None   # [T, N] in [0, 1]

    @property
    def n_samples(self) -> int:
        return self.theta.shape[0]

    @property
    def n_muscles(self) -> int:
        return self.forces.shape[1]


def validate_trial(trial: Trial, params: DynamicsParams,
                   residual_rel_tol: float | None = None) -> float:
    """Check Trial invariants; returns the max interior EOM residual.

    The residual tolerance defaults to 1e-3 * max|tau| at dt = 1e-3 and
    scales with dt^2 (the stencil truncation order).
    """
    if trial.forces.min() < 0:
        raise SimulationError("trial has negative muscle force")
    for name, arr in (("theta", trial.theta), ("forces", trial.forces),
                      ("tau", trial.tau), ("envelope", trial.emg_env)):
        if not np.all(np.isfinite(arr)):
            raise SimulationError(f"trial channel '{name}' has non-finite values")
    if trial.emg_env.min() < 0 or trial.emg_env.max() > 1:
        raise SimulationError("EMG envelope outside [0, 1]")
    params_at_dt = replace(params, dt=trial.dt)
    residual = np.abs(eom_residual_values(trial.theta, trial.forces, params_at_dt)).max()
    if residual_rel_tol is None:
        residual_rel_tol = 1e-3 * (trial.dt / 1e-3) ** 2
    tol = residual_rel_tol * np.abs(trial.tau).max()
    if residual > tol:
        raise SimulationError(
            f"trial violates equation of motion: residual {residual:.3e} > {tol:.3e}"
        )
    return float(residual)


# ---------------------------------------------------------------------------
# excitation and activation
# ---------------------------------------------------------------------------

def gen_excitation(spec: ExcitationSpec, n_samples: int, n_muscles: int,
                   dt: float, speed: float, seed: int,
                   phases: tuple[float, ...] | None = None) -> np.ndarray:
    """Excitation u[T, N] in [0, 1]; antagonist pairs are phase-opposed and
    `speed` scales the burst frequency."""
    if not 2 <= n_muscles <= 5:
        raise SimulationError(f"need 2 to 5 muscles, got {n_muscles}")
    rng = np.random.default_rng(seed)
    if phases is None:
        phases = tuple(0.0 if n < (n_muscles + 1) // 2 else math.pi
                       for n in range(n_muscles))
    t = np.arange(n_samples) * dt
    amp = spec.amplitude * (1.0 + spec.jitter * rng.uniform(-1, 1, size=n_muscles))
    amp = np.clip(amp, 0.0, 1.0)
    if spec.amplitude == 0.0:
        return np.zeros((n_samples, n_muscles))
    if spec.kind == "sinusoid-burst":
        freq = spec.base_frequency * speed
        u = np.stack(
            [amp[n] * np.maximum(0.0, np.sin(2 * math.pi * freq * t + phases[n]))
             for n in range(n_muscles)],
            axis=1,
        )
    else:  # smoothed-noise
        cutoff = spec.base_frequency * speed
        sos = signal.butter(2, cutoff, btype="low", fs=1.0 / dt, output="sos")
        raw = rng.standard_normal((n_samples, n_muscles))
        smooth = signal.sosfiltfilt(sos, raw, axis=0)
        smooth = np.abs(smooth)
        peak = smooth.max(axis=0)
        peak[peak == 0] = 1.0
        u = amp * smooth / peak
    return np.clip(u, 0.0, 1.0)


def activation_dynamics(u: np.ndarray, tau_act: float, dt: float) -> np.ndarray:
    """First-order excitation-to-activation lag, integrated with the exact
    exponential (zero-order hold) step: a[t+1] = u[t] + (a[t] - u[t]) e^(-dt/tau)."""
    if tau_act <= dt:
        raise SimulationError("tau_act must exceed dt")
    decay = math.exp(-dt / tau_act)
    # a[t+1] = (1 - decay) u[t] + decay a[t]  -> first-order IIR
    b = [0.0, 1.0 - decay]
    a_coef = [1.0, -decay]
    zi = u[0][None, :]  # start from a[0] = u[0]
    out, _ = signal.lfilter(b, a_coef, u, axis=0, zi=zi)
    out[0] = u[0]
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# forward dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrationResult:
    forces: np.ndarray      # [T, N]
    theta: np.ndarray       # [T]
    theta_dot: np.ndarray   # [T]
    tau: np.ndarray         # [T]
    work: np.ndarray        # [T], integral of tau * theta_dot


def integrate_trial(activation: np.ndarray, config: SimConfig) -> IntegrationResult:
    """RK4 integration of the joint model under activation-proportional forces.

    The torque profile is held piecewise linear between samples; work done by
    the joint torque is integrated alongside the state for energy audits.
    """
    params = config.dynamics
    forces = activation * np.asarray(config.f_max)
    tau = forces @ np.asarray(params.moment_arms)
    n = forces.shape[0]
    dt = params.dt
    m, damping, grav = params.inertia, params.damping, params.gravity_coeff

    theta = np.zeros(n)
    vel = np.zeros(n)
    work = np.zeros(n)

    def acc(th, v, torque_now):
        return (torque_now - damping * v - grav * math.sin(th)) / m

    for i in range(n - 1):
        t0, t1 = tau[i], tau[i + 1]
        tm = 0.5 * (t0 + t1)
        th, v, w = theta[i], vel[i], work[i]

        k1x, k1v, k1w = v, acc(theta[i], v, t0), t0 * v
        x2, v2 = th + 0.5 * dt * k1x, v + 0.5 * dt * k1v
        k2x, k2v, k2w = v2, acc(x2, v2, tm), tm * v2
        x3, v3 = th + 0.5 * dt * k2x, v + 0.5 * dt * k2v
        k3x, k3v, k3w = v3, acc(x3, v3, tm), tm * v3
        x4, v4 = th + dt * k3x, v + dt * k3v
        k4x, k4v, k4w = v4, acc(x4, v4, t1), t1 * v4

        theta[i + 1] = th + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vel[i + 1] = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        work[i + 1] = w + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        if abs(theta[i + 1]) > 1e3:
            raise SimulationError(
                f"integration unstable (|theta| > 1e3 rad at step {i + 1}); "
                f"config: {config.to_dict()}"
            )
    return IntegrationResult(forces, theta, vel, tau, work)


# ---------------------------------------------------------------------------
# EMG synthesis and conditioning
# ---------------------------------------------------------------------------

def synth_emg(activation: np.ndarray, rate: float, noise_band: tuple[float, float],
              snr: float, seed: int) -> np.ndarray:
    """Raw EMG: activation-modulated bandlimited carrier plus measurement noise."""
    if rate < 2.0 * noise_band[1]:
        raise SimulationError(
            f"sampling rate {rate} Hz violates Nyquist for band edge {noise_band[1]} Hz"
        )
    rng = np.random.default_rng(seed)
    n, n_muscles = activation.shape
    sos = signal.butter(2, noise_band, btype="bandpass", fs=rate, output="sos")
    carrier = signal.sosfiltfilt(sos, rng.standard_normal((n, n_muscles)), axis=0)
    carrier = carrier / carrier.std(axis=0)
    raw = activation * carrier
    if math.isfinite(snr):
        noise_std = math.sqrt(float(np.mean(carrier.var(axis=0))) / snr)
        raw = raw + noise_std * rng.standard_normal((n, n_muscles))
    return raw


def emg_pipeline(emg_raw: np.ndarray, rate: float, mvc_reference) -> np.ndarray:
    """EMG conditioning: 20-450 Hz band-pass (zero phase), full-wave
    rectification, 6 Hz low-pass (zero phase), normalization by the maximum
    voluntary contraction reference, clipped to [0, 1]."""
    if rate <= 900.0:
        raise SimulationError(f"sampling rate {rate} Hz too low for the 20-450 Hz band")
    mvc = np.asarray(mvc_reference, dtype=np.float64)
    if np.any(mvc <= 0):
        raise SimulationError("MVC reference must be positive")
    band = signal.butter(2, (20.0, 450.0), btype="bandpass", fs=rate, output="sos")
    low = signal.butter(2, 6.0, btype="low", fs=rate, output="sos")
    x = signal.sosfiltfilt(band, emg_raw, axis=0)
    x = np.abs(x)
    x = signal.sosfiltfilt(low, x, axis=0)
    return np.clip(x / mvc, 0.0, 1.0)


def mvc_calibration(config: SimConfig, seed: int) -> np.ndarray:
    """Per-muscle envelope ceiling from a dedicated max-excitation trial."""
    n = config.n_samples
    u = np.ones((n, config.n_muscles))
    a = activation_dynamics(u, config.tau_act, config.dynamics.dt)
    raw = synth_emg(a, config.rate, config.noise_band, config.snr, seed)
    band = signal.butter(2, (20.0, 450.0), btype="bandpass", fs=config.rate, output="sos")
    low = signal.butter(2, 6.0, btype="low", fs=config.rate, output="sos")
    env = signal.sosfiltfilt(low, np.abs(signal.sosfiltfilt(band, raw, axis=0)), axis=0)
    return env.max(axis=0)


# ---------------------------------------------------------------------------
# dataset generation
# ---------------------------------------------------------------------------

def resample_trial(trial: Trial, frames: int) -> Trial:
    """Linear resampling onto `frames` uniformly spaced points, mirroring
    cycle normalization; the new sampling interval is duration / frames."""
    if frames < 3:
        raise SimulationError("resample needs at least 3 frames")
    duration = trial.n_samples * trial.dt
    new_dt = duration / frames
    new_t = np.arange(frames) * new_dt
    old_t = trial.time

    def interp(arr):
        if arr is None:
            return None
        if arr.ndim == 1:
            return np.interp(new_t, old_t, arr)
        return np.stack([np.interp(new_t, old_t, arr[:, j])
                         for j in range(arr.shape[1])], axis=1)

    return Trial(
        dt=new_dt, time=new_t,
        forces=interp(trial.forces), theta=interp(trial.theta), tau=interp(trial.tau),
        emg_raw=interp(trial.emg_raw), emg_env=interp(trial.emg_env),
        speed=trial.speed, seed=trial.seed,
        excitation=interp(trial.excitation), activation=interp(trial.activation),
    )


def generate_trial(config: SimConfig, speed: float, seed: int,
                   mvc_reference: np.ndarray) -> Trial:
    dt = config.dynamics.dt
    n = config.n_samples
    phases = tuple(0.0 if r > 0 else math.pi for r in config.dynamics.moment_arms)
    u = gen_excitation(config.excitation, n, config.n_muscles, dt, speed, seed, phases)
    a = activation_dynamics(u, config.tau_act, dt)
    result = integrate_trial(a, config)
    raw = synth_emg(a, config.rate, config.noise_band, config.snr, seed + 1)
    env = emg_pipeline(raw, config.rate, mvc_reference)
    trial = Trial(
        dt=dt, time=np.arange(n) * dt,
        forces=result.forces, theta=result.theta, tau=result.tau,
        emg_raw=raw, emg_env=env, speed=speed, seed=seed,
        excitation=u, activation=a,
    )
    validate_trial(trial, config.dynamics)
    if config.resample_frames:
        trial = resample_trial(trial, config.resample_frames)
        validate_trial(trial, config.dynamics)
    return trial


def generate_dataset(config: SimConfig, n_trials: int, speeds, seed: int) -> list[Trial]:
    """`n_trials` trials per speed tag; every trial passes the EOM audit."""
    if n_trials < 1:
        raise SimulationError("n_trials must be >= 1")
    mvc = mvc_calibration(config, seed)
    trials = []
    for si, speed in enumerate(speeds):
        for ti in range(n_trials):
            trial_seed = int(np.random.SeedSequence((seed, si, ti)).generate_state(1)[0])
            trials.append(generate_trial(config, float(speed), trial_seed, mvc))
    return trials


# ---------------------------------------------------------------------------
# on-disk format
# ---------------------------------------------------------------------------

def write_trial_csv(trial: Trial, path) -> None:
    n_muscles = trial.n_muscles
    header = (["time"]
              + [f"emg_raw_{i + 1}" for i in range(n_muscles)]
              + [f"emg_env_{i + 1}" for i in range(n_muscles)]
              + [f"force_{i + 1}" for i in range(n_muscles)]
              + ["theta", "tau"])
    with open(path, "w", newline="") as fh:
        fh.write("# units: time s, emg_raw a.u., emg_env fraction of MVC, "
                 "force N, theta rad, tau N*m\n")
        fh.write(f"# dt {trial.dt!r} s, speed {trial.speed!r}, seed {trial.seed}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        fmt = lambda v: repr(float(v))
        for t in range(trial.n_samples):
            row = ([fmt(trial.time[t])]
                   + [fmt(v) for v in trial.emg_raw[t]]
                   + [fmt(v) for v in trial.emg_env[t]]
                   + [fmt(v) for v in trial.forces[t]]
                   + [fmt(trial.theta[t]), fmt(trial.tau[t])])
            writer.writerow(row)


def read_trial_csv(path) -> Trial:
    path = Path(path)
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    data_lines = []
    for line in lines:
        if line.startswith("#"):
            parts = line[1:].replace(",", " ").split()
            for key in ("dt", "speed", "seed"):
                if key in parts:
                    meta[key] = parts[parts.index(key) + 1]
        else:
            data_lines.append(line)
    if not data_lines or "dt" not in meta:
        raise SimulationError(f"trial file {path} is missing its header comments")
    header = data_lines[0].split(",")
    n_muscles = sum(1 for h in header if h.startswith("force_"))
    values = np.array([[float(v) for v in line.split(",")] for line in data_lines[1:]])
    cols = {name: i for i, name in enumerate(header)}
    raw = values[:, [cols[f"emg_raw_{i + 1}"] for i in range(n_muscles)]]
    env = values[:, [cols[f"emg_env_{i + 1}"] for i in range(n_muscles)]]
    forces = values[:, [cols[f"force_{i + 1}"] for i in range(n_muscles)]]
    return Trial(
        dt=float(meta["dt"]), time=values[:, cols["time"]],
        forces=forces, theta=values[:, cols["theta"]], tau=values[:, cols["tau"]],
        emg_raw=raw, emg_env=env,
        speed=float(meta.get("speed", 0.0)), seed=int(meta.get("seed", 0)),
    )


def write_manifest(path, config: SimConfig, seed: int, entries: list[dict],
                   mvc_reference: np.ndarray | None = None) -> None:
    payload = {
        "format_version": 1,
        "seed": seed,
        "config": config.to_dict(),
        "trials": entries,
    }
    if mvc_reference is not None:
        payload["mvc_reference"] = [float(v) for v in mvc_reference]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    for key in ("format_version", "seed", "config", "trials"):
        if key not in data:
            raise SimulationError(f"manifest {path} is missing field '{key}'")
    for i, entry in enumerate(data["trials"]):
        for key in ("file", "speed", "seed"):
            if key not in entry:
                raise SimulationError(
                    f"manifest {path} trial entry {i} is missing field '{key}'"
                )
    data["config"] = SimConfig.from_dict(data["config"])
    return data


def load_dataset(manifest_path) -> tuple[list[Trial], SimConfig]:
    manifest_path = Path(manifest_path)
    data = read_manifest(manifest_path)
    trials = [read_trial_csv(manifest_path.parent / entry["file"])
              for entry in data["trials"]]
    return trials, data["config"]
