"""Single-DoF rigid-body dynamics: torque map, residual, and physics loss.

The joint is modelled as M*th_dd + b*th_d + g_coeff*sin(th) = tau with
tau = sum_n r_n * F_n. Everything here is built from differentiable tensor
operations so the residual can be penalized during network training; the
simulator uses the same functions (through plain arrays) as its audit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass(frozen=True)
class DynamicsParams:
    """Physical model of one rotational joint driven by N muscles."""

    inertia: float                  # kg m^2
    damping: float                  # N m s / rad, viscous C(th, th_d) = damping * th_d
    gravity_coeff: float            # N m, G(th) = gravity_coeff * sin(th)
    moment_arms: tuple[float, ...]  # m, signed, one per muscle
    dt: float                       # s, sampling interval

    def __post_init__(self):
        arms = tuple(float(r) for r in self.moment_arms)
        object.__setattr__(self, "moment_arms", arms)
        if not self.inertia > 0:
            raise ValueError(f"inertia must be > 0, got {self.inertia}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if len(arms) < 1:
            raise ValueError("at least one muscle (moment arm) is required")
        values = (self.inertia, self.damping, self.gravity_coeff, self.dt, *arms)
        if not all(np.isfinite(v) for v in values):
            raise ValueError("dynamics parameters must be finite")

    @property
    def n_muscles(self) -> int:
        return len(self.moment_arms)


@dataclass(frozen=True)
class JointState:
    theta: float       # rad
    theta_dot: float   # rad/s

    def __post_init__(self):
        if not (np.isfinite(self.theta) and np.isfinite(self.theta_dot)):
            raise ValueError("joint state must be finite")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def torque(forces, params: DynamicsParams) -> Tensor:
    """Joint torque tau_t = sum_n r_n * F_t^n for a force sequence [T, N]."""
    f = _as_tensor(forces)
    if f.ndim != 2 or f.shape[1] != params.n_muscles:
        raise T.ShapeError(
            f"torque: forces shape {f.shape} does not match {params.n_muscles} muscles"
        )
    return T.matmul(f, Tensor(np.asarray(params.moment_arms)))


def fd_derivatives(theta, dt: float) -> tuple[Tensor, Tensor]:
    """Central-difference velocity and acceleration on interior points.

    theta[T] -> (theta_dot[T-2], theta_ddot[T-2]); both stencils are linear,
    hence exactly differentiable.
    """
    th = _as_tensor(theta)
    if th.ndim != 1 or th.shape[0] < 3:
        raise T.ShapeError(f"fd_derivatives: need theta[T] with T >= 3, got {th.shape}")
    n = th.shape[0]
    prev = T.narrow(th, 0, n - 2)
    mid = T.narrow(th, 1, n - 2)
    nxt = T.narrow(th, 2, n - 2)
    vel = T.scale(T.sub(nxt, prev), 1.0 / (2.0 * dt))
    acc = T.scale(T.add(T.sub(nxt, T.scale(mid, 2.0)), prev), 1.0 / (dt * dt))
    return vel, acc


def eom_residual(theta, forces, params: DynamicsParams) -> Tensor:
    """Equation-of-motion residual on interior time steps.

    rho_t = M*th_dd_t + b*th_d_t + g_coeff*sin(th_t) - tau_t, length T-2.
    """
    th = _as_tensor(theta)
    f = _as_tensor(forces)
    if f.ndim != 2 or f.shape[0] != th.shape[0]:
        raise T.ShapeError(
            f"eom_residual: forces {f.shape} do not align with theta {th.shape}"
        )
    vel, acc = fd_derivatives(th, params.dt)
    n_interior = th.shape[0] - 2
    th_mid = T.narrow(th, 1, n_interior)
    tau_mid = T.narrow(torque(f, params), 1, n_interior)
    inertial = T.scale(acc, params.inertia)
    viscous = T.scale(vel, params.damping)
    gravity = T.scale(T.sin(th_mid), params.gravity_coeff)
    return T.sub(T.add(T.add(inertial, viscous), gravity), tau_mid)


def physics_loss(theta, forces, params: DynamicsParams) -> Tensor:
    """Mean squared equation-of-motion residual over the T-2 interior points."""
    return T.tmean(T.square(eom_residual(theta, forces, params)))


def eom_residual_values(theta, forces, params: DynamicsParams) -> np.ndarray:
    """Residual as a plain array, for audits outside any training graph."""
    return eom_residual(np.asarray(theta), np.asarray(forces), params).values
