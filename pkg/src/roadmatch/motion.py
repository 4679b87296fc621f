"""Dead reckoning from rear-wheel increments.

The pose is the rear-axle midpoint and heading; each step advances it along
a chord at the mid-step heading and propagates the covariance to first order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


class StateEstimate:
    """Gaussian pose estimate: ``mean`` is (x, y, theta), ``cov`` is 3x3."""

    __slots__ = ("mean", "cov")

    def __init__(self, mean, cov):
        m = np.array(mean, dtype=float).reshape(3)
        m[2] = wrap_angle(m[2])
        self.mean = m
        self.cov = np.array(cov, dtype=float).reshape(3, 3)

    @property
    def pose(self) -> Pose:
        return Pose(*self.mean)

    def copy(self) -> "StateEstimate":
        return StateEstimate(self.mean.copy(), self.cov.copy())

    def __repr__(self):
        return f"StateEstimate(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


@dataclass(frozen=True)
class OdometryInput:
    d_left: float
    d_right: float


@dataclass(frozen=True)
class ElementaryMotion:
    delta_s: float
    delta_theta: float


@dataclass(frozen=True)
class VehicleParams:
    track: float = 1.5
    sigma_s: float = 0.02  # per meter traveled
    sigma_theta: float = 0.01  # rad per meter traveled

    def __post_init__(self):
        if not self.track > 0:
            raise ValueError("track must be > 0")
        if self.sigma_s < 0 or self.sigma_theta < 0:
            raise ValueError("odometry noise must be >= 0")


def wheel_to_elementary(odo: OdometryInput, params: VehicleParams) -> ElementaryMotion:
    return ElementaryMotion(
        delta_s=(odo.d_left + odo.d_right) / 2,
        delta_theta=(odo.d_right - odo.d_left) / params.track,
    )


def elementary_to_wheel(motion: ElementaryMotion, params: VehicleParams) -> OdometryInput:
    half = motion.delta_theta * params.track / 2
    return OdometryInput(d_left=motion.delta_s - half, d_right=motion.delta_s + half)


def advance(mean: np.ndarray, delta_s: float, delta_theta: float) -> np.ndarray:
    """Mean update of one odometry step."""
    a = mean[2] + delta_theta / 2
    return np.array(
        [
            mean[0] + delta_s * math.cos(a),
            mean[1] + delta_s * math.sin(a),
            wrap_angle(mean[2] + delta_theta),
        ]
    )


def jacobians(theta: float, delta_s: float, delta_theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of :func:`advance` w.r.t. the pose (F) and the input (G)."""
    a = theta + delta_theta / 2
    c, s = math.cos(a), math.sin(a)
    F = np.array([[1.0, 0.0, -delta_s * s], [0.0, 1.0, delta_s * c], [0.0, 0.0, 1.0]])
    G = np.array([[c, -0.5 * delta_s * s], [s, 0.5 * delta_s * c], [0.0, 1.0]])
    return F, G


def odometry_noise(delta_s: float, params: VehicleParams) -> np.ndarray:
    d = abs(delta_s)
    return np.diag([(params.sigma_s * d) ** 2, (params.sigma_theta * d) ** 2])


def predict(state: StateEstimate, motion: ElementaryMotion, params: VehicleParams) -> StateEstimate:
    mean = advance(state.mean, motion.delta_s, motion.delta_theta)
    F, G = jacobians(state.mean[2], motion.delta_s, motion.delta_theta)
    cov = F @ state.cov @ F.T + G @ odometry_noise(motion.delta_s, params) @ G.T
    return StateEstimate(mean, 0.5 * (cov + cov.T))
