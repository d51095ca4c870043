"""
Rigid-body attitude simulation with quaternion kinematics.

Quaternions are scalar-first ``[q0, q1, q2, q3]`` and describe the rotation
from the inertial frame to the body frame. The plant is

    q_dot     = 0.5 * q (x) [0, omega]
    omega_dot = J^-1 (M - omega x (J omega))

propagated with classical RK4 followed by quaternion renormalization.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericOverflowError

STATE_DIM = 7
ACTION_DIM = 3

#: Inertia of the simulated spacecraft in kg m^2. The learner never sees it.
DEFAULT_INERTIA = np.array([
    [1.0, 0.02, 0.02],
    [0.02, 0.8, 0.03],
    [0.02, 0.03, 0.9],
])
DEFAULT_INITIAL_AXIS = (1.0, -0.5, 0.2)
DEFAULT_INITIAL_ANGLE_DEG = 20.0


# =============================================================================
# Quaternion helpers
# =============================================================================

def quat_from_axis_angle(axis, angle):
    """Unit quaternion for a rotation of ``angle`` radians about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if axis.shape != (3,) or not norm > 0.0:
        raise ValueError(f"rotation axis must be a non-zero 3-vector, got {axis!r}")
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / norm))


def quat_multiply(a, b):
    """Hamilton product ``a (x) b`` for scalar-first quaternions."""
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return np.array([
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    """Rotation matrix that maps body-frame vectors into the inertial frame."""
    q0, q1, q2, q3 = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (q2 * q2 + q3 * q3), 2 * (q1 * q2 - q0 * q3), 2 * (q1 * q3 + q0 * q2)],
        [2 * (q1 * q2 + q0 * q3), 1 - 2 * (q1 * q1 + q3 * q3), 2 * (q2 * q3 - q0 * q1)],
        [2 * (q1 * q3 - q0 * q2), 2 * (q2 * q3 + q0 * q1), 1 - 2 * (q1 * q1 + q2 * q2)],
    ])


def attitude_error(q):
    """Principal rotation angle ``2 acos(|q0|)`` of a unit quaternion, in rad."""
    return 2.0 * np.arccos(min(1.0, abs(float(q[0]))))


# =============================================================================
# Domain types
# =============================================================================

@dataclass(frozen=True)
class BodyState:
    """Attitude quaternion plus body angular velocity (rad/s)."""
    q: np.ndarray
    omega: np.ndarray

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[:4].copy(), x[4:7].copy())

    def as_vector(self):
        return np.concatenate((self.q, self.omega))


class InertiaMatrix:
    """Symmetric positive-definite 3x3 inertia with a cached inverse."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise ValueError("inertia matrix must be finite")
        if np.max(np.abs(m - m.T)) > 1e-12:
            raise ValueError("inertia matrix must be symmetric")
        eig = np.linalg.eigvalsh(m)
        if eig.min() <= 0.0:
            raise ValueError(f"inertia matrix must be positive definite, eigenvalues {eig}")
        self.matrix = m
        self.inverse = np.linalg.inv(m)

    def __repr__(self):
        return f"InertiaMatrix({self.matrix.tolist()})"


@dataclass(frozen=True)
class CostWeights:
    k_att: float = 20.0
    k_rate: float = 2.0
    k_torque: float = 0.1

    def __post_init__(self):
        if min(self.k_att, self.k_rate, self.k_torque) < 0:
            raise ValueError("cost weights must be non-negative")


@dataclass(frozen=True)
class TerminationRule:
    attitude_error_limit: float = 2.8
    omega_norm_limit: float = 8.0
    penalty: float = 300.0

    def __post_init__(self):
        if min(self.attitude_error_limit, self.omega_norm_limit, self.penalty) <= 0:
            raise ValueError("termination limits and penalty must be positive")


# =============================================================================
# Equations of motion
# =============================================================================

def _rates(q, w, torque, J, J_inv):
    # 0.5 * q (x) [0, w], expanded
    q0, q1, q2, q3 = q
    w1, w2, w3 = w
    q_dot = 0.5 * np.array([
        -q1 * w1 - q2 * w2 - q3 * w3,
        q0 * w1 + q2 * w3 - q3 * w2,
        q0 * w2 - q1 * w3 + q3 * w1,
        q0 * w3 + q1 * w2 - q2 * w1,
    ])
    w_dot = J_inv @ (torque - np.cross(w, J @ w))
    return q_dot, w_dot


def derivatives(state, torque, inertia):
    """Return ``(quat_rate, omega_rate)`` for the given state and torque."""
    torque = np.asarray(torque, dtype=float)
    return _rates(state.q, state.omega, torque, inertia.matrix, inertia.inverse)


def step(state, torque, inertia, dt):
    """Advance one RK4 step of length ``dt`` and renormalize the quaternion."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    torque = np.asarray(torque, dtype=float)
    J, J_inv = inertia.matrix, inertia.inverse
    q, w = state.q, state.omega

    # overflow is reported below with the offending component
    with np.errstate(over="ignore", invalid="ignore"):
        k1q, k1w = _rates(q, w, torque, J, J_inv)
        k2q, k2w = _rates(q + 0.5 * dt * k1q, w + 0.5 * dt * k1w, torque, J, J_inv)
        k3q, k3w = _rates(q + 0.5 * dt * k2q, w + 0.5 * dt * k2w, torque, J, J_inv)
        k4q, k4w = _rates(q + dt * k3q, w + dt * k3w, torque, J, J_inv)
        q_new = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        w_new = w + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)

    x = np.concatenate((q_new, w_new))
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        names = ("q0", "q1", "q2", "q3", "w1", "w2", "w3")
        raise NumericOverflowError(f"non-finite state component {names[bad[0]]}",
                                   component=names[bad[0]])
    norm = np.sqrt(q_new @ q_new)
    if not norm > 0:
        raise NumericOverflowError("quaternion collapsed to zero norm", component="q")
    return BodyState(q_new / norm, w_new)


def step_cost(state, torque, weights):
    """Quadratic attitude/rate/torque cost; zero only at rest with no torque."""
    torque = np.asarray(torque, dtype=float)
    w = state.omega
    return (weights.k_att * (1.0 - state.q[0] ** 2)
            + weights.k_rate * float(w @ w)
            + weights.k_torque * float(torque @ torque))


def check_termination(state, rule):
    """Return ``"attitude"``, ``"rate"`` or ``None`` (still running)."""
    if attitude_error(state.q) > rule.attitude_error_limit:
        return "attitude"
    if np.sqrt(state.omega @ state.omega) > rule.omega_norm_limit:
        return "rate"
    return None


def initial_state(axis=DEFAULT_INITIAL_AXIS, angle_deg=DEFAULT_INITIAL_ANGLE_DEG, omega=(0.0, 0.0, 0.0)):
    return BodyState(quat_from_axis_angle(axis, np.deg2rad(angle_deg)), np.array(omega, dtype=float))
