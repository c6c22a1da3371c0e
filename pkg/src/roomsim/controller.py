"""Wheel-level control: heading PID plus a distance-scaled speed envelope.

The drive law commands both wheels near a common amplitude A and steers by
splitting it: left = A*(1+u), right = A*(1-u). A positive heading error
(target counter-clockwise of the current heading) must speed up the right
wheel, so the PID consumes the negated heading error. Commands are integers;
rounding happens last so the quantization never feeds back into the PID.
"""
from __future__ import annotations

import math

from .geometry import Pose2D, wrap_angle
from .world import ControlConfig, RobotState


def heading_error(pose: Pose2D, vx: float, vy: float) -> float:
    """Smallest signed rotation from the pose heading to the direction of (vx, vy).

    Positive means the target direction lies counter-clockwise. Zero vector
    maps to zero error so a stopping robot holds its heading.
    """
    if vx == 0.0 and vy == 0.0:
        return 0.0
    return wrap_angle(math.atan2(vy, vx) - pose.heading)


def pid_update(robot: RobotState, error: float, cfg: ControlConfig, dt: float) -> float:
    """One PID step over the robot's stored controller state; returns the clamped output."""
    robot.pid_integral += error * dt
    if robot.pid_integral > cfg.integral_clamp:
        robot.pid_integral = cfg.integral_clamp
    elif robot.pid_integral < -cfg.integral_clamp:
        robot.pid_integral = -cfg.integral_clamp
    d_raw = (error - robot.pid_prev_error) / dt
    robot.pid_derivative = cfg.derivative_smoothing * robot.pid_derivative + (1.0 - cfg.derivative_smoothing) * d_raw
    robot.pid_prev_error = error
    u = cfg.k_p * error + cfg.k_i * robot.pid_integral + cfg.k_d * robot.pid_derivative
    if u > cfg.output_clamp:
        return cfg.output_clamp
    if u < -cfg.output_clamp:
        return -cfg.output_clamp
    return u


def reset_pid(robot: RobotState) -> None:
    robot.pid_integral = 0.0
    robot.pid_prev_error = 0.0
    robot.pid_derivative = 0.0


def speed_envelope(dd: float, cfg: ControlConfig, cmd_max: int) -> float:
    """Common wheel amplitude for a remaining distance dd.

    Zero inside the stop radius, then linear in dd (already at a useful floor
    just past the threshold), saturating at the full command.
    """
    if dd < cfg.d_stop:
        return 0.0
    a = cfg.k_a * dd
    if a > cmd_max:
        return float(cmd_max)
    return a


def _round_cmd(x: float, cmd_max: int) -> int:
    v = math.floor(x + 0.5)
    if v > cmd_max:
        return cmd_max
    if v < -cmd_max:
        return -cmd_max
    return int(v)


def wheel_commands(u: float, amplitude: float, cmd_max: int) -> tuple[int, int]:
    """Split an amplitude across the wheel pair according to the steer output u."""
    left = _round_cmd(amplitude * (1.0 + u), cmd_max)
    right = _round_cmd(amplitude * (1.0 - u), cmd_max)
    return (left, right)


def drive_step(
    robot: RobotState,
    v_cmd: tuple[float, float],
    dist_remaining: float,
    cfg: ControlConfig,
    dt: float,
) -> tuple[int, int]:
    """Turn a planned velocity into integer wheel commands.

    The planner's speed reductions are honored by shrinking the effective
    distance fed to the envelope, so yielding to traffic and braking at the
    goal go through the same amplitude law.
    """
    vx, vy = v_cmd
    speed = math.sqrt(vx * vx + vy * vy)
    if speed <= 0.0 or dist_remaining < cfg.d_stop:
        reset_pid(robot)
        return (0, 0)
    da = heading_error(robot.est_pose, vx, vy)
    u = pid_update(robot, -da, cfg, dt)
    dd_eff = min(dist_remaining, cfg.d_sat * speed / robot.spec.max_speed)
    amplitude = speed_envelope(dd_eff, cfg, robot.spec.wheel_cmd_max)
    return wheel_commands(u, amplitude, robot.spec.wheel_cmd_max)


def turn_step(robot: RobotState, target_heading: float, cfg: ControlConfig, tol: float) -> tuple[int, int, bool]:
    """Rotate in place toward a heading; returns (left, right, aligned)."""
    err = wrap_angle(target_heading - robot.est_pose.heading)
    if abs(err) < tol:
        return (0, 0, True)
    if err > 0.0:
        return (-cfg.turn_cmd, cfg.turn_cmd, False)
    return (cfg.turn_cmd, -cfg.turn_cmd, False)
