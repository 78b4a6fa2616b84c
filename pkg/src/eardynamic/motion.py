"""Head-posture classification from six-axis IMU traces.

Device axes: x points out of the face (forward), y to the left, z up.
Positive pitch is nose-up; positive yaw is a counter-clockwise turn seen
from above, i.e. towards the wearer's left.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidTraceError

PITCH_THRESHOLD_DEG = 30.0
YAW_THRESHOLD_DEG = 30.0
MOVING_RMS_GYRO = 0.3  # rad/s
MIN_TRACE_SECONDS = 0.2
MIN_TRACE_SAMPLES = 10
MIN_GRAVITY = 2.0  # m/s^2
GRAVITY = 9.81


class HeadPosture(enum.Enum):
    FORWARD = "FORWARD"
    LEFT = "LEFT"
    RIGHT = "RIGHT"
    UP = "UP"
    DOWN = "DOWN"


POSTURES = tuple(HeadPosture)


@dataclass(frozen=True)
class ImuSample:
    t: float
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]


@dataclass(frozen=True)
class MotionState:
    posture: HeadPosture
    moving: bool


@dataclass(frozen=True)
class MotionAngles:
    pitch_deg: float
    yaw_deg: float
    rms_gyro: float


def _arrays(trace):
    t = np.array([s.t for s in trace], dtype=np.float64)
    acc = np.array([s.accel for s in trace], dtype=np.float64).reshape(-1, 3)
    gyr = np.array([s.gyro for s in trace], dtype=np.float64).reshape(-1, 3)
    return t, acc, gyr


def motion_angles(trace) -> MotionAngles:
    trace = list(trace)
    if len(trace) < MIN_TRACE_SAMPLES:
        raise InsufficientDataError(f"trace has {len(trace)} samples, need >= {MIN_TRACE_SAMPLES}")
    t, acc, gyr = _arrays(trace)
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(acc)) and np.all(np.isfinite(gyr))):
        raise InvalidTraceError("trace contains non-finite values")
    if np.any(np.diff(t) < 0):
        raise InvalidTraceError("trace samples are not time-ordered")
    if t[-1] - t[0] < MIN_TRACE_SECONDS:
        raise InsufficientDataError(f"trace spans {t[-1] - t[0]:.3f} s, need >= {MIN_TRACE_SECONDS} s")
    g = acc.mean(axis=0)
    g_norm = np.linalg.norm(g)
    if g_norm < MIN_GRAVITY:
        raise InvalidTraceError(f"mean acceleration magnitude {g_norm:.3f} m/s^2 is below {MIN_GRAVITY}")
    pitch = math.degrees(math.asin(float(np.clip(g[0] / g_norm, -1.0, 1.0))))
    yaw = math.degrees(float(np.trapezoid(gyr[:, 2], t)))
    rms = float(np.sqrt(np.mean(np.sum(gyr ** 2, axis=1))))
    return MotionAngles(pitch, yaw, rms)


def posture_from_angles(pitch_deg: float, yaw_deg: float) -> HeadPosture:
    if pitch_deg > PITCH_THRESHOLD_DEG:
        return HeadPosture.UP
    if pitch_deg < -PITCH_THRESHOLD_DEG:
        return HeadPosture.DOWN
    if yaw_deg > YAW_THRESHOLD_DEG:
        return HeadPosture.LEFT
    if yaw_deg < -YAW_THRESHOLD_DEG:
        return HeadPosture.RIGHT
    return HeadPosture.FORWARD


def classify_posture(trace) -> MotionState:
    """Posture from mean gravity direction (pitch) and integrated z-gyro (yaw)."""
    angles = motion_angles(trace)
    return MotionState(posture_from_angles(angles.pitch_deg, angles.yaw_deg),
                       angles.rms_gyro > MOVING_RMS_GYRO)


def parse_imu_trace(text: str) -> list[ImuSample]:
    samples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 7:
            raise InvalidTraceError(f"line {lineno}: expected 7 tab-separated fields, got {len(fields)}")
        try:
            v = [float(f) for f in fields]
        except ValueError:
            raise InvalidTraceError(f"line {lineno}: non-numeric field") from None
        if not all(math.isfinite(x) for x in v):
            raise InvalidTraceError(f"line {lineno}: non-finite value")
        samples.append(ImuSample(v[0], (v[1], v[2], v[3]), (v[4], v[5], v[6])))
    return samples


def format_imu_trace(trace) -> str:
    out = ["# t\tax\tay\taz\tgx\tgy\tgz\n"]
    for s in trace:
        out.append("\t".join(f"{x:.6f}" for x in (s.t, *s.accel, *s.gyro)) + "\n")
    return "".join(out)


def synthetic_trace(posture: HeadPosture, duration: float, rate: float = 100.0,
                    turn_rate: float = 1.2, turn_time: float = 0.6,
                    tilt_deg: float = 45.0, jitter: float = 0.0, rng=None) -> list[ImuSample]:
    """IMU trace for a held posture.

    UP/DOWN appear as a constant gravity tilt; LEFT/RIGHT as a z-gyro turn of
    ``turn_rate * turn_time`` rad at the start of the window, then stillness.
    """
    n = max(int(round(duration * rate)) + 1, MIN_TRACE_SAMPLES)
    t = np.arange(n) / rate
    pitch = {HeadPosture.UP: tilt_deg, HeadPosture.DOWN: -tilt_deg}.get(posture, 0.0)
    p = math.radians(pitch)
    acc = np.tile([GRAVITY * math.sin(p), 0.0, GRAVITY * math.cos(p)], (n, 1))
    gyr = np.zeros((n, 3))
    sign = {HeadPosture.LEFT: 1.0, HeadPosture.RIGHT: -1.0}.get(posture, 0.0)
    if sign:
        gyr[t < turn_time, 2] = sign * turn_rate
    if jitter > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        acc = acc + rng.normal(0.0, jitter, acc.shape)
        gyr = gyr + rng.normal(0.0, jitter * 0.01, gyr.shape)
    return [ImuSample(float(t[i]), tuple(acc[i]), tuple(gyr[i])) for i in range(n)]
