"""Trajectory termination codes shared by the kernel backends."""

from enum import IntEnum


class TrajectoryStatus(IntEnum):
    OK = 0
    POLE = 1
    STEP_UNDERFLOW = 2
    MAX_STEPS = 3
    OVERFLOW = 4


STATUS_NAMES = {int(s): s.name.lower() for s in TrajectoryStatus}
