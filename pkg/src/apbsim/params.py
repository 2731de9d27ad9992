"""Core parameter and state types shared across the toolkit.

Sign conventions: brake and jerk parameters are stored as positive
magnitudes; the instantaneous acceleration of a vehicle state is signed
(negative = braking). Velocities are non-negative — vehicles never
reverse in this model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

# Physical ceiling on any acceleration magnitude (~1.5 g). Strong AEB
# systems brake at about this level; nothing in the model may exceed it.
PHYSICAL_ACCEL_CEILING = 15.0


@dataclass(frozen=True)
class KinematicState:
    """Longitudinal state of one vehicle at an instant.

    Attributes:
        x: position along the road, increasing in the travel direction (m).
        v: speed (m/s), always >= 0.
        a: signed acceleration (m/s^2), negative = braking.
    """

    x: float
    v: float
    a: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.v) and math.isfinite(self.a)):
            raise ValueError("kinematic state must be finite")
        if self.v < 0.0:
            raise ValueError(f"speed must be non-negative, got {self.v}")
        if abs(self.a) > PHYSICAL_ACCEL_CEILING + 1e-9:
            raise ValueError(
                f"|a|={abs(self.a):.3f} exceeds the physical ceiling "
                f"{PHYSICAL_ACCEL_CEILING} m/s^2"
            )


@dataclass(frozen=True)
class RssParams:
    """Parameter set governing the safety formulas.

    Attributes:
        rho: response time (s), >= 0. Only the classic rear profile uses it.
        a_max_brake: magnitude of the strongest braking assumed of the
            front car (m/s^2), > 0.
        a_min_brake: magnitude of the braking the rear car guarantees
            once responding (m/s^2), > 0.
        a_max_accel: magnitude of the worst-case rear acceleration during
            the response time (m/s^2), >= 0.
        j_max: magnitude of the braking jerk ramp (m/s^3), > 0.
        ceiling: physical bound on any acceleration magnitude (m/s^2).
    """

    rho: float = 0.0
    a_max_brake: float = 8.0
    a_min_brake: float = 4.0
    a_max_accel: float = 2.0
    j_max: float = 2.0
    ceiling: float = PHYSICAL_ACCEL_CEILING

    def __post_init__(self):
        if self.rho < 0.0:
            raise ValueError("rho must be >= 0")
        if self.a_max_brake <= 0.0:
            raise ValueError("a_max_brake must be > 0")
        if self.a_min_brake <= 0.0:
            raise ValueError("a_min_brake must be > 0")
        if self.a_max_accel < 0.0:
            raise ValueError("a_max_accel must be >= 0")
        if self.j_max <= 0.0:
            raise ValueError("j_max must be > 0")
        if self.ceiling <= 0.0:
            raise ValueError("ceiling must be > 0")
        if self.ceiling > PHYSICAL_ACCEL_CEILING + 1e-9:
            raise ValueError(
                f"ceiling may tighten but not exceed the physical bound "
                f"{PHYSICAL_ACCEL_CEILING} m/s^2"
            )
        for name in ("a_max_brake", "a_min_brake", "a_max_accel"):
            if getattr(self, name) > self.ceiling + 1e-9:
                raise ValueError(f"{name} exceeds the physical ceiling {self.ceiling}")
        if self.a_min_brake > self.a_max_brake:
            # Allowed (the rear may be assumed to out-brake the front) but
            # almost always a configuration mistake, so flag it.
            warnings.warn(
                "a_min_brake > a_max_brake: the rear car is assumed to brake "
                "harder than the front's worst case",
                stacklevel=2,
            )
