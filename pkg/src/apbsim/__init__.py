"""Longitudinal vehicle-safety toolkit.

Braking-profile kinematics, generalized safe distances, a jerk-bounded
preventive-braking controller with a TTC-triggered emergency baseline,
and a deterministic two-car simulator with a verification harness.
"""

from .controllers import (
    AebConfig,
    AebState,
    ConstantSpeed,
    ControllerState,
    DistractedFollower,
    DriverMemory,
    Mode,
    Tailgater,
    aeb_step,
    apb_step,
    driver_step,
    ttc,
    with_failure,
)
from .params import PHYSICAL_ACCEL_CEILING, KinematicState, RssParams
from .profiles import (
    BrakeSchedule,
    ProfileId,
    brake_schedule_jerk,
    distance_traveled,
    jerk_phase_state,
    stop_time,
    velocity_at,
)
from .safety import (
    ComplianceReport,
    ResponseEnvelope,
    SafetyVerdict,
    SceneState,
    check_compliance,
    is_dangerous,
    response_envelope,
    safe_distance_apb,
    safe_distance_generalized,
    safe_distance_rss,
)
from .sim import (
    AdversarialSpec,
    AebControl,
    ApbControl,
    NoControl,
    PopulationSpec,
    RampCommand,
    Scenario,
    SensorModel,
    SweepResult,
    Trace,
    VerificationReport,
    adversarial_front,
    run,
    step,
    sweep,
    verify_no_collision,
    worst_case_front_script,
)

__version__ = "0.1.0"
