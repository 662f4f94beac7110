"""Range-based relative localization for aerial swarms."""

from ._core import (
    Attitude,
    BodyRates,
    HorizontalVelocity,
    InputVector,
    RelativeState,
    YawRateMode,
    __version__,
    body_to_horizontal_velocity,
    body_to_horizontal_yaw_rate,
    ekf,
    integrate_step,
    obs,
    ranging,
    relative_dynamics,
    rotation,
    sim,
    wrap_angle,
)

__all__ = [
    "Attitude",
    "BodyRates",
    "HorizontalVelocity",
    "InputVector",
    "RelativeState",
    "YawRateMode",
    "__version__",
    "body_to_horizontal_velocity",
    "body_to_horizontal_yaw_rate",
    "ekf",
    "integrate_step",
    "obs",
    "ranging",
    "relative_dynamics",
    "rotation",
    "sim",
    "wrap_angle",
]
