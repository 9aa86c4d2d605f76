"""Direct feedback alignment with noisy optical random projections, plus a
Renyi differential-privacy accountant for the resulting training mechanism."""

from ._core import (  # noqa: F401
    OpuSim,
    audit_config,
    clip,
    compose,
    epsilon_equal_cov,
    epsilon_pdfa,
    epsilon_saturating,
    offset,
    rdp_to_dp,
    renyi_gaussian,
    scale,
    sensitivity_bound,
    ternarize,
    train_arrays,
)

__all__ = [
    "OpuSim",
    "audit_config",
    "clip",
    "compose",
    "epsilon_equal_cov",
    "epsilon_pdfa",
    "epsilon_saturating",
    "offset",
    "rdp_to_dp",
    "renyi_gaussian",
    "scale",
    "sensitivity_bound",
    "ternarize",
    "train_arrays",
]

__version__ = "0.1.0"
