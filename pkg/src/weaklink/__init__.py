"""Simulation and analysis tools for weak-link RF-SQUID resonators."""
from .circuit import (
    CircuitSpec,
    JJLink,
    PhysicalElements,
    QPSLink,
    capacitance_to_charging_energy,
    cpr_current,
    cpr_curvature,
    cpr_energy,
    energy_to_inductance,
    inductance_to_energy,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    CriticalFluxNotFound,
    DomainError,
    MergedWellsError,
    ResonanceError,
    SingularPointError,
    VanishedWellError,
    WeakLinkError,
)

__version__ = "0.1.0"
