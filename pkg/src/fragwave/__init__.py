"""Killed homogeneous fragmentations and one-sided FKPP travelling waves."""
from .dislocation import (
    DislocationMeasure,
    FragmentVector,
    bertoin_condition_holds,
    binary,
    c_of_p,
    critical_exponent,
    critical_speed,
    killing_rate,
    phi,
    phi_prime,
    sample_fragments,
    total_rate,
)
from .errors import (
    FragwaveError,
    NumericalError,
    PopulationExtinct,
    SubcriticalSpeedError,
    ValidationError,
)

__version__ = "0.1.0"
