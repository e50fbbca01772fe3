"""Radio map tensor completion: Nasdac, DowJons and a thin-plate-spline baseline."""

from ._radiomap import (
    Autoencoder,
    BoundInputs,
    RadiomapError,
    complete,
    covering_log,
    gap_bound,
    nae,
    recovery_budget,
    simulate,
    sre,
)

__all__ = [
    "Autoencoder",
    "BoundInputs",
    "RadiomapError",
    "complete",
    "covering_log",
    "gap_bound",
    "nae",
    "recovery_budget",
    "simulate",
    "sre",
]
