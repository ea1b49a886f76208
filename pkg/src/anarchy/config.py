"""Shared numeric tolerances."""
from __future__ import annotations

import os

DEFAULT_TOLERANCE = 1e-9
# Construction-time aggregate identities are checked much tighter.
IDENTITY_RTOL = 1e-12


def comparison_tolerance() -> float:
    """Default relative tolerance for equilibrium and bound comparisons.

    Override with the ANARCHY_TOL environment variable (a float literal).
    """
    raw = os.environ.get("ANARCHY_TOL")
    return float(raw) if raw is not None else DEFAULT_TOLERANCE
