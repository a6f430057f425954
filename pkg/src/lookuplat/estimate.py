from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple

from .grid import Point


class Status(str, enum.Enum):
    RESOLVED = "resolved"
    AMBIGUOUS = "ambiguous"
    FALLBACK = "fallback-default"


@dataclass(frozen=True)
class LocationEstimate:
    """Position returned by any localizer.

    ``ops`` counts the abstract work done for this query: table cells touched
    for lookup lateration, grid distance evaluations for fingerprinting,
    solver iterations for lateration.
    """

    position: Point
    status: Status
    candidates_remaining: int = 1
    candidates: Tuple = ()
    ops: int = 0
