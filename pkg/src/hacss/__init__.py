"""Two-channel anti-DoS gateway and the simulator that measures it.

Unauthenticated traffic meets a per-source rate gate, a frequency-sorted black
list and a ticket engine. Ticketed clients talk to several receive endpoints
that accept only datagrams the server announced in advance, each carrying a
server-sealed stamp over its header.
"""

from .costs import CostTable
from .metrics import capacity, compare, predict_flood_time, predict_stamp_savings
from .scenario import ConfigInvalid, Scenario
from .sim import InvariantViolation, SimReport, run

__version__ = "0.1.0"

__all__ = [
    "ConfigInvalid",
    "CostTable",
    "InvariantViolation",
    "Scenario",
    "SimReport",
    "capacity",
    "compare",
    "predict_flood_time",
    "predict_stamp_savings",
    "run",
]
