"""swarmchat: large-group deliberation through relay-linked small subgroups.

A roster is split into conversation-sized subgroups; a relay agent in each
subgroup distills salient human content into insights that a matchmaker
routes wherever they are most novel. Everything a session does lands in an
append-only event log that replays deterministically and feeds the
forensic report and survey statistics tooling.
"""

__version__ = "0.1.0"

from swarmchat.kernels import BACKEND as KERNEL_BACKEND
from swarmchat.model import (
    ChatMessage,
    Insight,
    Mode,
    Participant,
    SessionConfig,
    SessionEvent,
    Subgroup,
    validate_config,
)

__all__ = [
    "KERNEL_BACKEND",
    "ChatMessage",
    "Insight",
    "Mode",
    "Participant",
    "SessionConfig",
    "SessionEvent",
    "Subgroup",
    "validate_config",
    "__version__",
]
