"""Events that exist for observability rather than for the sweep itself."""

from dataclasses import dataclass
from enum import Enum

from hapslink.messages.events import Event


class LogLevel(Enum):
    DEBUG = "debug"
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"
    CRITICAL = "critical"


@dataclass
class ObservabilityBaseEvent(Event):
    """Parent of events that report on the run instead of driving it.

    Handlers registered for this type receive every such event.
    """

    level: LogLevel = LogLevel.INFO
    message: str = ""
