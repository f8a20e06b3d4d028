"""Events published on the message bus.

Events record something that has happened; any number of handlers may react.
"""

import inspect
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from types import FrameType
from typing import Any, Dict, Optional

from hapslink.link import SessionID
from hapslink.messages.commands import Command, CommandResult


@dataclass
class Event:
    event_id: str = field(default_factory=lambda: str(uuid.uuid4()))
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat())
    metadata: Dict[str, Any] = field(default_factory=dict)
    session_id: SessionID = field(default_factory=lambda: SessionID("ROOT"))

    def __post_init__(self) -> None:
        frame: Optional[FrameType] = inspect.currentframe()
        caller = frame.f_back if frame is not None else None
        if caller is not None:
            module = caller.f_globals.get("__name__", "unknown")
            self.metadata["emitted_from"] = (
                f"{module}.{caller.f_code.co_name}:{caller.f_lineno}"
            )
        else:
            self.metadata["emitted_from"] = "unknown"


@dataclass
class EventHandlerFailedEvent(Event):
    event: Optional[Event] = None
    handler: Optional[str] = None
    exception: Optional[Exception] = None


@dataclass
class CommandStartedEvent(Event):
    command: Optional[Command] = None


@dataclass
class CommandResultEvent(Event):
    command_result: Optional[CommandResult] = None
