"""Base class for observability handlers attached to the message bus."""

from abc import ABC, abstractmethod
from dataclasses import fields, is_dataclass
from typing import Any, Dict

from hapslink.messages.events import Event


class ObservabilityEventHandler(ABC):
    """Receives every event published on the bus, whatever its session."""

    def __init__(self, **kwargs: Any) -> None:
        pass

    @abstractmethod
    async def handle(self, event: Event) -> None:
        """Process one event from the bus."""

    def event_to_dict(self, event: Any) -> Dict[str, Any]:
        """Shallow field mapping of ``event``, falling back to ``repr``."""
        if is_dataclass(event) and not isinstance(event, type):
            return {f.name: getattr(event, f.name) for f in fields(event)}
        if hasattr(event, "__dict__"):
            return {k: v for k, v in vars(event).items() if not k.startswith("_")}
        return {"event_repr": repr(event)}

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"
