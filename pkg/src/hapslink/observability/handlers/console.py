"""Console handler summarising each event in one log line."""

import logging
from typing import Any

from hapslink.messages.events import Event
from hapslink.observability.events import LogLevel, ObservabilityBaseEvent
from hapslink.observability.handlers.base import ObservabilityEventHandler

logger = logging.getLogger(__name__)

_LEVELS = {
    LogLevel.DEBUG: logging.DEBUG,
    LogLevel.INFO: logging.INFO,
    LogLevel.WARNING: logging.WARNING,
    LogLevel.ERROR: logging.ERROR,
    LogLevel.CRITICAL: logging.CRITICAL,
}

# Event fields worth echoing when present
_SUMMARY_KEYS = ("point_index", "variable", "value", "metric", "hop", "points")


class ConsoleEventHandler(ObservabilityEventHandler):
    """Logs ``[EVENT] <Type>, ID=<id>, Session=<session>`` plus a few key fields."""

    def __init__(self, level: int = logging.INFO, **kwargs: Any) -> None:
        super().__init__(**kwargs)
        self.level = level

    async def handle(self, event: Event) -> None:
        message = f"[EVENT] {type(event).__name__}, ID={event.event_id}"
        log_level = self.level
        try:
            if event.session_id:
                message += f", Session={event.session_id}"
            data = self.event_to_dict(event)
            shown = [f"{k}={data[k]}" for k in _SUMMARY_KEYS if data.get(k) is not None]
            if shown:
                message += f" [{', '.join(shown)}]"
            if isinstance(event, ObservabilityBaseEvent):
                log_level = _LEVELS[event.level]
                if event.message:
                    message += f": {event.message}"
        except Exception as e:
            logger.error(f"Error formatting event in ConsoleEventHandler: {e}", exc_info=True)
        logger.log(log_level, message)
