"""File handler appending every event to a JSONL log."""

import asyncio
import json
import logging
from dataclasses import asdict
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from hapslink.messages.events import Event
from hapslink.observability.handlers.base import ObservabilityEventHandler

logger = logging.getLogger(__name__)


class FileEventHandler(ObservabilityEventHandler):
    """Writes one JSON object per line, tagged with ``event_type``."""

    def __init__(
        self, log_dir: str = "logs", filename: Optional[str] = None, **kwargs: Any
    ) -> None:
        super().__init__(**kwargs)
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        if filename:
            self.log_file = self.log_dir / filename
        else:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            self.log_file = self.log_dir / f"events_{timestamp}.jsonl"
        self._file_lock = asyncio.Lock()
        logger.info(f"FileEventHandler logging events to: {self.log_file}")

    async def handle(self, event: Event) -> None:
        try:
            record = self._event_to_dict(event)
            record["event_type"] = type(event).__name__
            line = json.dumps(record, default=str)
            async with self._file_lock:
                with self.log_file.open("a", encoding="utf-8") as f:
                    f.write(line + "\n")
        except Exception as e:
            logger.error(f"Error writing event data to file: {e}", exc_info=True)

    def _event_to_dict(self, event: Any) -> Dict[str, Any]:
        try:
            return asdict(
                event, dict_factory=lambda x: {k: self._convert_value(v) for k, v in x}
            )
        except TypeError:
            pass
        if hasattr(event, "__dict__"):
            return {k: self._convert_value(v) for k, v in vars(event).items()}
        logger.warning(f"Could not serialize {type(event).__name__}, using repr()")
        return {"event_repr": repr(event)}

    def _convert_value(self, value: Any) -> Any:
        if isinstance(value, Enum):
            return value.value
        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, np.ndarray):
            return value.tolist()
        if isinstance(value, float) and not np.isfinite(value):
            return str(value)
        if isinstance(value, (str, int, float, bool, type(None))):
            return value
        if isinstance(value, dict):
            return {str(k): self._convert_value(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [self._convert_value(item) for item in value]
        if hasattr(value, "__dataclass_fields__"):
            try:
                return self._event_to_dict(value)
            except Exception:
                return str(value)
        return str(value)
