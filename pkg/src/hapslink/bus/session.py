import time
import uuid
from dataclasses import dataclass
from types import TracebackType
from typing import Any, Callable, Optional, Type

from hapslink.link import SessionID
from hapslink.messages.commands import Command, CommandResult
from hapslink.messages.events import Event


@dataclass
class SessionStartEvent(Event):
    pass


@dataclass
class SessionEndEvent(Event):
    error: Optional[BaseException] = None


class BusSession:
    """Groups the handlers of one sweep run; they are unregistered when it ends.

    Usage:
        async with MessageBus().create_session() as session:
            session.register_event_handler(PointEvaluatedEvent, on_point)
            result = await session.execute_with_session(RunSweepCommand(...))
    """

    def __init__(self, id: Optional[str] = None):
        from hapslink.bus.bus import MessageBus

        self.session_id = SessionID(id or str(uuid.uuid4()))
        self.start_time = time.time()
        self.bus = MessageBus()
        self._active = True

    async def __aenter__(self) -> "BusSession":
        await self.bus.publish(SessionStartEvent(session_id=self.session_id))
        return self

    async def __aexit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc_value: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> None:
        if not self._active:
            return
        try:
            self.bus.unregister_session_handlers(self.session_id)
            await self.bus.publish(
                SessionEndEvent(session_id=self.session_id, error=exc_value if exc_type else None)
            )
        finally:
            self._active = False

    @property
    def elapsed(self) -> float:
        return time.time() - self.start_time

    def register_event_handler(
        self, event_type: Type[Event], handler: Callable[[Any], Any]
    ) -> "BusSession":
        if not self._active:
            raise RuntimeError("Cannot register handlers on an inactive session")
        self.bus.register_event_handler(event_type, handler, self.session_id)
        return self

    def register_command_handler(
        self, command_type: Type[Command], handler: Callable[[Any], Any]
    ) -> "BusSession":
        if not self._active:
            raise RuntimeError("Cannot register handlers on an inactive session")
        self.bus.register_command_handler(command_type, handler, self.session_id)
        return self

    async def execute_with_session(self, command: Command) -> CommandResult:
        if not self._active:
            raise RuntimeError("Cannot execute commands on an inactive session")
        command.session_id = self.session_id
        return await self.bus.execute(command)
