"""Async message bus carrying sweep commands and progress events.

Front ends never call the sweep engine directly: they execute a command on the bus
and listen for the events the engine publishes while it works.
"""

import asyncio
import inspect
import logging
import traceback
from typing import (
    Any,
    Awaitable,
    Callable,
    Dict,
    List,
    Optional,
    Type,
    TypeVar,
    Union,
    cast,
)

from hapslink.bus.session import BusSession
from hapslink.link import SessionID
from hapslink.messages.commands import Command, CommandResult
from hapslink.messages.events import (
    CommandResultEvent,
    CommandStartedEvent,
    Event,
    EventHandlerFailedEvent,
)
from hapslink.observability.handlers.base import ObservabilityEventHandler

logger = logging.getLogger(__name__)

CommandType = TypeVar("CommandType", bound=Command)
CommandHandler = Callable[[Any], CommandResult]
AsyncCommandHandler = Callable[[Any], Awaitable[CommandResult]]
EventType = TypeVar("EventType", bound=Event)
EventHandler = Callable[[Any], None]
AsyncEventHandler = Callable[[Any], Awaitable[None]]

AsyncOrSyncCommandHandler = Union[AsyncCommandHandler, CommandHandler]

ROOT = SessionID("ROOT")
GLOBAL = SessionID("GLOBAL")


class MessageBus:
    """Singleton command/event bus.

    Command handlers are keyed by (session, command type); a session without its own
    handler falls back to ROOT. Event handlers registered under GLOBAL see every event
    of their type, and every event goes to the observability handlers.
    """

    _instance: Optional["MessageBus"] = None

    def __new__(cls, *args: Any, **kwargs: Any) -> "MessageBus":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self) -> None:
        if getattr(self, "_initialized", False):
            return
        self._command_handlers: Dict[SessionID, Dict[Type[Command], AsyncCommandHandler]] = {}
        self._event_handlers: Dict[SessionID, Dict[Type[Event], List[AsyncEventHandler]]] = {}
        self._event_queue: Optional[asyncio.Queue[Event]] = None
        self._processing_task: Optional[asyncio.Task[None]] = None
        self._observability_handlers: List[ObservabilityEventHandler] = []
        self._suppress_event_errors: bool = True
        self.event_handler_errors: List[Exception] = []
        self._initialized = True
        logger.debug("MessageBus initialized")

    async def reset(self) -> None:
        """Stop the bus and drop every registered handler."""
        await self.stop()
        self._initialized = False
        self.__init__()  # type: ignore[misc]
        logger.debug("MessageBus reset")

    def suppress_event_errors(self) -> None:
        self._suppress_event_errors = True

    def unsuppress_event_errors(self) -> None:
        self._suppress_event_errors = False

    def create_session(self, id_input: Optional[str] = None) -> BusSession:
        return BusSession(id=id_input)

    @property
    def running(self) -> bool:
        return self._processing_task is not None

    async def start(self) -> None:
        if self._processing_task is not None:
            logger.warning("MessageBus already running")
            return
        if self._event_queue is None:
            self._event_queue = asyncio.Queue()
        self._processing_task = asyncio.create_task(self._process_events())
        logger.info("MessageBus started")

    async def stop(self) -> None:
        if self._processing_task is None:
            logger.debug("MessageBus already stopped or never started")
            return
        await self.ensure_events_processed()
        self._processing_task.cancel()
        try:
            await asyncio.wait_for(self._processing_task, timeout=2.0)
        except asyncio.CancelledError:
            logger.debug("MessageBus task cancelled")
        except Exception as e:
            logger.exception(f"Error during MessageBus shutdown: {e}")
        finally:
            self._processing_task = None
            self._event_queue = None
        logger.info("MessageBus stopped")

    def register_observability_handler(self, handler: ObservabilityEventHandler) -> None:
        self._observability_handlers.append(handler)

    def register_command_handler(
        self,
        command_type: Type[CommandType],
        handler: AsyncOrSyncCommandHandler,
        session_id: str = "ROOT",
    ) -> None:
        """Register the single handler for ``command_type`` in ``session_id``.

        Raises:
            ValueError: a handler is already registered for this command and session.
        """
        session = SessionID(session_id)
        handlers = self._command_handlers.setdefault(session, {})
        if command_type in handlers:
            raise ValueError(
                f"Command handler for {command_type.__name__} already registered in session {session}"
            )
        if not inspect.iscoroutinefunction(handler):
            handler = self._wrap_command_handler_as_async(cast(CommandHandler, handler))
        handlers[command_type] = cast(AsyncCommandHandler, handler)
        logger.debug(f"Registered command handler for {command_type.__name__} in session {session}")

    def register_event_handler(
        self,
        event_type: Type[EventType],
        handler: Union[AsyncEventHandler, EventHandler],
        session_id: str = "ROOT",
    ) -> None:
        session = SessionID(session_id)
        if not inspect.iscoroutinefunction(handler):
            handler = self._wrap_event_handler_as_async(cast(EventHandler, handler))
        self._event_handlers.setdefault(session, {}).setdefault(event_type, []).append(
            cast(AsyncEventHandler, handler)
        )
        logger.debug(f"Registered event handler for {event_type.__name__} in session {session}")

    def unregister_session_handlers(self, session_id: str) -> None:
        session = SessionID(session_id)
        removed_commands = len(self._command_handlers.pop(session, {}))
        removed_events = sum(len(h) for h in self._event_handlers.pop(session, {}).values())
        logger.debug(
            f"Unregistered {removed_commands} command and {removed_events} event handlers "
            f"for session {session}"
        )

    def unregister_command_handler(
        self, command_type: Type[CommandType], session_id: str = "ROOT"
    ) -> None:
        session = SessionID(session_id)
        if session not in self._command_handlers:
            raise ValueError(f"No command handlers to unregister for session {session}")
        self._command_handlers[session].pop(command_type, None)

    def unregister_event_handlers(
        self, event_type: Type[EventType], session_id: str = "ROOT"
    ) -> None:
        session = SessionID(session_id)
        if session not in self._event_handlers:
            raise ValueError(f"No event handlers to unregister for session {session}")
        self._event_handlers[session].pop(event_type, None)

    # --- Command execution and event publishing ---

    async def execute(self, command: Command) -> CommandResult:
        """Run the handler registered for ``command`` and return its result.

        A handler exception becomes ``CommandResult(success=False)`` with the error
        rendered as ``"<Type>: <message>"``.

        Raises:
            ValueError: no handler is registered for the command type.
        """
        command_type = type(command)
        handler = self._command_handlers.get(command.session_id, {}).get(command_type)
        if handler is None:
            handler = self._command_handlers.get(ROOT, {}).get(command_type)
            if handler is not None and command.session_id != ROOT:
                logger.debug(
                    f"Defaulting to ROOT command handler for {command_type.__name__} "
                    f"in session {command.session_id}"
                )
        if handler is None:
            logger.error(f"No handler registered for command type {command_type.__name__}")
            raise ValueError(f"No handler registered for command {command_type.__name__}")

        try:
            logger.info(f"Executing command {command_type.__name__}")
            await self.publish(CommandStartedEvent(command=command, session_id=command.session_id))
            result = await handler(command)
            await self.publish(
                CommandResultEvent(command_result=result, session_id=command.session_id)
            )
            return result
        except Exception as e:
            logger.exception(f"Error executing command {command_type.__name__}: {e}")
            failed = CommandResult(
                success=False,
                command_id=command.command_id,
                error=f"{type(e).__name__}: {e!s}",
                metadata={"exception_details": traceback.format_exc()},
                session_id=command.session_id,
            )
            await self.publish(
                CommandResultEvent(command_result=failed, session_id=command.session_id)
            )
            return failed

    async def publish(self, event: Event, await_processing: bool = True) -> None:
        logger.debug(f"Publishing event {type(event).__name__} in session {event.session_id}")
        if self._event_queue is None:
            logger.error(f"Event queue is not initialized; dropping {type(event).__name__}")
            return
        await self._event_queue.put(event)
        if await_processing:
            await self.ensure_events_processed()

    async def _process_events(self) -> None:
        logger.debug("Event processing loop starting")
        while True:
            try:
                queue = self._event_queue
                if queue is None:
                    await asyncio.sleep(0.1)
                    continue
                event = await queue.get()
                try:
                    await self._handle_event(event)
                except asyncio.CancelledError:
                    raise
                except Exception:
                    logger.exception(f"Error processing event {type(event).__name__}")
                finally:
                    queue.task_done()
            except asyncio.CancelledError:
                logger.debug("Event processing loop cancelled")
                raise

    async def ensure_events_processed(self) -> None:
        """Handle every queued event before returning."""
        if self._event_queue is None:
            return
        while not self._event_queue.empty():
            event = self._event_queue.get_nowait()
            try:
                await self._handle_event(event)
            finally:
                self._event_queue.task_done()

    def _handlers_for(self, event: Event) -> List[AsyncEventHandler]:
        event_type = type(event)
        # A session without handlers of its own inherits ROOT's
        owner = event.session_id if event.session_id in self._event_handlers else ROOT
        handlers = list(self._event_handlers.get(owner, {}).get(event_type, []))
        if owner != GLOBAL:
            handlers.extend(self._event_handlers.get(GLOBAL, {}).get(event_type, []))
        return handlers

    async def _handle_event(self, event: Event) -> None:
        event_type = type(event)
        for observer in self._observability_handlers:
            try:
                await observer.handle(event)
            except Exception as e:
                logger.exception(f"Error in observability handler {observer!r}: {e}")
                if not self._suppress_event_errors:
                    raise
                self.event_handler_errors.append(e)

        handlers = self._handlers_for(event)
        if not handlers:
            return
        results = await asyncio.gather(*(h(event) for h in handlers), return_exceptions=True)
        for handler, result in zip(handlers, results):
            if not isinstance(result, Exception):
                continue
            self.event_handler_errors.append(result)
            name = getattr(handler, "__qualname__", repr(handler))
            logger.error(f"Error in handler '{name}' for {event_type.__name__}: {result}")
            if not self._suppress_event_errors:
                raise result
            if not isinstance(event, EventHandlerFailedEvent):
                await self.publish(
                    EventHandlerFailedEvent(
                        event=event, handler=name, exception=result, session_id=event.session_id
                    )
                )

    def _wrap_event_handler_as_async(self, handler: EventHandler) -> AsyncEventHandler:
        async def async_wrapper(event: Event) -> None:
            return handler(event)

        async_wrapper.function = handler  # type: ignore[attr-defined]
        async_wrapper.__qualname__ = getattr(handler, "__qualname__", "handler")
        return async_wrapper

    def _wrap_command_handler_as_async(self, handler: CommandHandler) -> AsyncCommandHandler:
        async def async_wrapper(command: Command) -> CommandResult:
            return handler(command)

        async_wrapper.function = handler  # type: ignore[attr-defined]
        return async_wrapper
