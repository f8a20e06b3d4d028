"""Application bootstrap: logging, the message bus and its handlers."""

import logging
import os
from dataclasses import dataclass, replace
from typing import Any, Callable, Generic, Optional, Type, TypeVar

from dotenv import load_dotenv

from hapslink.bus.bus import MessageBus
from hapslink.bus.session import BusSession
from hapslink.link.engine.engine import RunSweepCommand, SweepEngine
from hapslink.messages.commands import Command
from hapslink.messages.events import Event
from hapslink.observability.events import LogLevel
from hapslink.observability.handlers import ConsoleEventHandler, FileEventHandler

logger = logging.getLogger(__name__)

TConfig = TypeVar("TConfig", bound="ApplicationConfig")

_LOG_LEVELS = {
    LogLevel.DEBUG: logging.DEBUG,
    LogLevel.INFO: logging.INFO,
    LogLevel.WARNING: logging.WARNING,
    LogLevel.ERROR: logging.ERROR,
    LogLevel.CRITICAL: logging.CRITICAL,
}


def setup_basic_logging(level: LogLevel = LogLevel.INFO) -> None:
    """Configure console logging at ``level``."""
    logging_level = _LOG_LEVELS.get(level, logging.INFO)
    logging.basicConfig(
        level=logging_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    logging.getLogger().setLevel(logging_level)
    logger.info(f"Basic logging configured with level {logging.getLevelName(logging_level)}")


def _env_flag(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes", "on")


@dataclass
class ApplicationConfig:
    """Process-wide settings; scenario parameters live in the INI file instead."""

    name: str = "hapslink"
    description: str = "HAPS-assisted RF/FSO multicast performance sweeps"

    log_level: LogLevel = LogLevel.WARNING

    enable_console_handler: bool = False
    enable_file_handler: bool = False
    file_handler_log_dir: str = "logs"
    file_handler_log_filename: Optional[str] = None

    # Default Monte Carlo worker count when the config file does not set one
    mc_workers: Optional[int] = None

    @classmethod
    def from_env(cls, **overrides: Any) -> "ApplicationConfig":
        """Defaults, then ``.env`` / environment, then explicit ``overrides``.

        Recognised variables: ``HAPSLINK_LOG_LEVEL``, ``HAPSLINK_LOG_DIR``,
        ``HAPSLINK_EVENT_LOG`` (0/1) and ``HAPSLINK_MC_WORKERS``.

        Raises:
            ValueError: an environment value cannot be parsed.
        """
        load_dotenv()
        config = cls()
        if level := os.getenv("HAPSLINK_LOG_LEVEL"):
            config = replace(config, log_level=LogLevel(level.strip().lower()))
        if log_dir := os.getenv("HAPSLINK_LOG_DIR"):
            config = replace(config, file_handler_log_dir=log_dir)
        if event_log := os.getenv("HAPSLINK_EVENT_LOG"):
            config = replace(config, enable_file_handler=_env_flag(event_log))
        if workers := os.getenv("HAPSLINK_MC_WORKERS"):
            count = int(workers)
            if count < 1:
                raise ValueError(f"HAPSLINK_MC_WORKERS must be >= 1, got {count}")
            config = replace(config, mc_workers=count)
        return replace(config, **overrides)


class ApplicationBootstrap(Generic[TConfig]):
    """Starts the bus and wires the observability handlers and the sweep engine."""

    def __init__(self, config: Optional[TConfig] = None) -> None:
        self.config: ApplicationConfig = config if config is not None else ApplicationConfig()
        setup_basic_logging(level=self.config.log_level)
        self.message_bus = MessageBus()
        self.engine = SweepEngine()

    async def bootstrap(self) -> None:
        logger.info("Application bootstrap started")
        await self.message_bus.start()
        self._register_observability_handlers()
        self._register_command_handlers()
        logger.info("Application bootstrap completed")

    async def shutdown(self) -> None:
        """Stop the bus and drop every handler registered on it."""
        await self.message_bus.reset()
        logger.info("Application shutdown complete")

    def _register_observability_handlers(self) -> None:
        if self.config.enable_console_handler:
            self.message_bus.register_observability_handler(ConsoleEventHandler())
        if self.config.enable_file_handler:
            self.message_bus.register_observability_handler(
                FileEventHandler(
                    log_dir=self.config.file_handler_log_dir,
                    filename=self.config.file_handler_log_filename,
                )
            )

    def _register_command_handlers(self) -> None:
        self.message_bus.register_command_handler(RunSweepCommand, self.engine.handle_command)

    def register_event_handler(
        self, event_type: Type[Event], handler: Callable[[Any], Any], session_id: str = "ROOT"
    ) -> None:
        self.message_bus.register_event_handler(event_type, handler, session_id)

    def register_command_handler(
        self, command_type: Type[Command], handler: Callable[[Any], Any]
    ) -> None:
        self.message_bus.register_command_handler(command_type, handler)

    def create_session(self) -> BusSession:
        return self.message_bus.create_session()
