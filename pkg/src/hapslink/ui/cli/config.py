from dataclasses import dataclass
from typing import Any, Dict, Self, Type, cast


class Singleton:
    """Base class whose subclasses have exactly one instance each."""

    _instances: Dict[Type["Singleton"], "Singleton"] = {}

    def __new__(cls: Type[Self], *args: Any, **kwargs: Any) -> Self:
        if cls not in cls._instances:
            cls._instances[cls] = super(Singleton, cls).__new__(cls)
        return cast(Self, cls._instances[cls])


@dataclass
class CLIConfig(Singleton):
    """Presentation settings shared by every CLI component."""

    max_width: int = 120
    padding: tuple[int, int] = (0, 1)
    # Significant digits shown in the summary table; the CSV keeps full precision
    significant_digits: int = 4
