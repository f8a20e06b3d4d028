from typing import NewType, Optional

SessionID = NewType("SessionID", str)

# Linear power ratio, never dB.
LinearSNR = NewType("LinearSNR", float)


class HapsLinkError(Exception):
    """Root of every error raised by the link engine."""


class ValidationError(HapsLinkError):
    pass


class ConfigError(HapsLinkError):
    """A scenario file could not be parsed or validated."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        section: Optional[str] = None,
        path: Optional[str] = None,
    ) -> None:
        self.message = message
        self.line = line
        self.section = section
        self.path = path
        super().__init__(str(self))

    def __str__(self) -> str:
        location = self.path or "<config>"
        if self.line is not None:
            location += f":{self.line}"
        where = f" [{self.section}]" if self.section else ""
        return f"{location}:{where} {self.message}"


class ConvergenceError(HapsLinkError):
    pass


class MeijerGConvergenceError(ConvergenceError):
    pass


class QuadratureError(ConvergenceError):
    pass


class UnsupportedError(HapsLinkError):
    pass


class EvaluationError(HapsLinkError):
    """A metric could not be evaluated; names the hop and/or metric at fault."""

    def __init__(
        self, message: str, metric: Optional[str] = None, hop: Optional[str] = None
    ) -> None:
        self.detail = message
        self.metric = metric
        self.hop = hop
        prefix = ""
        if metric:
            prefix += f"metric={metric} "
        if hop:
            prefix += f"hop={hop} "
        super().__init__(f"{prefix}{message}".strip())
