from hapslink.link.engine.engine import RunSweepCommand, SweepEngine
from hapslink.link.engine.sweep import SweepSpec

__all__ = ["RunSweepCommand", "SweepEngine", "SweepSpec"]
