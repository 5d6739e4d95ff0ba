"""Link-level simulator and receiver library for asynchronous grant-free
random access with variable-length LDPC-coded command units."""

from .config import (FrameConfig, InvalidConfig, RadioConfig, SimConfig,
                     TrafficConfig, default_config, load_config, validate)

__all__ = [
    "FrameConfig", "RadioConfig", "TrafficConfig", "SimConfig",
    "InvalidConfig", "validate", "default_config", "load_config",
]

__version__ = "0.1.0"
