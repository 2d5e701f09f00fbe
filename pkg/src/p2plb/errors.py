"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(SimulationError):
    """Invalid or inconsistent configuration values."""


class UnknownPeerError(SimulationError, KeyError):
    """Peer id not present in the topology."""


class UnknownContentError(SimulationError, KeyError):
    """Content keyword not present in the catalog."""


class RoutingError(SimulationError):
    """No live peer can serve the requested content."""
