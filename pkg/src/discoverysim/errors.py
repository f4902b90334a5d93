"""Exception types shared across the toolkit."""


class DiscoverySimError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(DiscoverySimError):
    """Invalid configuration, arguments, or population setup."""


class GenerationError(DiscoverySimError):
    """Synthetic data generation produced a degenerate sample."""


class FitError(DiscoverySimError):
    """Least-squares fit failed (rank deficiency or an exact fit)."""


class EstimationError(DiscoverySimError):
    """Monte Carlo estimation exceeded its failure budget."""


class AnalysisError(DiscoverySimError):
    """Markov-chain analysis hit a numerical failure."""
