"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A pipeline configuration is missing or malformed.

    The message names the offending field path (e.g. ``training.ks[0]``).
    """


class MissingArtifactError(FileNotFoundError):
    """A pipeline stage requires an artifact that an earlier stage has
    not produced; the message names the missing dependency."""


class NumericalDegeneracyError(ValueError):
    """A computation hit a degenerate numeric case that must not be
    silently papered over (empty topic, zero-probability token,
    infinite divergence)."""
