"""Exception hierarchy shared across the package.

ValidationError covers malformed or inconsistent inputs (network files,
scenario files, parameter bounds); the CLI maps it to exit code 2.
Runtime failures (unreachable targets, unattainable integral matches) map
to exit code 3.
"""


class GuidesimError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(GuidesimError):
    """Invalid input data or configuration."""


class NetworkFormatError(ValidationError):
    """Network file does not conform to the CSV schema."""


class ScenarioError(ValidationError):
    """Scenario file is malformed or violates a config invariant."""


class UnreachableError(GuidesimError):
    """No path exists between the requested nodes."""


class MatchIntegralError(GuidesimError):
    """Requested total influence cannot be met within parameter bounds."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket
