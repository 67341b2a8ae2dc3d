from typing import Any, Optional


class SSHInputError(Exception):
    """
    Exception raised when an invalid value is passed to a simulation operation.
    """
    pass


class ConfigError(SSHInputError):
    """Exception raised for invalid run configuration keys or values."""

    def __init__(self, key: str, message: str, valid: Optional[str] = None):
        """
        Initialize the ConfigError.

        Args:
            key (str): The offending configuration key.
            message (str): What is wrong with the value.
            valid (Optional[str]): Description of the accepted values, if any.
        """
        self.key = key
        self.valid = valid
        text = f"Invalid configuration '{key}': {message}"
        if valid:
            text += f" (valid: {valid})"
        super().__init__(text)


class NoEdgePairError(SSHInputError):
    """
    Exception raised when an edge initial state is requested from a reference
    spectrum that does not hold exactly two midgap states.
    """
    pass


class SSHComputationError(Exception):
    """Exception raised when a numerical procedure fails."""

    code = "computation"

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        """
        Initialize the SSHComputationError.

        Args:
            message (str): The error message.
            details (Optional[dict[str, Any]]): Additional error details, if any.
        """
        self.message = message
        self.details = details or {}
        super().__init__(f"SSH computation error ({self.code}): {message}")


class NonConvergenceError(SSHComputationError):
    """The dense eigensolver did not converge."""
    code = "non_convergence"


class DegenerateBulkError(SSHComputationError):
    """The bulk gap is closed (t₋ = t₊), so the Zak phase is undefined."""
    code = "degenerate_bulk"


class IntegrationError(SSHComputationError):
    """A fixed-step integrator violated its trace, positivity or norm bounds."""
    code = "integration"
