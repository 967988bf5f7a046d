"""Exception types shared across the package."""


class DomainError(ValueError):
    """State or argument outside the admissible region of the actuator model."""


class ScenarioError(ValueError):
    """Malformed or invalid scenario description."""
