class InvalidInputError(ValueError):
    """Arguments violate a dimensional or range constraint."""


class DegenerateInputError(InvalidInputError):
    """Point configuration is (numerically) affinely dependent or otherwise singular."""


class UnsupportedTheoremError(InvalidInputError):
    """Requested operation is not defined for this theorem/configuration."""
