"""Exception types raised by the simulator."""


class ConfigError(ValueError):
    """Invalid system or experiment configuration."""


class EstimationError(ValueError):
    """Interferer estimation has no well-defined solution (e.g. all-zero residuals)."""


class DetectionError(ValueError):
    """Payload detection failed, e.g. a rank-deficient channel matrix."""


class FronthaulParseError(ValueError):
    """A serialized fronthaul stream could not be decoded."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
