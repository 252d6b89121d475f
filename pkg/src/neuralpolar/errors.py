"""Exception types shared across the package."""


class NeuralPolarError(Exception):
    """Base class for package errors."""


class ConfigurationError(NeuralPolarError):
    """Invalid code/model/experiment configuration."""


class DomainError(NeuralPolarError):
    """Input outside an operation's domain (non-binary bits, NaN LLRs, ...)."""


class DegenerateInputError(NeuralPolarError):
    """Input is degenerate for the requested operation (e.g. zero-variance batch)."""


class TrainingDivergedError(NeuralPolarError):
    """Training loss became non-finite.

    Carries diagnostics and, when available, the path of the last good
    checkpoint written before divergence.
    """

    def __init__(self, message, last_checkpoint=None, diagnostics=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
        self.diagnostics = diagnostics or {}
