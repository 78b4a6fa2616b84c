"""Exception hierarchy shared across the package."""


class EarDynamicError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EarDynamicError, ValueError):
    pass


class EmptyInputError(EarDynamicError, ValueError):
    pass


class ShapeError(EarDynamicError, ValueError):
    pass


class DegenerateProbeError(EarDynamicError, ValueError):
    pass


class DegenerateFeatureError(EarDynamicError, ValueError):
    pass


class AnnotationParseError(EarDynamicError, ValueError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class AnnotationValidationError(EarDynamicError, ValueError):
    pass


class InsufficientDataError(EarDynamicError, ValueError):
    pass


class InvalidTraceError(EarDynamicError, ValueError):
    pass


class ModelError(EarDynamicError, ValueError):
    pass


class ContractError(EarDynamicError, ValueError):
    pass


class InsufficientEnrollmentError(EarDynamicError, ValueError):
    pass


class TrainingError(EarDynamicError, ValueError):
    pass


class NoEvidenceError(EarDynamicError, ValueError):
    pass


class TemplateLoadError(EarDynamicError, ValueError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DatasetError(EarDynamicError, ValueError):
    def __init__(self, message, subject_ids=()):
        if subject_ids:
            message = f"{message} (subjects: {', '.join(subject_ids)})"
        super().__init__(message)
        self.subject_ids = tuple(subject_ids)
