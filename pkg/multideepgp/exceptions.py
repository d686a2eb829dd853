from __future__ import annotations


class MultiDeepGPError(Exception):
    """Base class for every error raised by the multideepgp package."""


class NotPositiveDefinite(MultiDeepGPError, ArithmeticError):
    def __init__(self, pivot: float, index: int):
        self.pivot = pivot
        self.index = index
        super().__init__(f'Matrix is not positive definite (pivot {pivot:.3e} at index {index}).')


class DimensionMismatch(MultiDeepGPError, ValueError):
    pass


class EmptyInput(MultiDeepGPError, ValueError):
    pass


class MalformedRow(MultiDeepGPError, ValueError):
    def __init__(self, line: int, detail: str = ''):
        self.line = line
        message = f'Malformed row at line {line}'
        if detail:
            message = f'{message}: {detail}'
        super().__init__(message)


class TypeViolation(MultiDeepGPError, ValueError):
    def __init__(self, line: int, column: str, value: str = ''):
        self.line = line
        self.column = column
        super().__init__(f"Invalid value {value!r} in column '{column}' at line {line}.")


class DivergenceError(MultiDeepGPError, FloatingPointError):
    pass


class DegenerateSample(MultiDeepGPError, ValueError):
    pass


class MissingVariance(MultiDeepGPError, KeyError):
    def __str__(self) -> str:
        return f'No residual variance available for outcome {self.args[0]!r}.'


class ZeroVarianceSurface(MultiDeepGPError, ValueError):
    pass


class SingularSystem(MultiDeepGPError, ArithmeticError):
    pass


class SingleClassError(MultiDeepGPError, ValueError):
    pass


class InvalidInterval(MultiDeepGPError, ValueError):
    pass


class ConfigError(MultiDeepGPError, ValueError):
    def __init__(self, detail):
        self.detail = detail
        super().__init__(f'Invalid run configuration: {detail}')


class ConfigHashMismatch(MultiDeepGPError):
    def __init__(self, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(
            f'Checkpoint was trained with model hash {expected[:12]} but the config hashes to {found[:12]}; refusing to predict.'
        )


class CheckpointError(MultiDeepGPError, ValueError):
    pass
