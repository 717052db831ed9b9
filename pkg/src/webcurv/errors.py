"""Exception hierarchy shared by all webcurv modules."""


class WebCurvError(Exception):
    """Base class for every error raised by webcurv."""


# jet engine

class JetMismatch(WebCurvError, ValueError):
    """Binary jet operation on operands of different order or base point."""


class NearZeroDivisor(WebCurvError, ZeroDivisionError):
    def __init__(self, value, where=None):
        self.value = value
        self.where = where
        msg = f"divisor constant term {value!r} is too close to zero"
        if where is not None:
            msg += f" in {where}"
        super().__init__(msg)


class ZeroOrderJet(WebCurvError, ValueError):
    """Differentiation of a jet that carries no derivative information."""


# expression language

class ExprSyntaxError(WebCurvError, ValueError):
    """Malformed expression text; ``position`` is 1-based."""

    def __init__(self, message, position, expected=None, text=None):
        self.position = position
        self.expected = expected
        self.text = text
        msg = f"{message} at position {position}"
        if expected:
            msg += f" (expected {expected})"
        super().__init__(msg)


class DomainError(WebCurvError, ValueError):
    def __init__(self, message, where=None):
        self.where = where
        if where is not None:
            message = f"{message} in {where}"
        super().__init__(message)


class WebFileError(WebCurvError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}:"
        if line is not None:
            prefix += f"{line}: "
        elif prefix:
            prefix += " "
        super().__init__(prefix + message)


# linear algebra

class SingularMatrix(WebCurvError, ArithmeticError):
    def __init__(self, step, best_pivot):
        self.step = step
        self.best_pivot = best_pivot
        super().__init__(
            f"singular matrix: best pivot {best_pivot:.3e} at elimination step {step}")


class RankDeficient(WebCurvError, ArithmeticError):
    pass


class BadNormalization(WebCurvError, ArithmeticError):
    """Kernel vector cannot be scaled to have last component 1."""


# web geometry

class InsufficientJetOrder(WebCurvError, ValueError):
    pass


class SingularLeadingBlock(WebCurvError, ArithmeticError):
    def __init__(self, level, cause=None):
        self.level = level
        super().__init__(f"leading block of P_{level + 1} is singular at this point"
                         + (f" ({cause})" if cause else ""))


class UnsupportedWebSize(WebCurvError, ValueError):
    pass


class SlopeCollision(WebCurvError, ArithmeticError):
    def __init__(self, i, j, mi, mj):
        self.pair = (i, j)
        super().__init__(f"slopes of f{i} and f{j} collide ({mi!r} vs {mj!r})")


class VanishingFx(WebCurvError, ArithmeticError):
    def __init__(self, i, value):
        self.index = i
        super().__init__(f"f{i}_x = {value!r} vanishes at this point")


class NotNormalized(WebCurvError, ValueError):
    """Closed forms need the last integral to be literally ``y``."""
