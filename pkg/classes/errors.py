class NonFinite(ArithmeticError):
    """Raised when a coefficient of the numerical approximation leaves the finite range."""


class NoConvergence(RuntimeError):
    """Raised when the symmetric eigensolver fails or its residual certificate does not hold."""


class Infeasible(ValueError):
    """Raised when n < sqrt(2) * C_phi, i.e. too few modes for the rigorous eigenvalue bound."""

    def __init__(self, n: int, n_min: float):
        super().__init__(f"Rigorous bound needs n >= {n_min:.6g} modes, got n = {n}")
        self.n = n
        self.n_min = n_min


class InvalidParams(ValueError):
    pass


class ConfigError(ValueError):
    pass


class ParseError(ValueError):
    """
    Raised by the initial condition parser.

    Attributes
    ----------
        position (int): character offset into the original text where parsing failed.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class RejectsConstant(ParseError):
    pass
