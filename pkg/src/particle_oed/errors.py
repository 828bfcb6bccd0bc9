"""Exception hierarchy shared by every module."""


class OEDError(RuntimeError):
    """Base class. ``iteration`` is filled in by the flow drivers when known."""

    iteration = None

    def with_iteration(self, iteration):
        self.iteration = iteration
        return self

    def __str__(self):
        msg = super().__str__()
        if self.iteration is not None:
            msg = f"{msg} (outer iteration {self.iteration})"
        return msg


class SingularFisher(OEDError):
    def __init__(self, message, smallest_eigenvalue=float("nan")):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class SingularHessian(OEDError):
    def __init__(self, message, smallest_eigenvalue=float("nan")):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class HessUnavailable(OEDError):
    pass


class NonFiniteParameter(OEDError):
    pass


class NonFiniteState(OEDError):
    pass


class SingularOperator(OEDError):
    pass


class ConfigError(ValueError):
    pass
