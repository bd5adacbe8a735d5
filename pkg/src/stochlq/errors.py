"""Exception hierarchy shared by all modules."""


class StochLQError(Exception):
    """Base class for numerical failures (CLI exit code 3)."""


class NotAdmissible(StochLQError):
    """Policy is not mean-square stabilizing (spectral radius of F_L too close to 1)."""

    def __init__(self, rho: float, margin: float, what: str = "policy"):
        self.rho = rho
        self.margin = margin
        super().__init__(f"{what} not admissible: rho(F_L)={rho:.12g} > 1 - {margin:g}")


class NoConvergence(StochLQError):
    pass


class NonPD(StochLQError):
    pass


class StepRejected(StochLQError):
    def __init__(self, iteration: int, reason: str):
        self.iteration = iteration
        super().__init__(f"step rejected at iteration {iteration}: {reason}")


class ArmijoExhausted(StochLQError):
    def __init__(self, iteration: int, backtracks: int):
        self.iteration = iteration
        super().__init__(f"Armijo search exhausted {backtracks} backtracks at iteration {iteration}")


class DivergedRollout(StochLQError):
    def __init__(self, index: int, step: int):
        self.index = index
        self.step = step
        super().__init__(f"rollout {index} diverged at step {step} (|x_t| > 1e150)")


class MissingMoment(StochLQError):
    pass


class ConfigError(ValueError):
    """Invalid configuration or problem file (CLI exit code 2)."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
