"""Exception types raised across the package."""


class GridMismatchError(ValueError):
    """Two fields were combined on different grids."""


class CollisionError(RuntimeError):
    """A distance dropped to or below the safety threshold."""


class ScenarioError(ValueError):
    """A scenario file failed validation.

    ``problems`` lists every failed check, not just the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SimulationAborted(RuntimeError):
    """The main loop stopped early (collision or non-finite state)."""

    def __init__(self, message, t=None):
        self.t = t
        super().__init__(message if t is None else f"t={t:.6g}: {message}")
