"""Case-study simulators mapping input samples to variables of interest."""


class SimulationError(RuntimeError):
    """A simulation produced a non-finite state; ``samples`` lists the culprits."""

    def __init__(self, message, samples=(), period=None):
        super().__init__(message)
        self.samples = list(samples)
        self.period = period
