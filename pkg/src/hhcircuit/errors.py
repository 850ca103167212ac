"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConfigError(ValueError):
    """A circuit or experiment configuration violates its constraints."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class IntegrationBlowup(FloatingPointError):
    """The Euler scheme produced a non-finite state.

    Attributes
    ----------
    step : int
        Index of the offending step (0-based, counted from the start of the run).
    time : float
        Simulation time at the end of that step.
    neuron : int or None
        Index of the neuron that blew up, for circuit runs.
    """

    def __init__(self, step, time, neuron=None):
        self.step = int(step)
        self.time = float(time)
        self.neuron = neuron
        where = f" in neuron {neuron}" if neuron is not None else ""
        super().__init__(f"non-finite state{where} at step {self.step} (t={self.time:g})")
