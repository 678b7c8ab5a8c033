"""Exception types shared across the package."""


class ModelError(ValueError):
    """Structural problem with a hypergraph, potential, or model."""


class ModelFormatError(ModelError):
    """A model file could not be parsed.

    ``location`` is a JSON path such as ``edges[2].potential.epsilon`` or a
    ``line N`` marker for syntax errors.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class AdmissibilityError(ModelError):
    """An edge potential spreads wider than the admissibility window allows."""

    def __init__(self, message, edge=None, window=None):
        self.edge = edge
        self.window = window
        super().__init__(message)


class WindowExceededError(AdmissibilityError):
    """No positive decay margin keeps the potentials admissible."""


class BudgetExceededError(RuntimeError):
    """Exhaustive enumeration or recursion would exceed the configured budget."""

    def __init__(self, message, required=None, budget=None):
        self.required = required
        self.budget = budget
        super().__init__(message)
