"""Exceptions shared by the reduction machinery and the CLI."""


class HypothesisError(ValueError):
    """A reduction's precondition could not be certified."""

    def __init__(self, clause: str, detail: str = ""):
        super().__init__(f"hypothesis {clause} fails" + (f": {detail}" if detail else ""))
        self.clause = clause
        self.detail = detail


class ConstructionError(RuntimeError):
    """A construction produced something it must never produce."""
