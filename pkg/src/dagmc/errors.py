"""Exception hierarchy shared by the model language, graph and sampler."""


class DagmcError(Exception):
    """Base class for all errors raised by this package."""


class SourceError(DagmcError):
    """An error that can point at a location in a model file."""

    def __init__(self, message, line=None, col=None, source=None):
        self.message = message
        self.line = line
        self.col = col
        self.source = source
        super().__init__(self._render())

    def _render(self):
        where = []
        if self.source:
            where.append(str(self.source))
        if self.line is not None:
            where.append(str(self.line))
            if self.col is not None:
                where.append(str(self.col))
        prefix = ":".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message


class ModelSyntaxError(SourceError):
    pass


class UnknownSection(ModelSyntaxError):
    pass


class DuplicateName(SourceError):
    pass


class UnknownParent(SourceError):
    pass


class CycleDetected(DagmcError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle in model graph: " + " -> ".join(self.cycle))


class UnknownDensity(SourceError):
    pass


class BadArity(SourceError):
    pass


class InvalidParameter(DagmcError):
    pass


class EvaluationError(SourceError):
    pass


class UnboundIdentifier(EvaluationError):
    pass


class DomainError(EvaluationError):
    pass


class DataLengthMismatch(SourceError):
    pass


class ReplicateUnknownNode(SourceError):
    pass


class MergeConflict(DagmcError):
    pass


class ConfigError(DagmcError):
    pass
