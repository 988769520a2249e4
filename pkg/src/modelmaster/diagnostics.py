"""Diagnostics and the exception hierarchy shared by all passes."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Diagnostic:
    line: int
    col: int
    message: str
    severity: str = "error"
    code: str = ""

    def __post_init__(self):
        if not self.message:
            raise ValueError("diagnostic message must not be empty")
        if self.severity not in ("error", "warning"):
            raise ValueError(f"bad severity {self.severity!r}")

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity}: {self.message}"


def at(pos, message: str, code: str = "", severity: str = "error") -> Diagnostic:
    line, col = pos if pos else (1, 1)
    return Diagnostic(line, col, message, severity, code)


def sort_diagnostics(diags) -> list:
    """Order by source position, keeping the original order for ties."""
    return sorted(diags, key=lambda d: (d.line, d.col))


def has_errors(diags) -> bool:
    return any(d.is_error for d in diags)


class ModelMasterError(Exception):
    """Base class for every error raised by the toolchain."""


class DiagnosticError(ModelMasterError):
    """An error that carries one or more source diagnostics."""

    code = ""

    def __init__(self, diagnostics, message: str | None = None):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__(message or "; ".join(str(d) for d in self.diagnostics))


class MMSyntaxError(DiagnosticError):
    code = "SyntaxError"


class SemanticError(DiagnosticError):
    code = "SemanticError"


class IncludeError(DiagnosticError):
    code = "IncludeError"


class TemplateError(DiagnosticError):
    code = "TemplateError"


class CodegenError(DiagnosticError):
    code = "CodegenError"


class LayoutCollision(CodegenError):
    code = "LayoutCollision"


class IndexOutOfBase(CodegenError):
    code = "IndexOutOfBase"


class Unrepresentable(ModelMasterError):
    """A value has no encoding in the SYLK subset."""


class SylkError(ModelMasterError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class MalformedRecord(SylkError):
    pass


class MissingTerminator(SylkError):
    pass


class FormulaSyntaxError(ModelMasterError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} at position {position}")


class CyclicDependency(ModelMasterError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cyclic dependency: " + " -> ".join(str(a) for a in self.cycle))


class UnknownFunction(ModelMasterError):
    pass


class TransformError(ModelMasterError):
    """A transformation command could not be applied."""


class UnknownName(TransformError):
    pass


class RebaseShapeMismatch(TransformError):
    pass


class NothingToRoll(TransformError):
    pass
