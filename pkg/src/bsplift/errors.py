"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class BspliftError(Exception):
    exit_code = 1


class ConfigError(BspliftError, ValueError):
    """Invalid arguments, sizes or mode strings."""

    exit_code = 2


class DataFormatError(BspliftError, OSError):
    """Unreadable or malformed input files."""

    exit_code = 4


class NumericalError(BspliftError, ArithmeticError):
    """A numerical failure with optional module/row context."""

    exit_code = 3

    def __init__(self, message, *, module=None, row=None):
        self.module = module
        self.row = row
        ctx = []
        if module is not None:
            ctx.append(f"module={module}")
        if row is not None:
            ctx.append(f"row={row}")
        if ctx:
            message = f"{message} [{', '.join(ctx)}]"
        super().__init__(message)


class SingularMatrixError(NumericalError):
    def __init__(self, message, *, pivot=None, module=None, row=None):
        self.pivot = pivot
        super().__init__(message, module=module, row=row if row is not None else pivot)


class RankDeficientError(NumericalError):
    pass


class InfeasibleSparsityError(NumericalError):
    """Too few free entries in an update pattern for the requested moments."""

    def __init__(self, message, *, deficit, module=None, row=None):
        self.deficit = deficit
        super().__init__(f"{message} (deficit {deficit})", module=module, row=row)


class UnsupportedStructureError(NumericalError):
    pass
