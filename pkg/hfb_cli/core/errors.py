"""
Centralized error handling for hfb-cli.
Every failure raised by the numerics or the CLI is an HfbError; warnings and
informational messages travel through the same ErrorHandler so they can be
observed in tests and rendered with rich on the console.
"""
from enum import Enum
from functools import wraps
from typing import Any, Callable, Dict, List, Optional, Type, TypeVar, cast

import typer
from rich.console import Console
from rich.panel import Panel
from rich.traceback import install as install_rich_traceback

install_rich_traceback()

console = Console(stderr=True)

F = TypeVar("F", bound=Callable[..., Any])


class ErrorSeverity(Enum):
    """Severity levels understood by the ErrorHandler"""

    INFO = "info"
    WARNING = "warning"
    ERROR = "error"


class HfbError(Exception):
    """Base exception class for all hfb-cli errors"""

    default_exit_code: Optional[int] = None

    def __init__(
        self,
        message: str,
        severity: ErrorSeverity = ErrorSeverity.ERROR,
        code: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None,
        help_text: Optional[str] = None,
        exit_code: Optional[int] = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.severity = severity
        self.code = code
        self.details = details or {}
        self.help_text = help_text
        self.exit_code = exit_code if exit_code is not None else self.default_exit_code


class ConfigurationError(HfbError):
    """Run configuration is malformed or violates a cross-field inequality"""

    default_exit_code = 1

    def __init__(self, message: str, inequality: Optional[str] = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        self.inequality = inequality
        if inequality:
            self.details["inequality"] = inequality


class ValidationError(HfbError):
    """Input to a numerical routine is invalid"""

    def __init__(self, message: str, field: Optional[str] = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        self.field = field
        if field:
            self.details["field"] = field


class GridError(ValidationError):
    """Grid parameters are out of range or two objects live on different grids"""

    def __init__(self, message: str, **kwargs: Any) -> None:
        super().__init__(message, field=kwargs.pop("field", "grid"), **kwargs)


class UnresolvedRegimeError(HfbError):
    """Scaled potential support N^beta exceeds the grid's Nyquist wavenumber"""

    default_exit_code = 1

    def __init__(self, message: str, max_big_n: Optional[float] = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        self.max_big_n = max_big_n
        if max_big_n is not None:
            self.details["max_bigN"] = max_big_n


class SeriesError(HfbError):
    """sh/ch operator series diverges or is truncated too early"""

    def __init__(self, message: str, required_depth: Optional[int] = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        self.required_depth = required_depth
        if required_depth is not None:
            self.details["required_depth"] = required_depth


class StepRejectedError(HfbError):
    """A time step broke the symmetry invariants beyond tolerance"""

    def __init__(self, message: str, residual: Optional[float] = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        if residual is not None:
            self.details["residual"] = residual


class NumericalBlowupError(HfbError):
    """Non-finite values appeared during evolution"""

    default_exit_code = 3

    def __init__(self, message: str, last_good: Any = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        self.last_good = last_good
        self.partial_trace: Any = None
        if last_good is not None and hasattr(last_good, "t"):
            self.details["last_good_t"] = last_good.t


class SerializationError(HfbError):
    """Binary state/trace file is truncated, foreign or of another version"""

    default_exit_code = 1

    def __init__(self, message: str, path: Optional[str] = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        if path:
            self.details["path"] = path


class QuadratureError(HfbError):
    """Adaptive quadrature failed to reach its tolerance"""


class CommandError(HfbError):
    """Error related to command execution"""

    default_exit_code = 1

    def __init__(self, message: str, command: Optional[str] = None, **kwargs: Any) -> None:
        super().__init__(message, **kwargs)
        if command:
            self.details["command"] = command


class ErrorHandler:
    """
    Process-wide error handler.
    Observers subscribe per severity; tests use this to collect warnings
    emitted deep inside the numerics.
    """

    _instance: Optional["ErrorHandler"] = None

    def __new__(cls) -> "ErrorHandler":
        if cls._instance is None:
            cls._instance = super(ErrorHandler, cls).__new__(cls)
            cls._instance._observers: Dict[ErrorSeverity, List[Callable[[HfbError], None]]] = {
                severity: [] for severity in ErrorSeverity
            }
            cls._instance.quiet = False
            cls._instance.show_info = True
        return cls._instance

    def register(self, observer: Callable[[HfbError], None], severity: Optional[ErrorSeverity] = None) -> None:
        """Register an observer for one severity, or for all of them"""
        targets = [severity] if severity else list(ErrorSeverity)
        for sev in targets:
            self._observers[sev].append(observer)

    def handle(self, error: HfbError) -> None:
        """Notify observers, then render according to severity"""
        for observer in list(self._observers[error.severity]):
            observer(error)

        if error.severity == ErrorSeverity.INFO:
            self._handle_info(error)
        elif error.severity == ErrorSeverity.WARNING:
            self._handle_warning(error)
        else:
            self._handle_error(error)

    def handle_exception(self, exc: Exception) -> None:
        """Handle any exception, wrapping foreign ones in CommandError"""
        if isinstance(exc, HfbError):
            self.handle(exc)
        else:
            error = CommandError(
                str(exc) or f"An unexpected {exc.__class__.__name__} occurred",
                details={"exception_type": exc.__class__.__name__},
            )
            self.handle(error)

    def _handle_info(self, error: HfbError) -> None:
        if self.quiet or not self.show_info:
            return
        console.print(f"[blue]INFO:[/blue] {error.message}")

    def _handle_warning(self, error: HfbError) -> None:
        if self.quiet:
            return
        console.print(f"[yellow]WARNING:[/yellow] {error.message}")
        if error.help_text:
            console.print(f"[yellow]HELP:[/yellow] {error.help_text}")

    def _print_details(self, error: HfbError) -> None:
        if error.details:
            console.print("[red]Details:[/red]")
            for key, value in error.details.items():
                console.print(f"  [red]{key}:[/red] {value}")
        if error.help_text:
            console.print(f"[green]HELP:[/green] {error.help_text}")

    def _handle_error(self, error: HfbError) -> None:
        console.print(Panel(f"[bold red]ERROR:[/bold red] {error.message}", title=type(error).__name__, border_style="red"))
        self._print_details(error)
        if error.exit_code is not None:
            raise typer.Exit(code=error.exit_code)

    def reset(self) -> None:
        """Drop observers and restore the default verbosity"""
        for sev in ErrorSeverity:
            self._observers[sev].clear()
        self.quiet = False
        self.show_info = True


def error_handler(func: F) -> F:
    """
    Decorator for CLI entry points: any exception is rendered by the
    ErrorHandler and turned into the error's exit code (1 if it has none).
    """

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            raise
        except Exception as e:
            ErrorHandler().handle_exception(e)
            code = e.exit_code if isinstance(e, HfbError) and e.exit_code is not None else 1
            raise typer.Exit(code=code) from e

    return cast(F, wrapper)


def raise_error(
    message: str, severity: ErrorSeverity = ErrorSeverity.ERROR, error_type: Type[HfbError] = HfbError, **kwargs: Any
) -> None:
    """Build an error of the given type and hand it to the ErrorHandler"""
    if not issubclass(error_type, HfbError):
        raise TypeError("error_type must be a subclass of HfbError")

    error = error_type(message, severity=severity, **kwargs)
    ErrorHandler().handle(error)


def log_info(message: str, **kwargs: Any) -> None:
    """Emit an informational message"""
    raise_error(message, severity=ErrorSeverity.INFO, **kwargs)


def log_warning(message: str, **kwargs: Any) -> None:
    """Emit a warning"""
    raise_error(message, severity=ErrorSeverity.WARNING, **kwargs)
