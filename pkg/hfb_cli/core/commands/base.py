"""
Command pattern implementation for the CLI interface.
Every CLI verb is a Command registered with the CommandFactory; the typer
layer only parses options and renders results.
"""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Callable, Dict, Generic, Optional, Tuple, TypeVar

from rich.console import Console

from hfb_cli.core.config_manager import ConfigManager, RunConfig
from hfb_cli.core.errors import CommandError, ErrorHandler
from hfb_cli.utils.serialization import dumps_json

console = Console()
T = TypeVar("T")


class Command(ABC):
    """Base Command interface"""

    @abstractmethod
    def execute(self, *args: Any, **kwargs: Any) -> Any:
        """Execute the command with the given arguments"""
        pass

    @abstractmethod
    def name(self) -> str:
        """Get the name of the command"""
        pass

    @abstractmethod
    def description(self) -> str:
        """Get the description of the command"""
        pass


class ConfigAwareCommand(Command, ABC):
    """Base class for commands that run against a RunConfig and write a run directory"""

    def __init__(self) -> None:
        self.config_manager = ConfigManager()

    def prepare(
        self,
        config_path: Optional[str] = None,
        out: Optional[str] = None,
        seed: Optional[int] = None,
        validate: bool = True,
        overrides: Optional[Dict[str, Dict[str, Any]]] = None,
    ) -> Tuple[RunConfig, Path]:
        """Load, override, validate and place the run directory"""
        config = ConfigManager.with_seed(self.config_manager.load(config_path), seed)
        for section, values in (overrides or {}).items():
            config = ConfigManager.with_overrides(config, section, values)
        self.config_manager.use(config)
        if validate:
            self.config_manager.validate(config)
        run_dir = self.config_manager.run_dir(config, out)
        (run_dir / "config.json").write_text(dumps_json(ConfigManager.canonical(config)))
        return config, run_dir


class CommandResult(Generic[T]):
    """Encapsulates the result of a command execution"""

    def __init__(self, success: bool, value: Optional[T] = None, error: Optional[str] = None) -> None:
        self.success = success
        self.value = value
        self.error = error

    @staticmethod
    def ok(value: Optional[T] = None) -> "CommandResult[T]":
        """Create a successful result"""
        return CommandResult(True, value)

    @staticmethod
    def failure(error_message: str, value: Optional[T] = None) -> "CommandResult[T]":
        """Create an error result, optionally carrying the partial value"""
        return CommandResult(False, value=value, error=error_message)


class CommandFactory:
    """Factory for creating command instances"""

    _commands: Dict[str, type] = {}

    @classmethod
    def register(cls, command_type: str) -> Callable[[type], type]:
        """Decorator to register a command class"""

        def wrapper(command_class: type) -> type:
            cls._commands[command_type] = command_class
            return command_class

        return wrapper

    @classmethod
    def create(cls, command_type: str, *args: Any, **kwargs: Any) -> Command:
        """Create a command of the specified type"""
        if command_type not in cls._commands:
            raise CommandError(f"No command registered with type: {command_type}", command=command_type)

        try:
            command_class = cls._commands[command_type]
            return command_class(*args, **kwargs)
        except Exception as e:
            ErrorHandler().handle_exception(e)
            raise CommandError(f"Failed to create command of type {command_type}: {str(e)}", command=command_type) from e

    @classmethod
    def registered(cls) -> Tuple[str, ...]:
        return tuple(sorted(cls._commands))
