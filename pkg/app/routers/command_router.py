"""
Command router - groups CLI subcommands the way API routers group endpoints;
the main module mounts every router onto one argparse parser
"""
import argparse
from dataclasses import dataclass, field
from typing import Any, Callable

from app.view_models.CommandResponse import CommandResponse

Handler = Callable[[argparse.Namespace], CommandResponse]


def arg(*flags: str, **kwargs: Any) -> tuple[tuple[str, ...], dict]:
    """Argument spec forwarded to ArgumentParser.add_argument"""
    return flags, kwargs


@dataclass
class Command:
    name: str
    help: str
    handler: Handler
    arguments: list[tuple[tuple[str, ...], dict]] = field(default_factory=list)


class CommandRouter:
    def __init__(self, tags: list[str] | None = None):
        self.tags = tags or []
        self.commands: list[Command] = []

    def command(self, name: str, help: str, *arguments: tuple[tuple[str, ...], dict]):
        def decorator(func: Handler) -> Handler:
            self.commands.append(Command(name=name, help=help, handler=func, arguments=list(arguments)))
            return func
        return decorator

    def mount(self, subparsers: argparse._SubParsersAction):
        for cmd in self.commands:
            summary = f"[{', '.join(self.tags)}] {cmd.help}" if self.tags else cmd.help
            parser = subparsers.add_parser(cmd.name, help=summary, description=cmd.help)
            for flags, kwargs in cmd.arguments:
                parser.add_argument(*flags, **kwargs)
            parser.set_defaults(handler=cmd.handler, command=cmd.name)
