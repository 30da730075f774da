from .command_router import CommandRouter

__all__ = [
    "CommandRouter"
]
