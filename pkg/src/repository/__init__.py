from .json_repository import JsonRepository

__all__ = [
    "JsonRepository"
]
