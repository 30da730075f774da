from typing import Any, Dict, List, Optional


class HilbundError(Exception):
    """Base error; `exit_code` is what the command router returns for it."""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details: Dict[str, Any] = details

    def diagnostics(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self), **self.details}


class DimensionError(HilbundError):
    exit_code = 2


class DegenerateBodyError(HilbundError):
    exit_code = 2


class DegenerateEllipsoidError(HilbundError):
    exit_code = 2


class DegenerateNormError(HilbundError):
    exit_code = 2


class NotEnclosingError(HilbundError):
    exit_code = 2


class ValidationError(HilbundError):
    """Bundle invariant violation, listing the offending vertices."""

    exit_code = 2

    def __init__(self, message: str, vertices: Optional[List[str]] = None, **details: Any):
        super().__init__(message, vertices=sorted(vertices or []), **details)
        self.vertices = sorted(vertices or [])


class SectionError(HilbundError):
    exit_code = 2


class AnchorError(HilbundError):
    exit_code = 2


class EnumerationCapError(HilbundError):
    exit_code = 2


class CertificateError(HilbundError):
    exit_code = 2


class NetError(HilbundError):
    exit_code = 2


class ConvergenceError(HilbundError):
    """Solver ran out of iterations; `best` holds the best iterate found."""

    exit_code = 3

    def __init__(self, message: str, best: Any = None, **details: Any):
        super().__init__(message, **details)
        self.best = best

    def diagnostics(self) -> Dict[str, Any]:
        payload = super().diagnostics()
        if self.best is not None and hasattr(self.best, "model_dump"):
            payload["best"] = self.best.model_dump(mode="json")
        return payload


class InternalError(HilbundError):
    exit_code = 1
