from .base_service import BaseService
from .geometry_service import GeometryService
from .loewner_service import LoewnerService
from .seminorm_service import SeminormService
from .bundle_service import BundleService
from .renorming_service import RenormingService
from .hyperspace_service import HyperspaceService
from .render_service import RenderService

__all__ = [
    "BaseService",
    "GeometryService",
    "LoewnerService",
    "SeminormService",
    "BundleService",
    "RenormingService",
    "HyperspaceService",
    "RenderService",
]
