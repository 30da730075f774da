from pathlib import Path
from typing import List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.model.geometry import Ellipsoid, SymmetricBody  # noqa: E402
from src.service.base_service import BaseService  # noqa: E402
from src.utils.logger import Logger  # noqa: E402

logger = Logger.setup()

Shape = Union[SymmetricBody, Ellipsoid]
ELLIPSE_SAMPLES = 256
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


class RenderService(BaseService):
    """Static SVG pictures of planar bodies and ellipses."""

    @staticmethod
    def _outline(shape: Shape) -> np.ndarray:
        if isinstance(shape, SymmetricBody):
            points = np.asarray(shape.vertices, dtype=float)
            order = np.argsort(np.arctan2(points[:, 1], points[:, 0]))
            points = points[order]
        else:
            eigenvalues, vectors = np.linalg.eigh(shape.matrix())
            inverse_root = vectors @ np.diag(1.0 / np.sqrt(eigenvalues)) @ vectors.T
            angles = np.linspace(0.0, 2.0 * np.pi, ELLIPSE_SAMPLES, endpoint=False)
            points = np.column_stack([np.cos(angles), np.sin(angles)]) @ inverse_root.T
        return np.vstack([points, points[:1]])

    def render_svg(
        self,
        shapes: Sequence[Shape],
        path: Union[str, Path],
        labels: Optional[List[str]] = None,
    ) -> Optional[Path]:
        """
        Overlay planar bodies (polygons) and ellipses in one SVG.

        Args:
            shapes: bodies and ellipses; anything not 2-dimensional is skipped
            path: output file
            labels: legend entries, one per shape

        Returns:
            The written path, or None when a shape of the wrong dimension made the request void
        """
        if any(shape.dim != 2 for shape in shapes):
            logger.warning("--svg ignored: only 2-dimensional bodies and ellipses can be drawn")
            return None

        plt.rcParams["svg.hashsalt"] = "hilbund"
        figure, axes = plt.subplots(figsize=(5, 5))
        try:
            for i, shape in enumerate(shapes):
                outline = self._outline(shape)
                label = labels[i] if labels and i < len(labels) else None
                axes.plot(outline[:, 0], outline[:, 1], color=COLORS[i % len(COLORS)], linewidth=1.2, label=label)
            axes.set_aspect("equal")
            axes.axhline(0.0, color="#cccccc", linewidth=0.5)
            axes.axvline(0.0, color="#cccccc", linewidth=0.5)
            if labels and shapes:
                axes.legend(loc="upper right", fontsize="small")
            target = Path(path)
            target.parent.mkdir(parents=True, exist_ok=True)
            figure.savefig(target, format="svg", metadata={"Date": None})
        finally:
            plt.close(figure)
        logger.info(f"SVG written to {target}")
        return target
