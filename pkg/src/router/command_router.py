import asyncio
import json
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

from pydantic import ValidationError as PydanticValidationError

from src.model.bundle import BaseGraph, Bundle, Edge, Section
from src.model.geometry import Ellipsoid, Subspace, SymmetricBody
from src.model.hyperspace import ConvexSelection, FiniteMetricSpace, SelectionNet, SubsetPoint
from src.model.renorming import Net
from src.model.report import Command, CommandName, Report, Timings
from src.repository.json_repository import JsonRepository
from src.service.bundle_service import BundleService
from src.service.geometry_service import GeometryService
from src.service.hyperspace_service import HyperspaceService
from src.service.loewner_service import LoewnerService
from src.service.render_service import RenderService
from src.service.renorming_service import RenormingService
from src.service.seminorm_service import SeminormService
from src.utils.errors import ConvergenceError, HilbundError
from src.utils.logger import Logger
from src.utils.settings import Settings

logger = Logger.setup()

# handler result: (results payload, shapes to draw when --svg is given)
Outcome = Tuple[Dict[str, Any], Optional[List[Any]]]


class CommandRouter:
    """Maps a subcommand to its service calls and turns errors into exit codes."""

    def __init__(self, settings: Optional[Settings] = None, repository: Optional[JsonRepository] = None):
        self.repository = repository or JsonRepository()
        self._configure(settings or Settings())
        self.handlers: Dict[CommandName, Callable[[Dict[str, Any]], Outcome]] = {
            CommandName.MVEE: self.mvee,
            CommandName.JOHN: self.john,
            CommandName.RENORM_BUILD: self.renorm_build,
            CommandName.RENORM_VERIFY: self.renorm_verify,
            CommandName.RENORM_SELECT: self.renorm_select,
            CommandName.HYPER_BUILD: self.hyper_build,
            CommandName.HYPER_ROUNDTRIP: self.hyper_roundtrip,
            CommandName.HYPER_SLICE: self.hyper_slice,
        }

    def _configure(self, settings: Settings):
        self.settings = settings
        self.geometry = GeometryService(self.settings)
        self.loewner = LoewnerService(self.geometry, self.settings)
        self.seminorms = SeminormService(self.geometry, self.settings)
        self.bundles = BundleService(self.geometry, self.settings)
        self.renorming = RenormingService(self.geometry, self.loewner, self.seminorms, self.bundles, self.settings)
        self.hyperspace = HyperspaceService(self.settings)
        self.render = RenderService(self.settings)
        self.services = [
            self.geometry,
            self.loewner,
            self.seminorms,
            self.bundles,
            self.renorming,
            self.hyperspace,
            self.render,
        ]

    # -------------------------------------------------------------- parsing

    def _body(self, document: Dict[str, Any]) -> SymmetricBody:
        if "body" in document:
            return SymmetricBody(**document["body"])
        return self.geometry.convex_hull_points(document["points"])

    def _bundle(self, document: Dict[str, Any]) -> Bundle:
        dim = document["ambient_dim"]
        vertices = document["vertices"]
        base = BaseGraph(
            vertices=[v["id"] for v in vertices],
            edges=[Edge(**e) for e in document.get("edges", [])],
        )
        sections = [Section(**s) for s in document.get("sections", [])]
        if "ambient_ball" in document:
            ball = self.geometry.convex_hull_points(document["ambient_ball"])
            bundle = self.bundles.from_ambient_ball(dim, base, sections, ball)
        else:
            bases = {v["id"]: Subspace(ambient_dim=dim, basis=v.get("fiber_basis", [])) for v in vertices}
            balls = {
                v["id"]: SymmetricBody(dim=bases[v["id"]].rank, vertices=v["ball_vertices"]) if bases[v["id"]].rank else None
                for v in vertices
            }
            bundle = Bundle(ambient_dim=dim, base=base, sections=sections, fiber_basis=bases, fiber_ball=balls)
        if document.get("augment"):
            bundle = self.bundles.augment_trivial(bundle)
        return bundle

    @staticmethod
    def _space(document: Dict[str, Any]) -> FiniteMetricSpace:
        return FiniteMetricSpace(**document)

    # ------------------------------------------------------------- handlers

    def mvee(self, document: Dict[str, Any]) -> Outcome:
        body = self._body(document)
        circumscribed = None
        if "slice" in document:
            frame = Subspace(ambient_dim=body.dim, basis=document["slice"])
            full = self.loewner.certify(body, self.settings.mvee_config()).ellipsoid
            circumscribed = self.geometry.restrict(full, frame)
            body = self.geometry.intersect_subspace(body, frame)
        certificate = self.loewner.certify(body, self.settings.mvee_config())
        metrics = self.geometry.ellipse_metrics(certificate.ellipsoid)
        results = {
            "body": body.model_dump(mode="json"),
            "certificate": certificate.model_dump(mode="json"),
            "metrics": metrics.model_dump(mode="json"),
        }
        shapes = [body, certificate.ellipsoid]
        if circumscribed is not None:
            # the full body's Löwner ellipsoid cut by the slice plane
            results["circumscribed_slice"] = circumscribed.model_dump(mode="json")
            shapes.append(circumscribed)
        return results, shapes

    def john(self, document: Dict[str, Any]) -> Outcome:
        body = self._body(document)
        ellipsoid = Ellipsoid(gram=document["gram"])
        certificate = self.loewner.john_check(body, ellipsoid, self.settings.mvee_config(), loewner=False)
        return {"certificate": certificate.model_dump(mode="json")}, [body, ellipsoid]

    def _planar_scene(self, bundle: Bundle, renorming) -> Optional[List[Any]]:
        for x in bundle.base.vertices:
            if bundle.fiber_dim(x) == 2:
                grams = [Ellipsoid(gram=g.gram) for g in renorming.K(x).generators]
                return [bundle.fiber_ball[x], *grams]
        return None

    def renorm_build(self, document: Dict[str, Any]) -> Outcome:
        bundle = self._bundle(document)
        diagnostics = self.bundles.validate(bundle)
        renorming = self.renorming.build_renorming(bundle)
        lsc_report = None
        if "nets" in document:
            nets = [Net(**n) for n in document["nets"]]
            lsc_report = self.renorming.verify_lsc(renorming, bundle, nets, document.get("probes"), self.settings.tol)
        selection = self.renorming.select(renorming, bundle, document.get("root"))
        certificate = self.renorming.certificate(renorming, lsc_report, selection)
        results = {
            "bundle": diagnostics.model_dump(mode="json"),
            "certificate": certificate.model_dump(mode="json"),
        }
        return results, self._planar_scene(bundle, renorming)

    def renorm_verify(self, document: Dict[str, Any]) -> Outcome:
        bundle = self._bundle(document)
        renorming = self.renorming.build_renorming(bundle)
        nets = [Net(**n) for n in document.get("nets", [])]
        report = self.renorming.verify_lsc(renorming, bundle, nets, document.get("probes"), self.settings.tol)
        results = {
            "distortion_sup": renorming.distortion_sup,
            "lsc_report": report.model_dump(mode="json"),
        }
        return results, None

    def renorm_select(self, document: Dict[str, Any]) -> Outcome:
        bundle = self._bundle(document)
        renorming = self.renorming.build_renorming(bundle)
        selection = self.renorming.select(renorming, bundle, document.get("root"))
        results = {
            "distortion_sup": renorming.distortion_sup,
            "selection": selection.model_dump(mode="json"),
        }
        return results, None

    def hyper_build(self, document: Dict[str, Any]) -> Outcome:
        space = self._space(document["space"])
        n = document["n"]
        hyperspace = self.hyperspace.build_hyperspace(space, n)
        incidence = self.hyperspace.build_incidence(space, n)
        results = {
            "hyperspace": hyperspace.model_dump(mode="json"),
            "incidence": incidence.model_dump(mode="json"),
        }
        return results, None

    def hyper_roundtrip(self, document: Dict[str, Any]) -> Outcome:
        report = self.hyperspace.roundtrip_check(
            self._space(document["base"]), self._space(document["space"]), document["n"], self.settings.cap
        )
        return {"roundtrip": report.model_dump(mode="json")}, None

    def hyper_slice(self, document: Dict[str, Any]) -> Outcome:
        if "selection" in document:
            selection = ConvexSelection(**document["selection"])
        else:
            selection = self.hyperspace.build_selection(
                document["points"],
                [SubsetPoint(members=s) for s in document["subsets"]],
                document["n"],
                document.get("rule", "barycenter"),
                document.get("direction"),
            )
        slices = [
            self.hyperspace.slice_selection(selection, item["x"], SubsetPoint(members=item["subset"]))
            for item in document.get("slices", [])
        ]
        nets = [SelectionNet(**n) for n in document.get("nets", [])]
        continuity = self.hyperspace.check_singleton_continuity(selection, nets, self.settings.tol)
        results = {
            "selection": selection.model_dump(mode="json"),
            "slices": [s.model_dump(mode="json") for s in slices],
            "continuity": continuity.model_dump(mode="json"),
        }
        return results, None

    # ------------------------------------------------------------- dispatch

    def _render(self, shapes: Optional[List[Any]]):
        if not self.settings.svg:
            return
        if shapes is None:
            logger.warning("--svg ignored: this command has no planar objects to draw")
            return
        self.render.render_svg(shapes, self.settings.svg)

    async def dispatch(self, command: Command) -> Tuple[int, Report]:
        """
        Run one command end to end.

        Args:
            command: subcommand with its input/output paths

        Returns:
            (exit code, report); the report is also written to the output path
        """
        started = time.perf_counter()
        code, status = 0, "ok"
        results: Dict[str, Any] = {}
        diagnostics: Dict[str, Any] = {}
        try:
            if command.overrides:
                self._configure(self.settings.override(command.overrides))
            for service in self.services:
                service.initialize()
            document = await self.repository.read(command.input_path)
            results, shapes = await asyncio.to_thread(self.handlers[command.name], document)
            self._render(shapes)
        except ConvergenceError as e:
            logger.error(f"{command.name.value}: {e}")
            code, status, diagnostics = e.exit_code, "not_converged", e.diagnostics()
        except HilbundError as e:
            logger.error(f"{command.name.value}: {e}")
            code, status, diagnostics = e.exit_code, "error", e.diagnostics()
        except PydanticValidationError as e:
            logger.error(f"{command.name.value}: invalid input: {e}")
            code, status = 2, "error"
            diagnostics = {"error": "ValidationError", "message": str(e), "errors": json.loads(e.json())}
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            logger.error(f"{command.name.value}: malformed input: {e!r}")
            code, status = 2, "error"
            diagnostics = {"error": type(e).__name__, "message": str(e)}
        except Exception as e:
            logger.error(f"{command.name.value}: unexpected failure: {e!r}")
            code, status = 1, "error"
            diagnostics = {"error": type(e).__name__, "message": str(e)}
        finally:
            for service in self.services:
                service.close()

        report = Report(
            command=command.name,
            config=self.settings.model_dump(mode="json", exclude={"threads", "svg"}),
            status=status,
            results=results,
            diagnostics=diagnostics,
            timings=Timings(elapsed_seconds=time.perf_counter() - started),
        )
        await self.repository.write(command.output_path, report.model_dump(mode="json"))
        logger.info(f"{command.name.value} finished with exit code {code}")
        return code, report
