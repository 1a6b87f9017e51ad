"""Run one configured experiment and write its CSV artifacts and manifest."""
import hashlib
import json
import logging
import threading
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
from threadpoolctl import threadpool_limits

from .coefficients import SeedSpec, load_field, sample
from .config import ExperimentConfig, RuntimeSettings, load_settings
from .core.correctors import CorrectorSet, build_corrector_set, voigt_reuss_bounds
from .core.excess import excess_decay_experiment
from .core.growth import GrowthReport, growth_report
from .errors import HomoglabError
from .experiments.green import corollary_C_experiment
from .experiments.invariants import invariants_check, support_radius
from .experiments.lemma_l import lemma_L_check
from .experiments.reports import DecayReport
from .experiments.theorem_t import run_theorem_T
from .lattice import TorusGrid
from .media import CoefficientField
from .solvers import SolveReport, listening

logger = logging.getLogger(__name__)

INVARIANT_TOL = 1e-6
CONSTANT_INVARIANT_TOL = 1e-8
SYMMETRY_TOL = 1e-8


@dataclass
class RunManifest:
    command: str
    config: Dict[str, object]
    artifacts: Dict[str, str] = field(default_factory=dict)
    wall_times: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    solves: int = 0
    certifications: Dict[str, bool] = field(default_factory=dict)
    details: Dict[str, object] = field(default_factory=dict)
    started: Optional[str] = None

    @property
    def passed(self) -> bool:
        return all(self.certifications.values())

    def as_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def reproducible_part(self) -> Dict[str, object]:
        """Everything except wall-clock fields."""
        out = self.as_dict()
        out.pop("wall_times")
        out.pop("started")
        return out


def write_csv(path: Path, rows: Sequence[Dict[str, object]], columns: Optional[List[str]] = None) -> None:
    """Header row, '.' decimals and shortest round-trip floats."""
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False, na_rep="nan", lineterminator="\n")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class SolveLog:
    """Collects one JSON line per finished solve, tagged with the current stage.

    Lines are written sorted by stage order and label, without wall-clock
    fields, so the file is byte-identical for a given config and seed. Solve
    wall time is summed into the manifest instead.
    """

    def __init__(self, path: Path):
        self.path = path
        self.stage = "setup"
        self.iterations = 0
        self.count = 0
        self.wall_time = 0.0
        self.started = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self._stages: Dict[str, int] = {}
        self._entries: List[Dict[str, object]] = []
        self._lock = threading.Lock()

    def __call__(self, report: SolveReport) -> None:
        entry = {"stage": self.stage, **report.as_dict()}
        wall_time = entry.pop("wall_time")
        with self._lock:
            self._stages.setdefault(self.stage, len(self._stages))
            self.iterations += report.iterations
            self.count += 1
            self.wall_time += wall_time
            self._entries.append(entry)

    def write(self) -> None:
        entries = sorted(
            self._entries,
            key=lambda e: (self._stages[e["stage"]], e["label"], json.dumps(e, sort_keys=True)),
        )
        with open(self.path, "w", encoding="utf-8") as f:
            for entry in entries:
                f.write(json.dumps(entry) + "\n")


class Runner:
    def __init__(self, config: ExperimentConfig, settings: RuntimeSettings, out_dir: Path, threads: int,
                 progress: bool = False):
        self.config = config
        self.out_dir = out_dir
        self.threads = threads
        self.progress = progress
        self.preconditioner = config.preconditioner or settings.preconditioner
        self.manifest = RunManifest(config.command, config.model_dump(mode="json", by_alias=True))
        self.log = SolveLog(out_dir / "solves.jsonl")

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        self.log.stage = name
        start = time.perf_counter()
        try:
            yield
        except HomoglabError as exc:
            exc.context.setdefault("stage", name)
            raise
        finally:
            self.manifest.wall_times[name] = self.manifest.wall_times.get(name, 0.0) + time.perf_counter() - start

    def artifact(self, name: str, rows: Sequence[Dict[str, object]], columns: Optional[List[str]] = None) -> None:
        path = self.out_dir / name
        write_csv(path, rows, columns)
        logger.info("wrote %s (%d rows)", path, len(rows))

    # building blocks

    def medium(self, seed: int) -> CoefficientField:
        if self.config.medium_path:
            return load_field(self.config.medium_path)
        grid = TorusGrid(self.config.dim, self.config.size)
        return sample(self.config.ensemble_spec(), SeedSpec(seed=seed), grid)

    def correctors(self, medium: CoefficientField, label: str = "correctors") -> CorrectorSet:
        with self.stage(label):
            correctors = build_corrector_set(medium, self.config.tol, self.threads, self.preconditioner)
        self.manifest.certifications[label] = correctors.certification.passed
        return correctors

    def growth(self, correctors: CorrectorSet, centers: Sequence[Sequence[int]]) -> List[GrowthReport]:
        with self.stage("growth"):
            reports = [
                growth_report(correctors, center, self.config.radii, self.config.alpha_nominal) for center in centers
            ]
        for report in reports:
            key = "growth_" + "_".join(str(c) for c in report.center)
            self.manifest.certifications[key] = report.certified
        return reports

    # commands

    def run_correctors(self) -> None:
        d = self.config.dim
        ah_rows, cert_rows = [], []
        matrices = []
        for k in range(self.config.ensemble_size):
            seed = self.config.seed + k
            medium = self.medium(seed)
            correctors = self.correctors(medium, f"correctors_{seed}")
            matrices.append(correctors.a_h)
            row: Dict[str, object] = {"seed": seed}
            row.update({f"a_h_{i + 1}{j + 1}": float(correctors.a_h[i, j]) for i in range(d) for j in range(d)})
            harmonic, arithmetic = voigt_reuss_bounds(medium)
            row.update({f"harmonic_{j + 1}": float(harmonic[j]) for j in range(d)})
            row.update({f"arithmetic_{j + 1}": float(arithmetic[j]) for j in range(d)})
            ah_rows.append(row)
            for cert in correctors.certification.directions:
                cert_rows.append({"seed": seed, **asdict(cert), "passed": int(correctors.certification.passed)})
        if len(matrices) > 1:
            mean = np.mean(matrices, axis=0)
            row = {"seed": "mean"}
            row.update({f"a_h_{i + 1}{j + 1}": float(mean[i, j]) for i in range(d) for j in range(d)})
            ah_rows.append(row)
        self.artifact("ah.csv", ah_rows, list(ah_rows[0].keys()))
        self.artifact("certification.csv", cert_rows)

    def run_growth(self) -> None:
        correctors = self.correctors(self.medium(self.config.seed))
        centers = [(0,) * self.config.dim] + self.config.far_points()
        rows = []
        for report in self.growth(correctors, centers):
            rows.extend(report.rows())
            footer = {f"center_x{j + 1}": c for j, c in enumerate(report.center)}
            footer.update(
                alpha_fit=report.alpha_fit if report.alpha_fit is not None else float("nan"),
                r_star=report.r_star,
                certified=int(report.certified),
            )
            rows.append(footer)
        columns = [f"center_x{j + 1}" for j in range(self.config.dim)]
        columns += ["r", "omega_phi", "omega_sigma", "omega_total", "alpha_fit", "r_star", "certified"]
        self.artifact("growth.csv", rows, columns)

    def run_excess(self) -> None:
        medium = self.medium(self.config.seed)
        correctors = self.correctors(medium)
        (growth,) = self.growth(correctors, [(0,) * self.config.dim])
        with self.stage("excess"):
            report = excess_decay_experiment(
                medium,
                correctors,
                self.config.R,
                n_samples=self.config.samples,
                seed=self.config.seed,
                growth=growth,
                boundary=self.config.boundary_spec(),
                tol=self.config.tol,
                n_jobs=self.threads,
                preconditioner=self.preconditioner,
                progress=self.progress,
            )
        columns = ["sample_id", "r", "excess_sqrt", "excess_sqrt_fixed_slope"]
        columns += [f"xi_{i + 1}" for i in range(self.config.dim)]
        self.artifact("excess.csv", report.rows(), columns)
        self.artifact("aggregate.csv", report.aggregate_rows())
        self.manifest.certifications["excess"] = len(report.curves) > 0
        self.manifest.details["excess_skipped"] = [k for k, _ in report.skipped]

    def _decay_artifact(self, name: str, report: DecayReport) -> None:
        self.artifact(name, report.rows())
        self.manifest.details[report.label] = {
            "slope": report.slope.slope if report.slope is not None else None,
            "fit_residual": report.slope.residual if report.slope is not None else None,
            "prefactor": report.prefactor,
            "alpha": report.alpha,
            "r_star": report.r_star,
            **report.metadata,
        }

    def run_thmT(self) -> None:
        medium = self.medium(self.config.seed)
        correctors = self.correctors(medium)
        far = self.config.far_points()
        growth = self.growth(correctors, [(0,) * self.config.dim] + far)
        with self.stage("thmT"):
            report, solution = run_theorem_T(
                medium,
                correctors,
                growth,
                self.config.g_spec(),
                far,
                self.config.tol,
                box_factor=self.config.box_factor,
                doubling_check=self.config.doubling_check,
                preconditioner=self.preconditioner,
            )
        self._decay_artifact("decay_T.csv", report)

        with self.stage("invariants"):
            r_list = self.config.r_list or self._default_invariant_radii(solution.g)
            if r_list:
                invariants = invariants_check(
                    medium, correctors, solution.u, solution.v, solution.g, r_list, box=solution.box
                )
                rows = invariants.as_rows()
                self.manifest.certifications["invariants"] = (
                    invariants.max_relative_mismatch() <= INVARIANT_TOL
                    and invariants.max_constant_residual() <= CONSTANT_INVARIANT_TOL
                )
            else:
                logger.warning("no admissible cutoff radius for the invariants on L=%d", self.config.size)
                rows = []
        self.artifact("invariants.csv", rows, ["r", "k", "lhs", "rhs", "mismatch"])

    def _default_invariant_radii(self, g) -> List[float]:
        rho = support_radius(g, (0,) * self.config.dim)
        first = float(np.ceil(rho + 1.0))
        return [r for r in (first, first + 1.0) if 2 * r + 1 < self.config.size / 2]

    def run_corC(self) -> None:
        medium = self.medium(self.config.seed)
        correctors = self.correctors(medium)
        far = self.config.far_points()
        growth = self.growth(correctors, [(0,) * self.config.dim] + far)
        with self.stage("corC"):
            report = corollary_C_experiment(
                medium,
                correctors,
                growth,
                far,
                self.config.tol,
                box_factor=self.config.box_factor,
                n_jobs=self.threads,
                preconditioner=self.preconditioner,
                continuum=self.config.continuum,
                progress=self.progress,
            )
        self._decay_artifact("decay_C.csv", report)
        self.manifest.certifications["green_symmetry"] = report.metadata.get("symmetry_relative", 0.0) <= SYMMETRY_TOL

    def run_lemmaL(self) -> None:
        medium = self.medium(self.config.seed)
        rows = []
        with self.stage("lemmaL"):
            for R in self.config.lemma_radii():
                report = lemma_L_check(
                    medium,
                    R,
                    self.config.N,
                    self.config.M,
                    self.config.seed,
                    self.config.tol,
                    n_jobs=self.threads,
                    preconditioner=self.preconditioner,
                )
                rows.append(report.row())
                self.manifest.certifications[f"lemmaL_{R}"] = bool(np.isfinite(report.ratio))
        self.artifact("lemmaL.csv", rows, ["R", "N", "lhs", "rhs", "ratio"])

    def execute(self) -> RunManifest:
        commands: Dict[str, Callable[[], None]] = {
            "correctors": self.run_correctors,
            "growth": self.run_growth,
            "excess": self.run_excess,
            "thmT": self.run_thmT,
            "corC": self.run_corC,
            "lemmaL": self.run_lemmaL,
        }
        try:
            with listening(self.log), threadpool_limits(limits=1):
                commands[self.config.command]()
        finally:
            self.log.write()

        self.manifest.iterations = self.log.iterations
        self.manifest.solves = self.log.count
        self.manifest.wall_times["solves"] = self.log.wall_time
        self.manifest.started = self.log.started
        for path in sorted(self.out_dir.iterdir()):
            if path.is_file() and path.name != "manifest.json":
                self.manifest.artifacts[path.name] = sha256(path)
        manifest_path = self.out_dir / "manifest.json"
        manifest_path.write_text(json.dumps(self.manifest.as_dict(), indent=2, sort_keys=True, default=str) + "\n",
                                 encoding="utf-8")
        logger.info("run %s finished, certifications %s", self.config.command,
                    "passed" if self.manifest.passed else "FAILED")
        return self.manifest


def run(
    config: ExperimentConfig,
    out_dir: Optional[str] = None,
    threads: Optional[int] = None,
    settings: Optional[RuntimeSettings] = None,
    progress: bool = False,
) -> RunManifest:
    """Execute `config`; CSVs first, manifest.json last.

    Precedence for the output directory and thread count: explicit argument,
    then the config value, then HOMOGLAB_* settings.

    Raises:
        HomoglabError: the module error of the failing stage, with `stage` in its context
    """
    settings = settings if settings is not None else load_settings()
    out = Path(out_dir or config.out or settings.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_jobs = threads or config.threads or settings.threads
    return Runner(config, settings, out, n_jobs, progress).execute()
