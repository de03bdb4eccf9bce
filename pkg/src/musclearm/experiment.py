"""Staged experiment pipeline with file artifacts.

Each stage is a pure function of (config, seed, prior artifacts) and
writes deterministic files, so any stage can be rerun and compared
byte for byte. Stages: goalspace -> learn -> evaluate / abundance,
plus a standalone optimizer benchmark. All outputs embed the config
hash and seed.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from . import benchmarks
from .abundance import AbundanceConfig, PostureSet, abundance_report, local_samples, query_abundance, select_goals
from .babble import BabbleConfig, evaluate, run_session
from .cmaes import CmaConfig, StopRules, optimize
from .goalspace import ConvexHull, GoalGrid, convex_hull, grid_intersect, remove_outliers, sample_empirical
from .invmodel import InverseModel
from .plant import N_MUSCLES, Plant, PlantConfig
from .seeding import derive_rng


class MissingArtifact(FileNotFoundError):
    """A stage requires files a previous stage has not produced."""


class GoalOutsideCut(ValueError):
    """Requested goal id is not part of the cut goal space."""


class CmaOptions(BaseModel):
    """Optimizer overrides; zero means use the dimension-scaled default."""

    lam: int = 0
    c_sigma: float = 0.0
    d_sigma: float = 1.0
    c_c: float = 0.0
    c_cov: float = 0.0

    def build(self, dim: int) -> CmaConfig:
        return CmaConfig(
            dim=dim,
            lam=self.lam,
            c_sigma=self.c_sigma,
            d_sigma=self.d_sigma,
            c_c=self.c_c,
            c_cov=self.c_cov,
        )


class ExperimentConfig(BaseModel):
    """Everything a full pipeline run needs, JSON serializable."""

    seed: int
    plant: PlantConfig = Field(default_factory=PlantConfig)
    babble: BabbleConfig = Field(default_factory=BabbleConfig)
    cma: CmaOptions = Field(default_factory=CmaOptions)
    abundance: AbundanceConfig = Field(default_factory=AbundanceConfig)
    empirical_postures: int = 2000
    grid_spacing: float = 0.03
    output_dir: str | None = None

    def config_hash(self) -> str:
        doc = self.model_dump(mode="json")
        doc.pop("output_dir", None)
        blob = json.dumps(doc, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def build_plant(self) -> Plant:
        # the experiment seed governs every stream, including the plant's
        return Plant(self.plant.model_copy(update={"seed": self.seed}))


# -- deterministic file helpers ---------------------------------------------


def _meta(config: ExperimentConfig) -> dict:
    return {"config_hash": config.config_hash(), "seed": config.seed}


def write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def write_csv(path: Path, header: list[str], rows, meta: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items()))]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def load_json(path: Path) -> dict:
    if not path.exists():
        raise MissingArtifact(f"expected artifact {path}")
    return json.loads(path.read_text())


# -- session log columns ------------------------------------------------------

SESSION_HEADER = (
    ["t", "xstar_x", "xstar_y", "xstar_z", "x_x", "x_y", "x_z"]
    + [f"qstar_{i}" for i in range(N_MUSCLES)]
    + [f"q_{i}" for i in range(N_MUSCLES)]
    + ["w"]
)
_X_COLS = slice(4, 7)
_Q_COLS = slice(7 + N_MUSCLES, 7 + 2 * N_MUSCLES)


def write_session_csv(path: Path, log, meta: dict) -> None:
    rows = []
    times = log.times
    for i in range(len(log)):
        rows.append(
            [float(times[i])]
            + [float(v) for v in log.x_star[i]]
            + [float(v) for v in log.x[i]]
            + [float(v) for v in log.q_star[i]]
            + [float(v) for v in log.q[i]]
            + [float(log.w[i])]
        )
    write_csv(path, SESSION_HEADER, rows, meta)


def load_session_samples(path: Path):
    """(positions, pressures) observation arrays from a session CSV."""
    if not path.exists():
        raise MissingArtifact(f"expected artifact {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    if data.size == 0:
        return np.zeros((0, 3)), np.zeros((0, N_MUSCLES))
    return data[:, _X_COLS], data[:, _Q_COLS]


# -- stages -----------------------------------------------------------------


def run_goalspace(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Sample postures, force the hull, intersect the cube grid."""
    out = Path(out_dir)
    plant = config.build_plant()
    points = sample_empirical(
        plant, config.empirical_postures, rng=derive_rng(config.seed, "goalspace")
    )
    hull = convex_hull(points)
    grid = grid_intersect(hull, config.grid_spacing)
    meta = _meta(config)
    write_json(
        out / "goalspace.json",
        {
            "metadata": meta,
            "empirical_count": len(points),
            "hull": hull.to_doc(),
            "grid": grid.to_doc(),
        },
    )
    write_csv(
        out / "points_empirical.csv",
        ["x", "y", "z"],
        [[float(v) for v in p] for p in points],
        meta,
    )
    write_csv(
        out / "goals_convex.csv",
        ["goal_id", "x", "y", "z"],
        [[i] + [float(v) for v in g] for i, g in enumerate(grid.goals)],
        meta,
    )
    return {
        "metadata": meta,
        "empirical_count": int(len(points)),
        "hull_vertices": int(len(hull.vertices)),
        "hull_faces": int(len(hull.faces)),
        "goal_count": int(len(grid)),
        "spacing": config.grid_spacing,
        "files": ["goalspace.json", "points_empirical.csv", "goals_convex.csv"],
    }


def _load_grid(out: Path) -> GoalGrid:
    doc = load_json(out / "goalspace.json")
    return GoalGrid.from_doc(doc["grid"])


def run_learn(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Goal babbling session, then the cut-space and feedback evaluations."""
    out = Path(out_dir)
    grid = _load_grid(out)
    plant = config.build_plant()
    bc = config.babble
    model, log = run_session(bc, plant, grid, rng=derive_rng(config.seed, "babble"))

    cut = remove_outliers(grid, model.centers, model.r_proto)
    meta = _meta(config)

    final: dict = {}
    reports = {
        "convex_plain": evaluate(model, grid, plant.fork("eval-final", "convex-plain")),
        "convex_feedback": evaluate(
            model, grid, plant.fork("eval-final", "convex-feedback"),
            use_feedback=True, alpha=bc.fb_alpha, steps=bc.fb_steps,
        ),
    }
    if len(cut):
        reports["cut_plain"] = evaluate(model, cut, plant.fork("eval-final", "cut-plain"))
        reports["cut_feedback"] = evaluate(
            model, cut, plant.fork("eval-final", "cut-feedback"),
            use_feedback=True, alpha=bc.fb_alpha, steps=bc.fb_steps,
        )
    final = {name: rep.to_doc() for name, rep in reports.items()}

    write_json(out / "model.json", {"metadata": meta, "model": model.to_doc()})
    write_session_csv(out / "session.csv", log, meta)
    write_json(
        out / "evals.json",
        {
            "metadata": meta,
            "snapshots": log.snapshots,
            "final": final,
            "warnings": log.warnings,
            "cut_grid": cut.to_doc(),
        },
    )
    write_csv(
        out / "goals_cut.csv",
        ["goal_id", "x", "y", "z"],
        [[i] + [float(v) for v in g] for i, g in enumerate(cut.goals)],
        meta,
    )
    return {
        "metadata": meta,
        "samples": len(log),
        "units": model.n_units,
        "snapshots": log.snapshots,
        "convex_goal_count": int(len(grid)),
        "cut_goal_count": int(len(cut)),
        "error_convex_plain": reports["convex_plain"].mean,
        "error_convex_feedback": reports["convex_feedback"].mean,
        "error_cut_plain": reports["cut_plain"].mean if len(cut) else None,
        "error_cut_feedback": reports["cut_feedback"].mean if len(cut) else None,
        "files": ["model.json", "session.csv", "evals.json", "goals_cut.csv"],
    }


def _load_model(out: Path) -> InverseModel:
    doc = load_json(out / "model.json")
    return InverseModel.from_doc(doc["model"])


def _load_cut(out: Path) -> GoalGrid:
    doc = load_json(out / "evals.json")
    return GoalGrid.from_doc(doc["cut_grid"])


def run_evaluate(config: ExperimentConfig, out_dir: str | Path, use_feedback: bool = False) -> dict:
    """Re-evaluate a stored model over the stored goal grids."""
    out = Path(out_dir)
    grid = _load_grid(out)
    model = _load_model(out)
    cut = _load_cut(out)
    plant = config.build_plant()
    bc = config.babble
    meta = _meta(config)
    reports = {
        "convex": evaluate(
            model, grid, plant.fork("evaluate-cmd", "convex", int(use_feedback)),
            use_feedback=use_feedback, alpha=bc.fb_alpha, steps=bc.fb_steps,
        )
    }
    if len(cut):
        reports["cut"] = evaluate(
            model, cut, plant.fork("evaluate-cmd", "cut", int(use_feedback)),
            use_feedback=use_feedback, alpha=bc.fb_alpha, steps=bc.fb_steps,
        )
    write_json(
        out / "evaluate.json",
        {"metadata": meta, "use_feedback": use_feedback,
         "reports": {k: r.to_doc() for k, r in reports.items()}},
    )
    return {
        "metadata": meta,
        "use_feedback": use_feedback,
        "error_convex": reports["convex"].mean,
        "error_cut": reports["cut"].mean if "cut" in reports else None,
        "files": ["evaluate.json"],
    }


def run_abundance(
    config: ExperimentConfig, out_dir: str | Path, goal_ids: list[int] | None = None
) -> dict:
    """Motor-abundance queries at selected cut-space goals."""
    out = Path(out_dir)
    model = _load_model(out)
    cut = _load_cut(out)
    if len(cut) == 0:
        raise MissingArtifact("cut goal space is empty, rerun learn")
    positions, pressures = load_session_samples(out / "session.csv")
    ac = config.abundance
    meta = _meta(config)

    if goal_ids is None:
        goal_ids = select_goals(cut, 10)
    else:
        bad = [g for g in goal_ids if g < 0 or g >= len(cut)]
        if bad:
            raise GoalOutsideCut(f"goal ids {bad} outside the cut goal space (0..{len(cut) - 1})")

    per_goal = []
    for gid in goal_ids:
        goal = cut.goals[gid]
        rng = derive_rng(config.seed, "abundance", gid)
        plant = config.build_plant().fork("abundance", gid)
        baseline = local_samples(positions, pressures, goal, ac.radius)
        collected, trials = query_abundance(goal, model, baseline, plant, ac, cut, rng)
        if len(baseline) == 0 or len(collected) == 0:
            per_goal.append(
                {"goal_id": gid, "goal": goal.tolist(), "skipped": True,
                 "baseline_count": len(baseline), "cma_count": len(collected)}
            )
            continue
        report = abundance_report(baseline, collected, plant, goal, ac, rng)
        gdir = out / "abundance" / f"goal_{gid:03d}"
        write_json(gdir / "report.json", {"metadata": meta, "trials": trials, "report": report.to_doc()})
        for name, summary in (("baseline", report.baseline), ("cma", report.cma)):
            write_csv(
                gdir / f"covariance_{name}.csv",
                [f"m{i}" for i in range(N_MUSCLES)],
                [[float(v) for v in row] for row in summary.covariance],
                meta,
            )
        write_csv(
            gdir / "postures.csv",
            ["tag"] + [f"q_{i}" for i in range(N_MUSCLES)] + ["x", "y", "z"],
            [
                [tag] + [float(v) for v in q] + [float(v) for v in x]
                for tag, q, x in zip(collected.tags, collected.pressures, collected.points)
            ],
            meta,
        )
        per_goal.append(
            {
                "goal_id": gid,
                "goal": goal.tolist(),
                "skipped": False,
                "baseline_count": len(baseline),
                "cma_count": len(collected),
                "baseline_error": report.baseline.mean_error,
                "cma_error": report.cma.mean_error,
                "baseline_variance": report.baseline.variance_mean,
                "cma_variance": report.cma.variance_mean,
                "largest_change": report.largest_change,
            }
        )

    write_json(out / "abundance" / "summary.json", {"metadata": meta, "goals": per_goal})
    write_csv(
        out / "abundance" / "comparison.csv",
        ["goal_id", "baseline_error", "cma_error", "baseline_variance", "cma_variance",
         "baseline_count", "cma_count"],
        [
            [g["goal_id"], g.get("baseline_error", float("nan")), g.get("cma_error", float("nan")),
             g.get("baseline_variance", float("nan")), g.get("cma_variance", float("nan")),
             g["baseline_count"], g["cma_count"]]
            for g in per_goal
        ],
        meta,
    )
    return {
        "metadata": meta,
        "goal_ids": [int(g) for g in goal_ids],
        "goals": per_goal,
        "files": ["abundance/summary.json", "abundance/comparison.csv"],
    }


def run_cma_bench(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Optimizer check on the standard test functions."""
    out = Path(out_dir)
    meta = _meta(config)
    results = {}
    for name, fn, x0, sigma0, f_target, budget in (
        ("sphere", benchmarks.sphere, np.ones(5), 0.5, 1e-10, 2000),
        ("rosenbrock", benchmarks.rosenbrock, np.array([-1.0, 1.0]), 0.3, 1e-6, 20000),
    ):
        res = optimize(
            fn,
            x0,
            sigma0,
            config=config.cma.build(len(x0)),
            stop=StopRules(f_target=f_target, max_evals=budget),
            rng=derive_rng(config.seed, "bench", name),
        )
        write_csv(
            out / f"bench_{name}.csv",
            ["generation", "evaluations", "best_f", "best_ever", "sigma", "axis_ratio", "min_std", "max_std"],
            [
                [s.generation, s.evaluations, s.best_f, s.best_ever, s.sigma, s.axis_ratio, s.min_std, s.max_std]
                for s in res.history
            ],
            meta,
        )
        results[name] = {
            "best_f": res.best_f,
            "evaluations": res.evaluations,
            "stop_reason": res.stop_reason,
            "target": f_target,
            "budget": budget,
            "reached": bool(res.stop_reason == "f_target"),
        }
    write_json(out / "bench.json", {"metadata": meta, "results": results})
    return {
        "metadata": meta,
        "results": results,
        "files": ["bench.json", "bench_sphere.csv", "bench_rosenbrock.csv"],
    }
