"""Run directories: artifact persistence, hashing, and pipeline stages.

A run directory holds every artifact of one evaluation as plain JSON /
JSONL files plus a manifest. Each artifact records the content hashes of
its inputs, so stale chains are detected instead of silently reused.
Artifacts are written atomically (temp file + rename); the judgement log
is append-only in content and replayed with last-verdict-wins semantics.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import uuid
from pathlib import Path

from .errors import AbcdeError, FormatError, NoJudgements, StaleArtifact
from .impact import ImpactTriple, impact_report
from .model import Dataset, load_dataset
from .pairs import (
    CategoryTotals,
    JudgementTask,
    PairKey,
    PairSample,
    WeightedPair,
    export_judgement_tasks,
    sample_pairs,
)
from .quality import Judgement, apply_judgements, quality_report
from .sampling import ItemSample, SampledItem, importance_sample_items

MANIFEST_FILE = "manifest.json"

ARTIFACT_FILES = {
    "impact": "impact.json",
    "item_sample": "item_sample.jsonl",
    "item_sample_meta": "item_sample_meta.json",
    "pair_sample": "pair_sample.jsonl",
    "pair_sample_meta": "pair_sample_meta.json",
    "tasks": "tasks.jsonl",
    "estimation_sample": "estimation_sample.jsonl",
    "estimation_meta": "estimation_meta.json",
    "judgements": "judgements.jsonl",
    "quality": "quality.json",
}


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def report_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def row_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _atomic_write(path: Path, content: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(content)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(tmp, path)


class Run:
    """One evaluation's artifact store."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    # -- manifest ---------------------------------------------------------

    @property
    def manifest_path(self) -> Path:
        return self.directory / MANIFEST_FILE

    def manifest(self) -> dict:
        if not self.manifest_path.exists():
            raise AbcdeError(f"{self.directory} is not a run directory (no manifest)")
        with open(self.manifest_path, "r", encoding="utf-8") as handle:
            return json.load(handle)

    def _save_manifest(self, manifest: dict) -> None:
        _atomic_write(self.manifest_path, report_json(manifest))

    @classmethod
    def init(cls, directory: str | Path, dataset_path: str | Path) -> "Run":
        run = cls(directory)
        run.directory.mkdir(parents=True, exist_ok=True)
        dataset_path = Path(dataset_path)
        dataset_hash = sha256_file(dataset_path)
        if run.manifest_path.exists():
            manifest = run.manifest()
            if manifest["dataset"]["sha256"] != dataset_hash:
                raise StaleArtifact(
                    "run was initialized with a different dataset "
                    f"({manifest['dataset']['sha256'][:12]} != {dataset_hash[:12]})"
                )
            return run
        manifest = {
            "run_id": uuid.uuid4().hex[:12],
            "created": _now(),
            "dataset": {"path": str(dataset_path.resolve()), "sha256": dataset_hash},
            "seed": None,
            "artifacts": {},
        }
        run._save_manifest(manifest)
        return run

    # -- seed handling ----------------------------------------------------

    def resolve_seed(self, seed: int | None) -> int:
        manifest = self.manifest()
        if seed is None:
            if manifest["seed"] is None:
                raise AbcdeError("no seed recorded for this run; pass --seed")
            return manifest["seed"]
        if manifest["seed"] is None:
            manifest["seed"] = seed
            self._save_manifest(manifest)
            return seed
        if manifest["seed"] != seed:
            raise AbcdeError(
                f"run already uses seed {manifest['seed']}; refusing to mix in {seed}"
            )
        return seed

    # -- artifact plumbing -------------------------------------------------

    def path_of(self, name: str) -> Path:
        return self.directory / ARTIFACT_FILES[name]

    def write_artifact(self, name: str, content: str, inputs: list[str]) -> None:
        path = self.path_of(name)
        _atomic_write(path, content)
        manifest = self.manifest()
        input_hashes = {}
        for upstream in inputs:
            if upstream == "dataset":
                input_hashes["dataset"] = manifest["dataset"]["sha256"]
            else:
                input_hashes[upstream] = manifest["artifacts"][upstream]["sha256"]
        manifest["artifacts"][name] = {
            "file": ARTIFACT_FILES[name],
            "sha256": sha256_file(path),
            "inputs": input_hashes,
            "written": _now(),
        }
        self._save_manifest(manifest)

    def verify_artifact(self, name: str) -> Path:
        """Check the artifact and its recorded input chain; returns its path."""
        manifest = self.manifest()
        if name not in manifest["artifacts"]:
            raise AbcdeError(f"run has no {name!r} artifact yet")
        entry = manifest["artifacts"][name]
        path = self.path_of(name)
        if not path.exists():
            raise StaleArtifact(f"{name} file is missing")
        if sha256_file(path) != entry["sha256"]:
            raise StaleArtifact(f"{name} file was modified after it was written")
        for upstream, recorded in entry["inputs"].items():
            if upstream == "dataset":
                current = sha256_file(Path(manifest["dataset"]["path"]))
            else:
                current = manifest["artifacts"][upstream]["sha256"]
            if current != recorded:
                raise StaleArtifact(f"{name} was built from an outdated {upstream}")
        return path

    # -- typed loads -------------------------------------------------------

    def dataset(self) -> Dataset:
        manifest = self.manifest()
        path = Path(manifest["dataset"]["path"])
        if sha256_file(path) != manifest["dataset"]["sha256"]:
            raise StaleArtifact("dataset file changed since the run was initialized")
        return load_dataset(path)

    def item_sample(self) -> ItemSample:
        sample_path = self.verify_artifact("item_sample")
        meta = json.loads(self.verify_artifact("item_sample_meta").read_text())
        items = []
        with open(sample_path, "r", encoding="utf-8") as handle:
            for line in handle:
                row = json.loads(line)
                items.append(
                    SampledItem(
                        item_id=row["item_id"],
                        draw_count=row["draw_count"],
                        importance_weight=row["importance_weight"],
                        impact=ImpactTriple(
                            split_rate=row["split_rate"],
                            merge_rate=row["merge_rate"],
                            jaccard_distance=row["jaccard_distance"],
                        ),
                        weight=row["weight"],
                        attributes=row["attributes"],
                    )
                )
        return ItemSample(
            items=tuple(items),
            seed=meta["seed"],
            requested_unique=meta["requested_unique"],
            exhaustive=meta["exhaustive"],
            overall=ImpactTriple(
                split_rate=meta["overall"]["split_rate"],
                merge_rate=meta["overall"]["merge_rate"],
                jaccard_distance=meta["overall"]["jaccard_distance"],
            ),
        )

    def _load_pair_rows(self, name: str) -> tuple[WeightedPair, ...]:
        path = self.verify_artifact(name)
        pairs = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                row = json.loads(line)
                pairs.append(
                    WeightedPair(
                        key=PairKey(
                            vantage_id=row["vantage"],
                            other_id=row["other"],
                            category=row["category"],
                            is_self=row["is_self"],
                        ),
                        u=row["u"],
                        label=row["label"],
                        draw_count=row["draw_count"],
                        dt0=row["dt0"],
                    )
                )
        return tuple(pairs)

    def pair_sample(self, estimation: bool = False) -> PairSample:
        meta = json.loads(self.verify_artifact("pair_sample_meta").read_text())
        name = "estimation_sample" if estimation else "pair_sample"
        pairs = self._load_pair_rows(name)
        return PairSample(
            pairs=pairs,
            seed=meta["seed"],
            requested_unique=meta["requested_unique"],
            horizon=meta["horizon"],
            totals=CategoryTotals(
                split_total=meta["totals"]["split_total"],
                merge_total=meta["totals"]["merge_total"],
                stable_total=meta["totals"]["stable_total"],
            ),
            total_weight=meta["total_weight"],
            truncated=meta["truncated"],
        )

    def estimation_sample(self) -> PairSample:
        if "estimation_sample" in self.manifest()["artifacts"]:
            return self.pair_sample(estimation=True)
        return self.pair_sample()

    def tasks(self) -> list[JudgementTask]:
        path = self.verify_artifact("tasks")
        out = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                row = json.loads(line)
                out.append(
                    JudgementTask(
                        task_id=row["task_id"], item_a=row["item_a"], item_b=row["item_b"]
                    )
                )
        return out

    def judgements(self) -> list[Judgement]:
        """The judgement log in arrival order (duplicates preserved)."""
        path = self.path_of("judgements")
        if not path.exists():
            return []
        out = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                row = json.loads(line)
                out.append(Judgement(task_id=row["task_id"], verdict=row["verdict"]))
        return out

    def append_judgements(self, new: list[Judgement]) -> int:
        """Append verdicts to the log; returns the new log length."""
        existing = self.judgements()
        rows = []
        for seq, judgement in enumerate(existing + new):
            rows.append(
                row_json(
                    {"seq": seq, "task_id": judgement.task_id, "verdict": judgement.verdict}
                )
            )
        content = "".join(r + "\n" for r in rows)
        inputs = ["tasks"] if "tasks" in self.manifest()["artifacts"] else []
        self.write_artifact("judgements", content, inputs)
        return len(existing) + len(new)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


# -- pipeline stages ---------------------------------------------------------


def stage_impact(run: Run, top_n: int = 100) -> dict:
    report = impact_report(run.dataset(), top_n=top_n)
    run.write_artifact("impact", report_json(report), inputs=["dataset"])
    return report


def stage_sample_items(run: Run, n_unique: int, seed: int | None) -> ItemSample:
    seed = run.resolve_seed(seed)
    sample = importance_sample_items(run.dataset(), n_unique, seed)
    rows = []
    for item in sample:
        rows.append(
            row_json(
                {
                    "item_id": item.item_id,
                    "draw_count": item.draw_count,
                    "importance_weight": item.importance_weight,
                    "weight": item.weight,
                    "split_rate": item.impact.split_rate,
                    "merge_rate": item.impact.merge_rate,
                    "jaccard_distance": item.impact.jaccard_distance,
                    "attributes": dict(item.attributes),
                }
            )
        )
    run.write_artifact("item_sample", "".join(r + "\n" for r in rows), inputs=["dataset"])
    meta = {
        "seed": sample.seed,
        "requested_unique": sample.requested_unique,
        "exhaustive": sample.exhaustive,
        "unique_count": len(sample),
        "total_draws": sum(i.draw_count for i in sample),
        "overall": sample.overall.as_dict(),
    }
    run.write_artifact(
        "item_sample_meta", report_json(meta), inputs=["dataset", "item_sample"]
    )
    return sample


def _pair_rows(pairs) -> str:
    rows = []
    for p in pairs:
        rows.append(
            row_json(
                {
                    "vantage": p.key.vantage_id,
                    "other": p.key.other_id,
                    "category": p.key.category,
                    "is_self": p.key.is_self,
                    "u": p.u,
                    "label": p.label,
                    "draw_count": p.draw_count,
                    "dt0": p.dt0,
                }
            )
        )
    return "".join(r + "\n" for r in rows)


def stage_sample_pairs(run: Run, n_unique: int, seed: int | None) -> PairSample:
    seed = run.resolve_seed(seed)
    sample = sample_pairs(run.dataset(), n_unique, seed)
    run.write_artifact("pair_sample", _pair_rows(sample.pairs), inputs=["dataset"])
    meta = {
        "seed": sample.seed,
        "requested_unique": sample.requested_unique,
        "horizon": sample.horizon,
        "truncated": sample.truncated,
        "total_weight": sample.total_weight,
        "unique_count": len(sample),
        "totals": {
            "split_total": sample.totals.split_total,
            "merge_total": sample.totals.merge_total,
            "stable_total": sample.totals.stable_total,
            "all_total": sample.totals.all_total,
        },
    }
    run.write_artifact(
        "pair_sample_meta", report_json(meta), inputs=["dataset", "pair_sample"]
    )
    return sample


def stage_export_tasks(run: Run, budget: int):
    sample = run.pair_sample()
    result = export_judgement_tasks(sample, budget)
    task_rows = [
        row_json({"task_id": t.task_id, "item_a": t.item_a, "item_b": t.item_b})
        for t in result.tasks
    ]
    run.write_artifact(
        "tasks", "".join(r + "\n" for r in task_rows), inputs=["pair_sample"]
    )
    run.write_artifact(
        "estimation_sample", _pair_rows(result.sample.pairs), inputs=["pair_sample", "tasks"]
    )
    meta = {
        "budget": budget,
        "budget_filled": result.budget_filled,
        "task_count": len(result.tasks),
        "unique_count": len(result.sample),
    }
    run.write_artifact(
        "estimation_meta", report_json(meta), inputs=["estimation_sample"]
    )
    return result


def stage_import_judgements(run: Run, path: str | Path) -> dict:
    """Append verdicts from a JSONL file of {"task_id", "verdict"} rows."""
    known = {t.task_id for t in run.tasks()}
    imported: list[Judgement] = []
    unknown = 0
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            if "task_id" not in row or "verdict" not in row:
                raise FormatError(f"line {lineno}: expected task_id and verdict")
            if row["verdict"] not in ("equivalent", "not_equivalent", "unavailable"):
                raise FormatError(f"line {lineno}: bad verdict {row['verdict']!r}")
            if row["task_id"] not in known:
                unknown += 1
                continue
            imported.append(Judgement(task_id=row["task_id"], verdict=row["verdict"]))
    total = run.append_judgements(imported)
    return {"imported": len(imported), "unknown_tasks": unknown, "log_length": total}


def stage_quality(run: Run) -> dict:
    sample = run.estimation_sample()
    judged, stats = apply_judgements(list(sample.pairs), run.judgements())
    if not judged and sample.totals.all_total > 0:
        raise NoJudgements("no judged pairs; import judgements first")
    report = quality_report(judged, sample.totals, stats)
    inputs = ["pair_sample"]
    artifacts = run.manifest()["artifacts"]
    if "estimation_sample" in artifacts:
        inputs.append("estimation_sample")
    if "judgements" in artifacts:
        inputs.append("judgements")
    run.write_artifact("quality", report_json(report), inputs=inputs)
    return report
