"""HTTP service over a run directory, backing the explorer / judgement UI.

Read endpoints serve the persisted artifacts; the only write is the
judgement log, serialized through a single lock. Slice queries evaluate
the same estimator code path the CLI uses, over the persisted item
sample.

Filter grammar for /api/slice: a comma-separated conjunction of clauses,
each one of
    name=value      equality (value parsed as bool/number when possible)
    name>=value, name<=value, name>value, name<value
                    numeric range checks
    name            has-flag: the attribute is present and truthy
Attribute names may contain ':' (flattened list attributes).
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Callable, Literal, Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import AbcdeError, NoJudgements, StaleArtifact
from .impact import estimate_impact_from_sample
from .model import Dataset
from .quality import Judgement, apply_judgements, quality_report
from .runs import Run
from .sampling import SampledItem, assign_clocks, sample_without_replacement

EXAMPLE_COUNT = 10
GROUP_LIMIT = 20
MISSING_GROUP = "(missing)"


class GroupRow(BaseModel):
    value: str
    weight: float
    split_rate: float
    merge_rate: float
    jaccard_distance: float
    count: int


class ExampleItem(BaseModel):
    item_id: str
    importance_weight: float
    split_rate: float
    merge_rate: float
    jaccard_distance: float
    attributes: dict


class SliceResponse(BaseModel):
    weight: float
    split_rate: float
    merge_rate: float
    jaccard_distance: float
    count: int
    insufficient: bool
    exhaustive: bool
    groups: list[GroupRow]
    examples: list[ExampleItem]


class ItemPanel(BaseModel):
    item_id: str
    attributes: dict


class TaskResponse(BaseModel):
    task_id: str
    item_a: ItemPanel
    item_b: ItemPanel
    remaining: int


class JudgementIn(BaseModel):
    task_id: str
    verdict: Literal["equivalent", "not_equivalent", "unavailable"]


class JudgementOut(BaseModel):
    accepted: bool
    replaced: bool
    judged_count: int
    remaining: int


class EstimateModel(BaseModel):
    estimate: float
    std_err: Optional[float] = None
    n_effective: float


class DeltaPrecisionModel(EstimateModel):
    ci95: Optional[list[float]] = None


class QualityResponse(BaseModel):
    delta_precision: DeltaPrecisionModel
    good_split: Optional[EstimateModel] = None
    bad_split: Optional[EstimateModel] = None
    good_merge: Optional[EstimateModel] = None
    bad_merge: Optional[EstimateModel] = None
    category_totals: dict
    counts: dict
    judgement_collection: Optional[dict] = None


def parse_filter(expression: str) -> Callable[[SampledItem], bool]:
    """Compile the documented filter grammar into a predicate."""
    clauses = []
    for raw in expression.split(","):
        raw = raw.strip()
        if not raw:
            continue
        for op in (">=", "<=", "=", ">", "<"):
            if op in raw:
                name, _, value = raw.partition(op)
                clauses.append((name.strip(), op, _parse_value(value.strip())))
                break
        else:
            clauses.append((raw, "flag", True))

    def predicate(item: SampledItem) -> bool:
        for name, op, value in clauses:
            actual = item.attributes.get(name)
            if actual is None:
                return False
            if op == "flag":
                if not actual:
                    return False
            elif op == "=":
                if isinstance(actual, bool) or isinstance(value, bool):
                    if bool(actual) != bool(value):
                        return False
                elif isinstance(value, float) and isinstance(actual, (int, float)):
                    if float(actual) != value:
                        return False
                elif str(actual) != str(value):
                    return False
            else:
                if not isinstance(actual, (int, float)) or isinstance(actual, bool):
                    return False
                if not isinstance(value, float):
                    return False
                if op == ">=" and not actual >= value:
                    return False
                if op == "<=" and not actual <= value:
                    return False
                if op == ">" and not actual > value:
                    return False
                if op == "<" and not actual < value:
                    return False
        return True

    return predicate


def _parse_value(text: str):
    if text.lower() == "true":
        return True
    if text.lower() == "false":
        return False
    try:
        return float(text)
    except ValueError:
        return text


def _slice_numbers(items, predicate):
    split = estimate_impact_from_sample(items, "split", predicate)
    merge = estimate_impact_from_sample(items, "merge", predicate)
    jd = estimate_impact_from_sample(items, "jd", predicate)
    return split, merge, jd


def create_app(run_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    run = Run(run_dir)
    app = FastAPI(title="clustering change evaluation service")
    write_lock = threading.Lock()

    state: dict = {"dataset": None, "item_sample": None}

    def item_sample():
        if state["item_sample"] is None:
            state["item_sample"] = run.item_sample()
        return state["item_sample"]

    def dataset() -> Dataset | None:
        if state["dataset"] is None:
            try:
                state["dataset"] = run.dataset()
            except (AbcdeError, OSError):
                return None
        return state["dataset"]

    def judged_task_ids() -> dict[str, str]:
        latest: dict[str, str] = {}
        for judgement in run.judgements():
            latest[judgement.task_id] = judgement.verdict
        return latest

    @app.get("/api/impact")
    def get_impact() -> dict:
        try:
            path = run.verify_artifact("impact")
        except AbcdeError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return json.loads(path.read_text())

    @app.get("/api/slice", response_model=SliceResponse)
    def get_slice(
        filter: str = "", group_by: str = "", metric: Literal["jd", "split", "merge"] = "jd"
    ) -> SliceResponse:
        try:
            sample = item_sample()
        except AbcdeError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        predicate = parse_filter(filter) if filter else None
        items = list(sample.items)
        split, merge, jd = _slice_numbers(items, predicate)

        selected = [s for s in items if predicate is None or predicate(s)]
        groups: list[GroupRow] = []
        if group_by:
            buckets: dict[str, list[SampledItem]] = {}
            for item in selected:
                value = item.attributes.get(group_by)
                label = MISSING_GROUP if value is None else str(value)
                buckets.setdefault(label, []).append(item)
            for label, members in buckets.items():
                g_split, g_merge, g_jd = _slice_numbers(members, None)
                groups.append(
                    GroupRow(
                        value=label,
                        weight=g_jd.weight,
                        split_rate=g_split.value,
                        merge_rate=g_merge.value,
                        jaccard_distance=g_jd.value,
                        count=len(members),
                    )
                )
            metric_key = {
                "jd": "jaccard_distance",
                "split": "split_rate",
                "merge": "merge_rate",
            }[metric]
            groups.sort(key=lambda g: (-getattr(g, metric_key), g.value))
            groups = groups[:GROUP_LIMIT]

        examples = _pick_examples(selected, sample.seed, filter, group_by)
        return SliceResponse(
            weight=jd.weight,
            split_rate=split.value,
            merge_rate=merge.value,
            jaccard_distance=jd.value,
            count=len(selected),
            insufficient=not selected,
            exhaustive=sample.exhaustive,
            groups=groups,
            examples=examples,
        )

    def _pick_examples(selected, seed, filter_expr, group_by) -> list[ExampleItem]:
        if not selected:
            return []
        # Deterministic weighted subsample, keyed by the query itself.
        derived = int.from_bytes(
            hashlib.sha256(f"{seed}|{filter_expr}|{group_by}|examples".encode()).digest()[:8],
            "big",
        )
        by_id = {s.item_id: s for s in selected}
        clocked = assign_clocks(
            [(s.item_id, s.importance_weight) for s in selected if s.importance_weight > 0],
            derived,
            scope="service/examples",
        )
        chosen = sample_without_replacement(clocked, EXAMPLE_COUNT)
        return [
            ExampleItem(
                item_id=item_id,
                importance_weight=by_id[item_id].importance_weight,
                split_rate=by_id[item_id].impact.split_rate,
                merge_rate=by_id[item_id].impact.merge_rate,
                jaccard_distance=by_id[item_id].impact.jaccard_distance,
                attributes=dict(by_id[item_id].attributes),
            )
            for item_id in chosen
        ]

    @app.get("/api/tasks/next")
    def get_next_task(response: Response):
        try:
            tasks = run.tasks()
        except AbcdeError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        judged = judged_task_ids()
        pending = [t for t in tasks if t.task_id not in judged]
        if not pending:
            return Response(status_code=204)
        task = pending[0]
        data = dataset()

        def panel(item_id: str) -> ItemPanel:
            attributes = {}
            if data is not None and item_id in data:
                attributes = dict(data.item(item_id).attributes)
            return ItemPanel(item_id=item_id, attributes=attributes)

        return TaskResponse(
            task_id=task.task_id,
            item_a=panel(task.item_a),
            item_b=panel(task.item_b),
            remaining=len(pending),
        )

    @app.post("/api/judgements", response_model=JudgementOut)
    def post_judgement(body: JudgementIn) -> JudgementOut:
        try:
            tasks = run.tasks()
        except AbcdeError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        task_ids = {t.task_id for t in tasks}
        if body.task_id not in task_ids:
            raise HTTPException(status_code=404, detail=f"unknown task {body.task_id!r}")
        with write_lock:
            replaced = body.task_id in judged_task_ids()
            run.append_judgements([Judgement(task_id=body.task_id, verdict=body.verdict)])
            judged = judged_task_ids()
        return JudgementOut(
            accepted=True,
            replaced=replaced,
            judged_count=len(judged),
            remaining=len(task_ids) - len(judged),
        )

    @app.get("/api/quality", response_model=QualityResponse)
    def get_quality() -> QualityResponse:
        try:
            sample = run.estimation_sample()
            judged, stats = apply_judgements(list(sample.pairs), run.judgements())
            if not judged and sample.totals.all_total > 0:
                raise NoJudgements("no judged pairs yet")
            report = quality_report(judged, sample.totals, stats)
        except (AbcdeError, StaleArtifact) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return QualityResponse(**report)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
