"""Evaluation engine for comparing two clusterings of one weighted item
population: exact impact metrics, importance-sampled impact exploration,
and judgement-driven quality estimates."""

from .errors import AbcdeError
from .impact import (
    ImpactTriple,
    estimate_impact_from_sample,
    impact_of_item,
    impact_of_set,
    impact_report,
    most_affected_clusters,
    partition_affected,
)
from .model import (
    Dataset,
    ItemRecord,
    RestrictionReport,
    combine_weights,
    load_dataset,
    propagate_past_weights,
    restrict_to_common,
)
from .pairs import (
    CategoryTotals,
    JudgementTask,
    PairSample,
    WeightedPair,
    category_totals,
    enumerate_pairs,
    export_judgement_tasks,
    pair_weight,
    sample_pairs,
    task_id_for,
)
from .quality import (
    Judgement,
    JudgedPair,
    apply_judgements,
    estimate_delta_precision,
    estimate_rates,
    estimate_slice_delta_precision,
    exhaustive_judged_pairs,
    pairweight_of_slice,
    quality_report,
)
from .sampling import (
    ClockedElement,
    DrawResult,
    ItemSample,
    SampledItem,
    assign_clocks,
    importance_sample_items,
    incremental_draws,
    sample_with_replacement,
    sample_without_replacement,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
