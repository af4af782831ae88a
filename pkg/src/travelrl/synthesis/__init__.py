from ..query import HardConstraintSet, QuerySpec
from .dataset import (
    DatasetItem,
    SynthesisWarning,
    load_dataset,
    sample_elements,
    save_dataset,
    split_counts,
    synthesize_dataset,
)
from .query_text import QueryTextError, extract_spec, render_query
from .solver import FeasibilityCertificate, InfeasibleError, estimate_budget, solve

__all__ = [
    "DatasetItem",
    "FeasibilityCertificate",
    "HardConstraintSet",
    "InfeasibleError",
    "QuerySpec",
    "QueryTextError",
    "SynthesisWarning",
    "estimate_budget",
    "extract_spec",
    "load_dataset",
    "render_query",
    "sample_elements",
    "save_dataset",
    "solve",
    "split_counts",
    "synthesize_dataset",
]
