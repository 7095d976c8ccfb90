"""Blueprints: symbolic dynamics on finitely presented graph families.

Subpackages follow the pipeline: `core` (blueprint algebra and models),
`subshift` (patterns, windows, sliding-block codes), `domino` (emptiness
semi-decision with certificates), `qi` (quasi-isometry pattern transfer),
`geom` (exact rational tilings and the patch-blueprint correspondence),
`cli` (scriptable command surface).
"""

from .core import (
    Blueprint,
    Budget,
    BudgetExceeded,
    BlueprintError,
    EquivalenceVerdict,
    ModelGraph,
    PartialModel,
    UndefinedActionError,
    check_consistent_word,
    enumerate_partial_models,
    equivalence_query,
    model_graph,
    parse_blueprint,
    partial_shift,
    serialize_blueprint,
    word_from_text,
    word_to_text,
)

__all__ = [
    "Blueprint",
    "Budget",
    "BudgetExceeded",
    "BlueprintError",
    "EquivalenceVerdict",
    "ModelGraph",
    "PartialModel",
    "UndefinedActionError",
    "check_consistent_word",
    "enumerate_partial_models",
    "equivalence_query",
    "model_graph",
    "parse_blueprint",
    "partial_shift",
    "serialize_blueprint",
    "word_from_text",
    "word_to_text",
]
