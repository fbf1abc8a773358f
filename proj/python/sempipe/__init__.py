"""Declarative optimizer and executor for semantic analytics pipelines."""

from ._sempipe import Session, pareto_frontier, reduce_input, token_count

__all__ = ["Session", "pareto_frontier", "reduce_input", "token_count"]
