"""Python bindings for the finsage retrieval engine."""
import json

from ._finsage import (
    FinsageError,
    binary_ndcg,
    dpo_term,
    mrr,
    normalized_recall,
    set_metrics,
    sigmoid,
    time_bonus,
)
from . import _finsage

__all__ = [
    "Engine",
    "FinsageError",
    "binary_ndcg",
    "cli",
    "dpo_term",
    "mrr",
    "normalized_recall",
    "resolved_config",
    "set_metrics",
    "sigmoid",
    "time_bonus",
]


def cli(*args):
    """Runs a finsage command in-process. Returns (exit_code, stdout, stderr)."""
    return _finsage.run_cli([str(a) for a in args])


def resolved_config(path=None, overrides=()):
    return json.loads(_finsage.resolved_config(None if path is None else str(path), list(overrides)))


class Engine:
    """Query engine over an indexed store."""

    def __init__(self, config_path=None, overrides=()):
        path = None if config_path is None else str(config_path)
        self._engine = _finsage.Engine(path, list(overrides))

    def __len__(self):
        return self._engine.size

    @property
    def config(self):
        return json.loads(self._engine.config_json())

    def retrieve(self, query, k=None):
        return json.loads(self._engine.retrieve_json(query, k))

    def evaluate(self, queries_path, mode="retrieval", k_list=()):
        return json.loads(self._engine.evaluate_json(str(queries_path), mode, list(k_list)))
