"""Python bindings for the apisync core."""

import json

from ._apisync import (
    ApisyncError,
    bleu,
    codebleu,
    enumerate_templates,
    extract_choice,
    mock_pair,
    normalize_answer,
    pass_at_k,
    red,
    render_signature,
    rouge_l,
    synthesis_prompt,
    tokenize_code,
)
from . import _apisync

__all__ = [
    "ApisyncError",
    "bleu",
    "codebleu",
    "diff_dumps",
    "enumerate_templates",
    "extract_choice",
    "locate",
    "mock_pair",
    "normalize_answer",
    "pass_at_k",
    "red",
    "render_signature",
    "rouge_l",
    "run_stage",
    "score_run",
    "synthesis_prompt",
    "tokenize_code",
]


def _rows(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def diff_dumps(legacy, updated, threshold=0.6):
    """Update records between two signature dumps (dicts in dump format)."""
    return _rows(_apisync.diff_dumps_jsonl(json.dumps(legacy), json.dumps(updated), threshold))


def locate(source, api_path, kind, overloads, file_id="<string>"):
    """Metadata items for invocations of one API in a source file."""
    return _rows(_apisync.locate_jsonl(file_id, source, api_path, kind, list(overloads)))


def score_run(task, answers, outputs):
    """Metric report for model outputs ({"item_id", "samples"} dicts)."""
    text = "".join(json.dumps(o) + "\n" for o in outputs)
    return json.loads(_apisync.score_run_json(task, list(answers), text))


def run_stage(config, stage="all", seed=None, resume=False):
    """Runs a pipeline stage (or "all") and returns the stage manifests."""
    return json.loads(_apisync.run_stage_json(str(config), stage, seed, resume))
