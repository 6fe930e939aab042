"""Co-evolving policy distillation on synthetic verifiable token tasks."""

from ._copd import (
    Domain,
    Policy,
    Rollout,
    Vocab,
    domain_ids,
    eval_accuracy,
    greedy_completion,
    group_advantages,
    load_checkpoint,
    merge,
    sample_rollout,
    save_checkpoint,
    task_vocab,
    top_k_overlap,
    train,
)

__all__ = [
    "Domain",
    "Policy",
    "Rollout",
    "Vocab",
    "domain_ids",
    "eval_accuracy",
    "greedy_completion",
    "group_advantages",
    "load_checkpoint",
    "merge",
    "sample_rollout",
    "save_checkpoint",
    "task_vocab",
    "top_k_overlap",
    "train",
]
