"""Smoke tests for the python bindings: the module loads, core operations
round-trip, and a miniature training run produces artifacts."""

import math
import os
import sys
import tempfile

if "COPD_MODULE_DIR" in os.environ:
    sys.path.insert(0, os.environ["COPD_MODULE_DIR"])

import _copd as copd  # noqa: E402


def test_vocab_and_domains():
    v = copd.task_vocab()
    assert v.size == 13
    assert copd.domain_ids() == ["modsum", "reverse", "parity"]
    d = copd.Domain("modsum")
    prompt, target = None, None
    case = d.generate(42)
    prompt, target = case.prompt, case.target
    assert len(prompt) == 4
    assert d.verify(prompt, list(target) + [v.eos]) == 1
    assert d.verify(prompt, []) == 0


def test_policy_distribution_and_rollout():
    v = copd.task_vocab()
    p = copd.Policy.zeros(v, 6)
    dist = p.next_token_distribution([], 1.0)
    assert len(dist) == v.size
    assert all(abs(x - 1.0 / v.size) < 1e-12 for x in dist)

    r = copd.sample_rollout(p, [8, 1, 2, 7], 4, 1.0, 7)
    assert r.completion == copd.sample_rollout(p, [8, 1, 2, 7], 4, 1.0, 7).completion
    assert all(abs(lp - math.log(1.0 / v.size)) < 1e-12 for lp in r.behavior_logprobs)


def test_group_advantages():
    values, degenerate = copd.group_advantages([1.0, 0.0])
    assert not degenerate
    assert abs(values[0] - 1.0) < 1e-12 and abs(values[1] + 1.0) < 1e-12
    values, degenerate = copd.group_advantages([1.0, 1.0])
    assert degenerate
    assert values == [0.0, 0.0]


def test_checkpoint_merge_and_overlap():
    v = copd.task_vocab()
    a = copd.Policy.zeros(v, 6)
    b = a.with_params([0.5] * len(a.params))
    merged = copd.merge([a, b], [0.5, 0.5])
    assert all(abs(x - 0.25) < 1e-12 for x in merged.params)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.ckpt")
        copd.save_checkpoint(b, path)
        loaded = copd.load_checkpoint(path)
        assert loaded.params == b.params

    rep = copd.top_k_overlap(a, a, [[8, 1, 2, 7]], 1, 3, 4, 5)
    assert rep["mean_overlap"] == 1.0
    assert rep["sym_kl_mean"] == 0.0


def test_train_end_to_end():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "run")
        config = {
            "schema_version": 1,
            "seed": 9,
            "out_dir": out,
            "branches": [
                {"domain": "modsum", "beta": 1.0},
                {"domain": "parity", "beta": 1.0},
            ],
            "schedule": {"mode": "coevolve", "cycles": 1, "s_rl": 2, "s_opd": 1},
            "grpo": {"group_size": 2, "batch": 2, "learning_rate": 0.05},
            "metrics": {"k": 5, "probe_prompts": 2, "probe_rollouts": 1},
        }
        result = copd.train(config, workers=1)
        assert result["total_updates"] == 2 * 1 * 3
        assert os.path.exists(result["merged_ckpt"])
        assert os.path.exists(result["metrics_path"])
        assert {row["model"] for row in result["final_evals"]} >= {"merged"}
