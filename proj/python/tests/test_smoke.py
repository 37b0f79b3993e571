import math

import pytest

import funrl


TOOLS = [{
    "name": "get_team_rank",
    "description": "Get the team ranking.",
    "parameters": {
        "type": "dict",
        "properties": {
            "team_name": {"type": "string", "description": "Team."},
            "season": {"type": "string", "description": "Season."},
            "type": {"type": "string", "description": "Kind.", "enum": ["regular", "playoff"]},
        },
        "required": ["team_name", "season", "type"],
    },
}]
REFERENCE = '[get_team_rank(team_name="LA Lakers", season="2021", type="regular")]'
SAMPLE = {"id": "t", "query": "rank?", "tools": TOOLS, "reference": REFERENCE, "category": "simple"}


def test_parse_and_match():
    calls = funrl.parse_call_list("[f(a=1, b=[1, 2.5], c={'k': 'v'})]")
    assert calls == [("f", {"a": 1, "b": [1, 2.5], "c": {"k": "v"}})]
    assert funrl.canonicalize("[f(a='x')]") == '[f(a="x")]'
    assert funrl.calls_match("[f(a=1), g(b=2)]", "[g(b=2), f(a=1)]")
    assert not funrl.calls_match("[f(a=1)]", "[f(a=1.0)]")
    with pytest.raises(ValueError):
        funrl.parse_call_list("[]")


def test_validation():
    assert funrl.validate_calls(REFERENCE, TOOLS) == []
    errors = funrl.validate_calls('[get_team_rank(team_name="x", season=2021, type="regular")]', TOOLS)
    assert len(errors) == 1


def test_reward():
    good = f"<think>ok</think><answer>{REFERENCE}</answer>"
    assert funrl.compute_reward(good, SAMPLE)["reward"] == 1
    bad = funrl.compute_reward("<answer>x</answer>", SAMPLE)
    assert bad["reward"] == 0 and bad["failure_reason"] == "BadFormat"


def test_advantages_and_entropy():
    assert funrl.group_advantages([1, 0, 0, 1]) == [1, -1, -1, 1]
    assert funrl.adjust_advantages([1.0], 0.3, 2.0, 0.1) == [1.6]
    e = funrl.cot_entropy([[0.25, 0.25, 0.25]], "plugin", "sum")
    assert abs(e - 1.0397) < 1e-4
    u = [[[0.25] * 4] * 2]
    assert abs(funrl.cot_entropy([[0.25, 0.25]], "full", "mean_per_token", u) - math.log(4)) < 1e-12
    assert abs(funrl.categorical_kl([1.0, 0.0], [0.5, 0.5]) - math.log(2)) < 1e-15
    assert funrl.clipped_surrogate([1.5], [1.0], 0.2, [0.0], 0.0) == pytest.approx(1.2)


def test_data_and_pipeline():
    data = funrl.generate_dataset(3, {"simple": 10, "irrelevance": 5})
    assert len(data) == 15
    assert data == funrl.generate_dataset(3, {"simple": 10, "irrelevance": 5})
    oracle = {s["id"]: f"<think>t</think><answer>{s['reference']}</answer>" for s in data}
    assert funrl.evaluate(oracle, data)["overall"] == 1.0
    retained, stats = funrl.run_pipeline(data, {data[0]["id"]: "fail"})
    assert stats["input_count"] == 15
    assert stats["after_llm_count"] == 14
    assert len(retained) == 14


def test_train_is_deterministic():
    data = funrl.generate_dataset(1, {"simple": 12, "multiple": 4})
    cfg = {"steps": 5, "batch_size": 4, "seed": 9}
    a = funrl.train(cfg, data)
    b = funrl.train(cfg, data)
    assert a["metrics"] == b["metrics"]
    assert len(a["metrics"]) == 5
    assert a["metrics"][0]["mean_kl"] == 0.0
    with pytest.raises(ValueError):
        funrl.train({"alpha": 0.0}, data)
