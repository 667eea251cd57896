"""Smoke test for the cfprobe extension module.

Build first:  pip install --no-build-isolation -e crates/py
Then run:     python python/smoke_test.py
"""

import json
import pathlib

import cfprobe

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "cli" / "tests" / "fixtures"

schema = {
    "Race": {"kind": "categorical", "categories": ["A", "B"]},
    "Age": {"kind": "numeric", "precision": 0},
    "Priors": {"kind": "numeric", "precision": 0},
    "Note": {"kind": "text"},
}
sensitive = {"attribute": "Race", "groups": ["A", "B"]}


def query(qid, race, age):
    return {"query_id": qid, "features": {"Race": race, "Age": age, "Priors": 2, "Note": "The man was calm."}}


def check_scale():
    scale = cfprobe.LabelScale(1, 5)
    assert (scale.min, scale.max) == (1, 5)
    assert scale.midpoint() == 3.0
    assert scale.clip_round(7.2) == 5
    assert abs(scale.normalize(2.0) - 0.5) < 1e-12
    try:
        cfprobe.LabelScale(5, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("inverted scale accepted")


def check_bias():
    assert cfprobe.worker_bias([(1, 3), (4, 4), (2, 5)]) == (2 + 0 + 3) / 3
    try:
        cfprobe.worker_bias([])
    except ValueError:
        pass
    else:
        raise AssertionError("empty pair list accepted")


def check_text():
    flipped = cfprobe.flip_text_terms("The Man met two men.", {"man": "woman", "men": "women"})
    assert flipped == "The Woman met two women.", flipped
    assert cfprobe.flip_text_terms(flipped, {"man": "woman", "men": "women"}) == "The Man met two men."


def check_plan():
    assert cfprobe.max_feasible_pairs(24, 8) == 12
    disguise = {"noise_fields": {"Age": 0.1}, "term_lexicon": {"man": "woman"}}
    pairs = []
    for i in range(3):
        p = json.loads(cfprobe.make_probe_pair(
            json.dumps(query(f"p{i}", "A", 40)), json.dumps(sensitive), json.dumps(schema),
            json.dumps(disguise), 100 + i))
        assert p["counterfactual"]["features"]["Race"] == "B"
        assert abs(p["counterfactual"]["features"]["Age"] - 40) <= 4
        assert p["counterfactual"]["features"]["Note"] == "The woman was calm."
        pairs.append(p)
    fillers = [query(f"f{i}", "AB"[i % 2], 30 + i) for i in range(6)]
    config = {"total_items": 12, "probe_pairs": 3, "rng_seed": 7}
    plan = json.loads(cfprobe.build_plan("w1", json.dumps(fillers), json.dumps(pairs), json.dumps(config)))
    assert len(plan["items"]) == 12
    assert cfprobe.validate_plan(json.dumps(plan), json.dumps(config)) == []
    tampered = dict(plan, items=plan["items"][:-1])
    assert cfprobe.validate_plan(json.dumps(tampered), json.dumps(config)) != []


def check_aggregation():
    responses = [
        {"query_id": "q1", "worker_id": w, "label": lab}
        for w, lab in [("w1", 1), ("w2", 2), ("w3", 5)]
    ] + [{"query_id": "q2", "worker_id": "w1", "label": 4}]
    policy = {"mode": "filter", "threshold": 1.0, "combiner": "median"}
    ds = json.loads(cfprobe.aggregate_labels(json.dumps(responses), json.dumps(policy), 1, 5))
    assert ds["labels"]["q1"]["label"] == 2
    assert ds["labels"]["q2"]["label"] == 4
    queries = [query("q1", "A", 30), query("q2", "B", 31)]
    gap = json.loads(cfprobe.parity_gap(json.dumps(ds), json.dumps(queries), json.dumps(schema), json.dumps(sensitive), 4))
    assert gap["parity_gap"] == 1.0, gap


def check_experiment():
    config = json.loads((FIXTURES / "experiment.json").read_text())
    config["pool"]["size"] = 120
    report = json.loads(cfprobe.run_experiment(json.dumps(config)))
    assert len(report["workers"]) == 20
    auc = report["detection"]["separation_auc"]
    assert auc is not None and auc > 0.8, auc
    print("experiment AUC:", auc)


for check in (check_scale, check_bias, check_text, check_plan, check_aggregation, check_experiment):
    check()
    print("ok", check.__name__)
print("smoke test passed")
