# Copyright 2026 The paostruct Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json

import pytest

import paostruct


def test_version_and_tools():
    assert paostruct.__version__ == "0.1.0"
    assert paostruct.tool_names() == [
        "get_concept",
        "map_ontology",
        "filter_ontology",
        "categorize_concepts",
        "generate_report",
        "check_cache",
    ]


def test_text_helpers():
    assert paostruct.normalize_concept("  Pleural   Effusions ") == "pleural effusion"
    assert paostruct.fuzzy_similarity("opacity", "opacities") == pytest.approx(66.6667)
    matched = paostruct.align(["effusions", "effusion"], ["effusion"], 80.0)
    assert matched == [(1, 0, 100.0)]
    assert paostruct.mcnemar_p_value(1, 9) == pytest.approx(0.021484375)


def test_errors_carry_codes():
    with pytest.raises(paostruct.PaostructError) as info:
        paostruct.align([], [], 0.0)
    assert info.value.code == "INVALID_ARGUMENT"
    with pytest.raises(paostruct.PaostructError) as info:
        paostruct.structure("report-to-poem", "x")
    assert info.value.code == "INVALID_ARGUMENT"


def test_report_to_report_is_valid_and_deterministic(data_dir):
    text = (data_dir / "corpus" / "r01.txt").read_text()
    first = paostruct.structure("report-to-report", text, step_clock=True)
    second = paostruct.structure("report-to-report", text, step_clock=True)
    assert first["status"] == "ok"
    assert first == second
    assert [s["key"] for s in first["output"]["sections"]] == list("ABCDEF")
    assert paostruct.validate_report(json.dumps(first["output"]), text) == []
    tools = [s["act"]["tool"] for s in first["trace"]["steps"] if "act" in s]
    assert tools[0] == "get_concept" and tools[-1] == "generate_report"


def test_concept_task_and_budget_failure():
    out = paostruct.structure("concepts-to-concepts", ["no pneumothorax", "cardiomegaly"])
    assert out["status"] == "ok"
    assert len(out["output"]) == 2
    with pytest.raises(TypeError):
        paostruct.structure("concepts-to-concepts", "cardiomegaly")


def test_validate_report_flags_ungrounded_findings(data_dir):
    text = (data_dir / "corpus" / "r01.txt").read_text()
    report = paostruct.structure("report-to-report", text)["output"]
    report["sections"][3]["findings"].append({"text": "x", "concepts": [], "source_sentences": ["Never said."]})
    problems = paostruct.validate_report(json.dumps(report), text)
    assert problems


def test_evaluate_fixture(data_dir):
    result = paostruct.evaluate(
        data_dir / "eval" / "gold.jsonl",
        {"Our Model": data_dir / "eval" / "pred_agent.jsonl",
         "Baseline": data_dir / "eval" / "pred_baseline.jsonl"},
        thresholds=[80],
    )
    models = result["metrics"]["thresholds"][0]["models"]
    assert [m["name"] for m in models] == ["Our Model", "Baseline"]
    assert "vs Our Model (p-value)" in result["text"]
