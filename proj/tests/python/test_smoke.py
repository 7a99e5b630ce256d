# Copyright 2026 The PueLab Authors
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

"""Smoke tests of the Python module."""

import csv
import math
import xml.etree.ElementTree as ET

import pytest

import puelab

SMALL_MODEL = {"context_len": 32, "d_model": 16, "n_layers": 2, "n_heads": 2,
               "d_ff": 32}


def test_tokenize_round_trip():
    text = "Call Ana at 555-0100."
    ids = puelab.tokenize(text)
    assert ids[0] == puelab.BOS
    assert len(ids) == len(text.encode()) + 1
    assert puelab.detokenize(ids) == text


def test_corpus_spans_match_their_values():
    docs = puelab.generate_corpus("dialog", 3, 5)
    assert len(docs) == 5
    assert any(doc["spans"] for doc in docs)
    for doc in docs:
        raw = doc["text"].encode()
        for span in doc["spans"]:
            assert raw[span["start"]:span["end"]].decode() == span["value"]
        mask = puelab.sensitivity_mask(doc["text"], doc["spans"])
        assert len(mask) == len(raw) + 1
        assert mask[0] is False
        assert sum(mask) == sum(s["end"] - s["start"] for s in doc["spans"])


def test_generation_is_seeded():
    assert puelab.generate_corpus("bio", 9, 4) == puelab.generate_corpus("bio", 9, 4)


def test_masked_mean_loss():
    assert puelab.masked_mean_loss([1.0, 2.0, 4.0], [True, False, True], True) == (2.5, 2)
    assert puelab.masked_mean_loss([1.0], [True], False) == (None, 0)


def test_flops_and_memory():
    assert puelab.flops_fft(100, 1000) == 6 * 100 * 1000
    assert puelab.flops_per_step("fft", 100, 1000, 0, 1) == 6 * 100 * 1000
    assert puelab.memory_estimate("fft", 1000, 0, 8) == 4000
    assert puelab.num_params("{}") == 132928


def test_pareto_select():
    points = [
        {"method": "fft", "privacy": 2.0, "utility_loss": 0.5},
        {"method": "dp", "privacy": 6.0, "utility_loss": 0.9},
        {"method": "lora", "privacy": 5.0, "utility_loss": 0.7},
    ]
    assert puelab.pareto_select(points, 4.0)["method"] == "lora"
    assert puelab.pareto_select(points, 10.0) is None


def test_bad_input_raises_config_error():
    with pytest.raises(puelab.ConfigError):
        puelab.flops_per_step("sgd", 1, 1, 0, 1)
    with pytest.raises(puelab.ConfigError):
        puelab.run_experiment({"sweep": [{"method": "fft", "batch_size": 0}]},
                              "unused")
    assert issubclass(puelab.ConfigError, puelab.Error)


def test_small_experiment(tmp_path):
    plan = {
        "seed": 4,
        "corpus": {"n_docs": 10},
        "model": SMALL_MODEL,
        "pretrain": {"n_docs": 8, "config": {"epochs": 1, "warmup_steps": 0}},
        "sweep": [
            {"method": "fft", "epochs": 2, "warmup_steps": 1, "batch_size": 8},
            {"method": "lora", "epochs": 1, "warmup_steps": 0, "batch_size": 8,
             "lora": {"rank": 2, "alpha": 2}},
        ],
    }
    result = puelab.run_experiment(plan, tmp_path)
    labels = [run["label"] for run in result["runs"]]
    assert labels == ["fft", "lora_r2_a2"]
    for run in result["runs"]:
        rows = puelab.load_metrics_csv(run["directory"] + "/metrics.csv")
        assert rows == run["reports"]
        for row in rows:
            parts = (row["loss_train_sensitive"] * row["n_train_sensitive"]
                     + row["loss_train_nonsensitive"] * row["n_train_nonsensitive"])
            total = row["n_train_sensitive"] + row["n_train_nonsensitive"]
            assert math.isclose(row["loss_train_all"], parts / total, rel_tol=1e-9)

    root = ET.parse(tmp_path / "tradeoff.svg").getroot()
    assert root.tag.endswith("svg")
    with open(tmp_path / "tradeoff.csv", newline="") as f:
        assert len(list(csv.DictReader(f))) == 3
    assert len(puelab.read_tradeoff_csv(str(tmp_path / "tradeoff.csv"))) == 3
