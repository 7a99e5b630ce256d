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

"""Privacy, utility and efficiency lab for fine-tuning methods.

Plans are plain dicts; run_experiment serializes them for the native core.
"""

import json

from ._puelab import (
    BOS,
    VOCAB_SIZE,
    CheckpointError,
    ConfigError,
    ConsistencyError,
    DecodeError,
    Error,
    IoError,
    detokenize,
    emit_tradeoff_plot,
    flops_fft,
    flops_per_step,
    generate_corpus,
    load_metrics_csv,
    masked_mean_loss,
    memory_estimate,
    num_params,
    pareto_select,
    read_tradeoff_csv,
    regex_annotate,
    sensitivity_mask,
    tokenize,
)
from ._puelab import default_plan_json as _default_plan_json
from ._puelab import run_experiment as _run_experiment

__version__ = "0.1.0"


def default_plan(output_dir, seed=0):
    """The default three-method plan as a dict."""
    return json.loads(_default_plan_json(output_dir, seed))


def run_experiment(plan, output_dir, verbose=False):
    """Runs a plan dict into output_dir; missing fields take default values."""
    return _run_experiment(json.dumps(plan), str(output_dir), verbose)
