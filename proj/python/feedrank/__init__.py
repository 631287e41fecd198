# Copyright 2026 The feedrank Authors
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

"""Python bindings for the feedrank C++ core.

Records are passed as plain dicts and lists with the same field names as
the JSONL files.
"""

from ._feedrank import (
    Model,
    FeedrankError,
    add_cross_context_pairs,
    aggregate_ranking,
    compute_pair_id,
    ensemble_vote,
    load_checkpoint,
    make_synthetic_benchmark,
    mix,
    overlap_agreements,
    pairs_from_ranking,
    pairwise_accuracy,
    rbo,
    render_generation_prompt,
    run_scenario,
    split_by_prompt,
    train,
    validate,
)

__all__ = [
    "Model",
    "FeedrankError",
    "add_cross_context_pairs",
    "aggregate_ranking",
    "compute_pair_id",
    "ensemble_vote",
    "load_checkpoint",
    "make_synthetic_benchmark",
    "mix",
    "overlap_agreements",
    "pairs_from_ranking",
    "pairwise_accuracy",
    "rbo",
    "render_generation_prompt",
    "run_scenario",
    "split_by_prompt",
    "train",
    "validate",
]
