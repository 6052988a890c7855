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

"""Chest radiograph report structuring: agent pipeline and evaluation."""

import json
import os
from pathlib import Path

# Installed wheels carry their own data directory.
_bundled = Path(__file__).with_name("data")
if "PAOSTRUCT_DATA_DIR" not in os.environ and _bundled.is_dir():
    os.environ["PAOSTRUCT_DATA_DIR"] = str(_bundled)

from ._core import (  # noqa: E402
    PaostructError,
    __version__,
    align,
    fuzzy_similarity,
    mcnemar_p_value,
    normalize_concept,
    tool_names,
    validate_report,
)
from . import _core  # noqa: E402

TASKS = ("report-to-report", "report-to-concepts", "concepts-to-report", "concepts-to-concepts")


def structure(task, payload, *, config=None, cache=None, cache_path=None, step_clock=False):
    """Run one task. `payload` is report text or a list of concept strings.

    Returns a dict with status, output (on success), error (on failure),
    trace, and text for report-producing tasks.
    """
    if isinstance(payload, str) and task.startswith("concepts"):
        raise TypeError("concept tasks take a list of strings")
    raw = _core.structure_json(
        task,
        payload,
        None if config is None else str(config),
        cache,
        None if cache_path is None else str(cache_path),
        step_clock,
    )
    return json.loads(raw)


def evaluate(gold, predictions, thresholds=(), granularity="concept"):
    """Score prediction files against a gold file.

    `predictions` maps display names to paths; the first entry is the
    reference the others are tested against.
    """
    models = [(name, str(path)) for name, path in dict(predictions).items()]
    return json.loads(_core.evaluate_json(str(gold), models, list(thresholds), granularity))


__all__ = [
    "TASKS",
    "PaostructError",
    "__version__",
    "align",
    "evaluate",
    "fuzzy_similarity",
    "mcnemar_p_value",
    "normalize_concept",
    "structure",
    "tool_names",
    "validate_report",
]
