# Copyright 2026 The odflow Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#

"""Hospital visitation flow models: ingest, train, evaluate and explain."""

import json

from ._odflow import (
    Dataset,
    Model,
    OdflowError,
    __version__,
    cpc,
    feature_names,
    ingest,
    nrmse,
    smape,
)
from . import _odflow

__all__ = [
    "Dataset",
    "Model",
    "OdflowError",
    "__version__",
    "cpc",
    "cross_validate",
    "feature_names",
    "find_inflection",
    "fit",
    "ingest",
    "main",
    "nrmse",
    "run_cli",
    "smape",
    "synth_city",
]


def synth_city(out_dir, config=None):
    """Writes a synthetic city to out_dir; returns the oracle metrics."""
    return json.loads(_odflow.synth_city(json.dumps(config or {}), str(out_dir)))


def fit(config, dataset):
    """Trains one model family. config is a dict with a "family" key."""
    return _odflow.fit(json.dumps(config), dataset)


def cross_validate(config, dataset, protocol=None):
    """Runs the repeated k-fold protocol and returns the report as a dict."""
    return json.loads(_odflow.cross_validate(json.dumps(config), dataset, json.dumps(protocol or {})))


def find_inflection(grid, a, b):
    """Crossings of curve a against curve b on a shared grid."""
    return json.loads(_odflow.find_inflection(list(grid), list(a), list(b)))


def run_cli(args):
    """Runs the command-line tool in-process; returns (exit_code, stdout, stderr)."""
    return _odflow.run_cli([str(a) for a in args])


def main():
    import sys

    code, out, err = run_cli(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    raise SystemExit(code)
