"""Cache for desk-scale study reports, keyed on config and result-affecting source."""

import hashlib
import json
import os
import pickle
import time
from pathlib import Path

import streamwaic
from streamwaic.harness import aggregate, run_study

CACHE_DIR = Path(os.environ.get("STREAMWAIC_STUDY_CACHE", Path(__file__).resolve().parent.parent / ".study_cache"))
SOURCES = ("accumulators.py", "datasets.py", "engine.py", "model.py",
           "models.py", "predictive.py", "samplers.py")


def study_key(config):
    h = hashlib.sha256(json.dumps(config.to_dict(), sort_keys=True).encode())
    root = Path(streamwaic.__file__).parent
    for name in SOURCES:
        h.update((root / name).read_bytes())
    return h.hexdigest()[:20]


def cached_study(config):
    """Run ``config`` or load a previous run with the identical key.

    Returns ``(report, seconds, from_cache)``; ``seconds`` is the wall time of
    the run that produced the report (``None`` if it was not recorded).
    """
    path = CACHE_DIR / f"{config.family}-{study_key(config)}.pkl"
    timing = path.with_suffix(".json")
    if path.exists():
        report = pickle.loads(path.read_bytes())
        seconds = json.loads(timing.read_text())["seconds"] if timing.exists() else None
        from_cache = True
    else:
        start = time.perf_counter()
        report = run_study(config)
        seconds = time.perf_counter() - start
        CACHE_DIR.mkdir(parents=True, exist_ok=True)
        path.write_bytes(pickle.dumps(report))
        timing.write_text(json.dumps({"seconds": seconds}))
        from_cache = False
    # re-aggregate from the per-replicate rows so aggregation is always exercised
    fresh = aggregate(config, report.replicate_rows, report.failures)
    fresh.diagnostics = report.diagnostics
    return fresh, seconds, from_cache
