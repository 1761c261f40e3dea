"""Replicated simulation studies: datasets, chains, WAIC variants, aggregation."""

import csv
import io
import json
import logging
import math
from importlib import resources
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .datasets import generate_hier, generate_sv
from .exceptions import DomainError, WaicError
from .models import HIER_MODELS, SV_MODELS
from .partition import build_partition, consecutive_blocks, group_by
from .predictive import CONDITIONAL, MARGINAL, PredictiveConfig
from .samplers import McmcConfig, run_mcmc_waic_multi
from .stream import ingest_stream  # noqa: F401  (re-exported for the CLI)

log = logging.getLogger(__name__)

FAMILIES = ("hier1", "hier2", "sv")
SV_BLOCKS = (1, 2, 10, 20, 200)
FAILURE_FLAG_RATE = 0.02


@dataclass(frozen=True)
class Variant:
    """A WAIC flavour: predictive mode plus partition descriptor.

    ``partition`` is ``"ungrouped"``, ``"grouped"`` (one element per
    hierarchical group) or a positive block size of consecutive points.
    """

    mode: str
    partition: object = "ungrouped"

    def __post_init__(self):
        if self.mode not in (CONDITIONAL, MARGINAL):
            raise DomainError(f"unknown WAIC mode {self.mode!r}")
        p = self.partition
        if isinstance(p, str) and p not in ("ungrouped", "grouped"):
            raise DomainError(f"unknown partition descriptor {p!r}")
        if not isinstance(p, str) and (int(p) != p or p < 1):
            raise DomainError(f"block size must be a positive integer, got {p!r}")

    @property
    def name(self):
        p = self.partition
        if p == "ungrouped" or p == 1:
            return f"ungrouped {self.mode}"
        if p == "grouped":
            return f"grouped {self.mode}"
        return f"grouped ({p}) {self.mode}"

    def build_partition(self, dataset):
        labels = dataset.labels
        p = self.partition
        if p == "ungrouped" or p == 1:
            return build_partition(labels)
        if p == "grouped":
            if dataset.family != "hier":
                raise DomainError("'grouped' needs hierarchical data; use a block size for series")
            return group_by(labels, lambda label: label.split(",")[0])
        return consecutive_blocks(labels, int(p))


@dataclass(frozen=True)
class StudyConfig:
    family: str
    true_params: dict
    replicates: int = 30
    models: tuple = ()
    variants: tuple = ()
    burn_in: int = 500
    keep: int = 2000
    K: int = 500
    master_seed: int = 20240501
    J: int = 20
    n_j: int = 100
    T: int = 200
    n_jobs: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if not self.variants:
            raise DomainError("at least one WAIC variant is required")
        allowed = SV_MODELS if self.family == "sv" else HIER_MODELS
        if not self.models or any(m not in allowed for m in self.models):
            raise DomainError(f"models for {self.family} must be a nonempty subset of {allowed}")
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "variants", tuple(
            v if isinstance(v, Variant) else Variant(**v) for v in self.variants))

    @property
    def true_model(self):
        return "P" if self.family == "sv" else "H"

    def full_scale(self):
        """Full-scale settings: 500/300 replicates, keep 5000, K 1000/3000."""
        if self.family == "sv":
            return replace(self, replicates=300, keep=5000, K=3000)
        return replace(self, replicates=500, keep=5000, K=1000)

    def to_dict(self):
        d = asdict(self)
        d["variants"] = [{"mode": v.mode, "partition": v.partition} for v in self.variants]
        d["models"] = list(self.models)
        return d


def preset(name):
    """Desk-scale configuration of one of the built-in studies (``presets/<name>.yaml``)."""
    if name not in FAMILIES:
        raise DomainError(f"unknown preset {name!r}; choose one of {FAMILIES}")
    text = resources.files(__package__).joinpath("presets", f"{name}.yaml").read_text()
    return StudyConfig(**yaml.safe_load(text))


def load_study_config(path):
    """Read a YAML (or JSON) study configuration.

    ``preset: <name>`` starts from a built-in configuration; any other keys
    override it.
    """
    doc = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(doc, dict):
        raise DomainError("study configuration must be a mapping")
    base = preset(doc.pop("preset")).to_dict() if "preset" in doc else {}
    base.update(doc)
    try:
        return StudyConfig(**base)
    except TypeError as exc:
        raise DomainError(f"bad study configuration: {exc}") from None


@dataclass
class StudyReport:
    config: dict
    replicate_rows: list = field(default_factory=list)
    summary_rows: list = field(default_factory=list)
    selection_rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_replicates(self):
        return self.config.get("replicates", 0)


def generate_dataset(config, rng):
    if config.family == "sv":
        return generate_sv(config.true_params, config.T, rng)
    return generate_hier(config.true_params, config.J, config.n_j, rng)


def _run_replicate(config, index, seed_seq):
    # spawn from a copy: SeedSequence.spawn advances the caller's counter
    fresh = np.random.SeedSequence(seed_seq.entropy, spawn_key=seed_seq.spawn_key,
                                   pool_size=seed_seq.pool_size)
    data_seq, *model_seqs = fresh.spawn(1 + len(config.models))
    dataset = generate_dataset(config, np.random.default_rng(data_seq))
    variants = [(v.build_partition(dataset), PredictiveConfig(v.mode, config.K)) for v in config.variants]
    rows, low_ess, neg_inf = [], [], 0
    for model, mseq in zip(config.models, model_seqs):
        mcmc = McmcConfig(config.burn_in, config.keep, seed=int(mseq.generate_state(1)[0]))
        run = run_mcmc_waic_multi(model, dataset, variants, mcmc, latent_free_marginal="conditional")
        for v, result in zip(config.variants, run.results):
            rows.append({"replicate": index, "variant": v.name, "model": model,
                         "waic": result.waic, "lppd": result.lppd, "p_waic": result.p_waic})
        low_ess.extend(f"{model}:{k}" for k in run.low_ess)
        neg_inf += run.neg_inf_count
    return rows, low_ess, neg_inf


def _replicate_task(args):
    config, index, seed_seq = args
    try:
        return index, _run_replicate(config, index, seed_seq), None
    except (WaicError, ArithmeticError, ValueError) as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def _mean_se(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(values.size)) if values.size > 1 else math.nan
    return mean, se


def select_models(rows, models):
    """Per (replicate, variant), the model with the smallest WAIC (first listed wins ties)."""
    table = {}
    for row in rows:
        table.setdefault((row["replicate"], row["variant"]), {})[row["model"]] = row["waic"]
    chosen = {}
    for key, waics in table.items():
        best = None
        for model in models:
            if model in waics and (best is None or waics[model] < waics[best]):
                best = model
        chosen[key] = best
    return chosen


def aggregate(config, replicate_rows, failures=(), low_ess=(), neg_inf=0):
    report = StudyReport(config=config.to_dict(), replicate_rows=list(replicate_rows),
                         failures=list(failures))
    ok = sorted({row["replicate"] for row in replicate_rows})
    for v in config.variants:
        for model in config.models:
            cell = [r for r in replicate_rows if r["variant"] == v.name and r["model"] == model]
            row = {"variant": v.name, "model": model, "n": len(cell)}
            for key in ("waic", "lppd", "p_waic"):
                row[f"mean_{key}"], row[f"se_{key}"] = _mean_se([r[key] for r in cell])
            report.summary_rows.append(row)
    chosen = select_models(replicate_rows, config.models)
    for v in config.variants:
        picks = [chosen[(r, v.name)] for r in ok if (r, v.name) in chosen]
        n = len(picks)
        p = sum(1 for m in picks if m == config.true_model) / n if n else math.nan
        se = math.sqrt(p * (1 - p) / n) if n else math.nan
        report.selection_rows.append({"variant": v.name, "true_model": config.true_model,
                                      "proportion": p, "se": se, "n": n})
    n_fail = len(failures)
    report.diagnostics = {
        "replicates_ok": len(ok),
        "replicates_failed": n_fail,
        "failure_flag": n_fail > FAILURE_FLAG_RATE * config.replicates,
        "low_ess": sorted(set(low_ess)),
        "low_ess_count": len(low_ess),
        "neg_inf_marginal": int(neg_inf),
    }
    return report


def run_study(config, progress=None):
    """Run every replicate and aggregate.

    Replicate ``i`` draws from the ``i``-th child of the master seed, and
    aggregation is an ordered fold, so output does not depend on ``n_jobs``.
    """
    children = np.random.SeedSequence(config.master_seed).spawn(config.replicates)
    tasks = [(config, i, seq) for i, seq in enumerate(children)]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            outcomes = list(pool.map(_replicate_task, tasks))
    else:
        outcomes = []
        for task in tasks:
            outcomes.append(_replicate_task(task))
            if progress:
                progress(task[1] + 1, config.replicates)
    rows, failures, low_ess, neg_inf = [], [], [], 0
    for index, payload, error in sorted(outcomes, key=lambda o: o[0]):
        if error is not None:
            log.warning("replicate %d failed: %s", index, error)
            failures.append({"replicate": index, "error": error})
            continue
        r_rows, r_low, r_neg = payload
        rows.extend(r_rows)
        low_ess.extend(f"replicate {index} {k}" for k in r_low)
        neg_inf += r_neg
    return aggregate(config, rows, failures, low_ess, neg_inf)


def _fmt(x):
    if isinstance(x, float):
        return "NA" if math.isnan(x) else repr(x)
    return str(x)


def _csv(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


SUMMARY_COLUMNS = ("variant", "model", "mean_waic", "mean_lppd", "mean_p_waic",
                   "se_waic", "se_lppd", "se_p_waic", "n")
SELECTION_COLUMNS = ("variant", "true_model", "proportion", "se", "n")
REPLICATE_COLUMNS = ("replicate", "variant", "model", "waic", "lppd", "p_waic")


def format_pretty(report):
    lines = []
    header = f"{'WAIC type':<32} {'model':>5} {'mean(WAIC)':>12} {'mean(lppd)':>12} {'mean(pWAIC)':>12} " \
             f"{'se(WAIC)':>9} {'se(lppd)':>9} {'se(pWAIC)':>9}"
    lines.append(header)
    lines.append("-" * len(header))

    def num(x, width, digits=2):
        return f"{'NA':>{width}}" if math.isnan(x) else f"{x:>{width}.{digits}f}"

    for row in report.summary_rows:
        lines.append(f"{row['variant']:<32} {row['model']:>5} {num(row['mean_waic'], 12)} "
                     f"{num(row['mean_lppd'], 12)} {num(row['mean_p_waic'], 12)} {num(row['se_waic'], 9)} "
                     f"{num(row['se_lppd'], 9)} {num(row['se_p_waic'], 9, 3)}")
    lines.append("")
    lines.append(f"{'WAIC type':<32} {'proportion correct':>18} {'se':>8}")
    for row in report.selection_rows:
        lines.append(f"{row['variant']:<32} {num(row['proportion'], 18, 3)} {num(row['se'], 8, 3)}")
    d = report.diagnostics
    if d:
        lines.append("")
        lines.append(f"replicates ok: {d.get('replicates_ok')}  failed: {d.get('replicates_failed')}"
                     + ("  [FAILURE RATE ABOVE 2%]" if d.get("failure_flag") else ""))
        lines.append(f"chains with ESS < 100: {d.get('low_ess_count')}  "
                     f"-inf marginal densities: {d.get('neg_inf_marginal')}")
    return "\n".join(lines) + "\n"


def emit_report(report, out_dir, formats=("csv", "json", "pretty")):
    """Write the report; returns the list of files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        for name, rows, cols in (("summary.csv", report.summary_rows, SUMMARY_COLUMNS),
                                 ("selection.csv", report.selection_rows, SELECTION_COLUMNS),
                                 ("replicates.csv", report.replicate_rows, REPLICATE_COLUMNS)):
            (out / name).write_text(_csv(rows, cols))
            written.append(out / name)
    if "json" in formats:
        doc = {"config": report.config, "summary": report.summary_rows, "selection": report.selection_rows,
               "failures": report.failures, "diagnostics": report.diagnostics}
        (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True, default=_json_default))
        written.append(out / "report.json")
    if "pretty" in formats:
        (out / "report.txt").write_text(format_pretty(report))
        written.append(out / "report.txt")
    return written


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")
