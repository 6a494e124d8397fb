"""Archives of solution records and budgeted batch optimization.

Archive files are line-oriented text: a manifest header line, one
self-describing JSON record per line, and a trailing checksum over the
record bytes.  Appending is cheap; a truncated or tampered file fails
verification and surfaces no records.
"""

import hashlib
import json
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import SolutionRecord
from .grape import GrapeConfig, OptimizationResult, optimize as grape_optimize
from .problems import ControlVector, ProblemSpec, make_problem
from .seeding import SeedProvenance
from .stochastic import SaConfig, optimize as sa_optimize

_MAGIC = "#qmarchive v1 "
_FOOTER = "#sha256 "

# Fields that vary between runs of identical work (timings, fresh ids).
VOLATILE_FIELDS = ("wall_s", "history", "record_id")


class ArchiveError(RuntimeError):
    pass


@dataclass
class Archive:
    """Append-only record collection plus its manifest."""

    manifest: dict
    records: list = field(default_factory=list)

    def write(self, path: str):
        with open(path, "w") as fh:
            fh.write(_MAGIC + json.dumps(self.manifest, sort_keys=True) + "\n")
            digest = hashlib.sha256()
            for rec in self.records:
                line = json.dumps(rec.to_dict(), sort_keys=True) + "\n"
                digest.update(line.encode())
                fh.write(line)
            fh.write(_FOOTER + digest.hexdigest() + "\n")

    @classmethod
    def read(cls, path: str) -> "Archive":
        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines or not lines[0].startswith(_MAGIC):
            raise ArchiveError(f"{path}: not an archive")
        if len(lines) < 2 or not lines[-1].startswith(_FOOTER):
            raise ArchiveError(f"{path}: missing checksum footer (truncated?)")
        digest = hashlib.sha256()
        for line in lines[1:-1]:
            digest.update((line + "\n").encode())
        if digest.hexdigest() != lines[-1][len(_FOOTER):].strip():
            raise ArchiveError(f"{path}: checksum mismatch")
        manifest = json.loads(lines[0][len(_MAGIC):])
        records = [SolutionRecord.from_dict(json.loads(line)) for line in lines[1:-1]]
        return cls(manifest=manifest, records=records)

    def content_hash(self) -> str:
        """Hash of the scientific content, ignoring timing fields."""
        digest = hashlib.sha256()
        manifest = {k: v for k, v in self.manifest.items() if k != "ledger"}
        digest.update(json.dumps(manifest, sort_keys=True).encode())
        for rec in self.records:
            d = rec.to_dict()
            for k in VOLATILE_FIELDS:
                d.pop(k, None)
            d.get("provenance", {}).pop("created", None)
            digest.update(json.dumps(d, sort_keys=True).encode())
        return digest.hexdigest()

    @staticmethod
    def merge(a: "Archive", b: "Archive") -> "Archive":
        manifest = {"merged_from": [a.manifest, b.manifest]}
        return Archive(manifest=manifest, records=list(a.records) + list(b.records))


def default_archive_path(root: str, level: str, method: str) -> str:
    stamp = time.strftime("%Y%m%dT%H%M%S")
    d = os.path.join(root, level, method)
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, f"{stamp}.qmarchive")


class BudgetLedger:
    """Per-run wall budgets with eager redistribution on termination.

    Every run starts with the minimum budget; when a run finishes early its
    unused seconds are split equally among still-running and queued runs.
    """

    def __init__(self, n_runs: int, min_budget: float):
        self.min_budget = min_budget
        self.granted = np.full(n_runs, float(min_budget))
        self.spent = np.zeros(n_runs)
        self.state = ["queued"] * n_runs
        self.unspent_pool = 0.0
        self.log: list = []

    def start(self, i: int):
        self.state[i] = "running"

    def finish(self, i: int, spent: float) -> dict:
        """Mark run i done; returns {run index: seconds added}."""
        self.spent[i] = spent
        self.state[i] = "done"
        unused = max(0.0, self.granted[i] - spent)
        self.granted[i] = min(self.granted[i], spent)
        recipients = [j for j, s in enumerate(self.state) if s in ("queued", "running")]
        additions = {}
        if recipients and unused > 0:
            share = unused / len(recipients)
            for j in recipients:
                self.granted[j] += share
                additions[j] = share
        elif unused > 0:
            self.unspent_pool += unused
        self.log.append({"run": i, "spent": spent, "released": unused,
                         "recipients": list(additions)})
        return additions

    @property
    def total_granted(self) -> float:
        return self.min_budget * len(self.granted)

    def conservation_gap(self) -> float:
        """granted - (spent-capped grants + outstanding + pool); ~0 always."""
        outstanding = sum(self.granted[i] for i, s in enumerate(self.state)
                          if s != "done")
        consumed = sum(self.granted[i] for i, s in enumerate(self.state)
                       if s == "done")
        return self.total_granted - (consumed + outstanding + self.unspent_pool)


# Worker-side state, installed by the pool initializer (fork start method).
_WORKER: dict = {}


def _init_worker(level: str, n_t: int, n_x: int, shared_budgets):
    _WORKER["problem"] = ProblemSpec(level, n_t, n_x)
    _WORKER["budgets"] = shared_budgets


def _run_one(args: dict) -> dict:
    problem: ProblemSpec = _WORKER["problem"]
    budgets = _WORKER["budgets"]
    i = args["index"]

    def budget() -> float:
        return budgets[i]

    seed = problem.control_from_values(np.asarray(args["seed_values"]))
    try:
        if args["method"] == "grape":
            config = GrapeConfig(**args["config"])
            result = grape_optimize(problem, seed, config, budget_override=budget)
        elif args["method"] == "sa":
            config = SaConfig(**args["config"])
            rng = np.random.default_rng([args["master_seed"], i])
            result = sa_optimize(problem, seed, config, rng, budget_override=budget)
        else:
            raise ValueError(f"unknown method {args['method']!r}")
        return {"index": i, "ok": True, "fidelity": result.fidelity,
                "values": result.control.values,
                "iterations": result.iterations, "wall_s": result.wall_s,
                "termination": result.termination.value,
                "history": [(int(h[0]), float(h[1]), float(h[2]))
                            for h in result.history],
                "prop_steps": result.prop_steps}
    except Exception as exc:  # survive worker crashes; record the failure
        return {"index": i, "ok": False, "error": repr(exc),
                "values": seed.values, "wall_s": 0.0}


def run_batch(problem: ProblemSpec, seeds: Sequence[ControlVector], method: str,
              config, workers: int = 1, min_budget: float = 780.0,
              provenances: Optional[Sequence[SeedProvenance]] = None,
              master_seed: int = 0, keep_history: bool = True) -> Archive:
    """Optimize every seed under the redistribution ledger; returns an archive.

    method is "grape" or "sa"; config the matching dataclass.  Worker
    processes poll their budget between iterations, so seconds donated by
    early terminations extend runs already in flight.
    """
    if provenances is None:
        provenances = [SeedProvenance(kind="rs")] * len(seeds)
    config_dict = {k: getattr(config, k) for k in config.__dataclass_fields__}
    manifest = {"level": problem.level, "T_ms": problem.T_ms, "n_t": problem.n_t,
                "n_x": problem.grid.n_x, "method": method, "config": config_dict,
                "min_budget": min_budget, "master_seed": master_seed,
                "n_runs": len(seeds), "workers": workers, "version": __version__}
    ledger = BudgetLedger(len(seeds), min_budget)
    tasks = [{"index": i, "seed_values": np.asarray(s.values), "method": method,
              "config": config_dict, "master_seed": master_seed}
             for i, s in enumerate(seeds)]
    raw: dict = {}
    if workers <= 1:
        budgets = ledger.granted  # polled live by budget_override
        _WORKER["problem"] = problem
        _WORKER["budgets"] = budgets
        for t in tasks:
            ledger.start(t["index"])
            out = _run_one(t)
            raw[t["index"]] = out
            ledger.finish(t["index"], out.get("wall_s", 0.0))
    else:
        ctx = multiprocessing.get_context("fork")
        budgets = ctx.Array("d", [min_budget] * len(seeds), lock=False)
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                                 initializer=_init_worker,
                                 initargs=(problem.level, problem.n_t,
                                           problem.grid.n_x, budgets)) as pool:
            futures = {}
            for t in tasks:
                ledger.start(t["index"])
                futures[pool.submit(_run_one, t)] = t["index"]
            for fut in as_completed(futures):
                out = fut.result()
                i = out["index"]
                raw[i] = out
                additions = ledger.finish(i, out.get("wall_s", 0.0))
                for j, _ in additions.items():
                    budgets[j] = ledger.granted[j]
    records = []
    dt_ms = problem.dt * problem.units.mu_time * 1e3
    for i in range(len(seeds)):
        out = raw[i]
        controls = {c.name: np.asarray(out["values"])[:, p]
                    for p, c in enumerate(problem.channels)}
        if out.get("ok"):
            records.append(SolutionRecord(
                level=problem.level, T_ms=problem.T_ms, dt_ms=dt_ms,
                fidelity=out["fidelity"], method=method,
                provenance=provenances[i], controls=controls,
                iterations=out["iterations"], wall_s=out["wall_s"],
                termination=out["termination"],
                history=out["history"] if keep_history else None))
        else:
            records.append(SolutionRecord(
                level=problem.level, T_ms=problem.T_ms, dt_ms=dt_ms,
                fidelity=0.0, method=method, provenance=provenances[i],
                controls=controls, termination="failed: " + out["error"]))
    manifest["ledger"] = {"spent": float(ledger.spent.sum()),
                          "unspent_pool": ledger.unspent_pool,
                          "events": len(ledger.log)}
    return Archive(manifest=manifest, records=records)
