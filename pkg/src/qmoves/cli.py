"""Command-line entry points: seeding, batch optimization, analysis, serving."""

import csv

import click
import numpy as np

from .analysis import (CLUSTER_PRESETS, SolutionRecord, dbscan, exp_gap_fit,
                       kde_density, prepare_bhw_clustering, qsl_sampling,
                       quantile_trajectories)
from .grape import GrapeConfig
from .problems import LEVELS, evaluate_fidelity, make_problem_ms
from .seeding import SeedProvenance, binned_random_seed, frequency_random_seed, random_seed
from .stochastic import SaConfig
from .store import Archive, run_batch


@click.group()
def main():
    """Quantum state-transfer control playground."""


def _load_archives(paths):
    records = []
    for p in paths:
        records.extend(Archive.read(p).records)
    return records


@main.command()
@click.option("--level", type=click.Choice(LEVELS), required=True)
@click.option("--T", "t_ms", type=float, required=True, help="duration in ms")
@click.option("--kind", type=click.Choice(["rs", "rs_binned", "frequency"]), default="rs")
@click.option("--count", type=int, default=10)
@click.option("--n-b", type=int, default=None, help="bin count for rs_binned")
@click.option("--seed", "master_seed", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
def seed(level, t_ms, kind, count, n_b, master_seed, out):
    """Generate unoptimized seeds and archive them with initial fidelities."""
    if kind == "rs_binned" and not n_b:
        raise click.UsageError("--n-b is required for rs_binned seeds")
    problem = make_problem_ms(level, t_ms)
    rng = np.random.default_rng(master_seed)
    records = []
    dt_ms = problem.dt * problem.units.mu_time * 1e3
    for i in range(count):
        if kind == "rs":
            ctrl = random_seed(problem, rng)
        elif kind == "rs_binned":
            ctrl = binned_random_seed(problem, n_b, rng)
        else:
            ctrl = frequency_random_seed(problem, rng)
        prov = SeedProvenance(kind=kind, n_b=n_b, source=f"cli:{master_seed}:{i}")
        records.append(SolutionRecord(
            level=level, T_ms=problem.T_ms, dt_ms=dt_ms,
            fidelity=evaluate_fidelity(problem, ctrl), method="seed",
            provenance=prov,
            controls={c.name: ctrl.values[:, p]
                      for p, c in enumerate(problem.channels)}))
    arch = Archive(manifest={"level": level, "T_ms": problem.T_ms, "kind": kind,
                             "n_b": n_b, "count": count, "master_seed": master_seed,
                             "cli": {"command": "seed",
                                     **click.get_current_context().params}},
                   records=records)
    arch.write(out)
    click.echo(f"wrote {count} {kind} seeds to {out}")


@main.command()
@click.option("--level", type=click.Choice(LEVELS), required=True)
@click.option("--T", "t_ms", type=float, required=True)
@click.option("--method", type=click.Choice(["grape", "sa"]), required=True)
@click.option("--seeds", "seeds_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_kv", multiple=True,
              help="config overrides as key=value (repeatable)")
@click.option("--workers", type=int, default=1)
@click.option("--budget", type=float, default=780.0, help="seconds per seed")
@click.option("--master-seed", type=int, default=0)
@click.option("--out", type=click.Path(), required=True)
def optimize(level, t_ms, method, seeds_path, config_kv, workers, budget,
             master_seed, out):
    """Optimize archived seeds in a budgeted batch."""
    seed_arch = Archive.read(seeds_path)
    if not seed_arch.records:
        raise click.UsageError(f"{seeds_path} holds no seeds")
    problem = make_problem_ms(level, t_ms)
    overrides = {}
    for kv in config_kv:
        key, _, value = kv.partition("=")
        if not value:
            raise click.UsageError(f"bad --config entry {kv!r}")
        overrides[key] = type_cast(value)
    cfg_cls = GrapeConfig if method == "grape" else SaConfig
    config = cfg_cls(wall_budget=budget, **overrides)
    seeds, provs = [], []
    for rec in seed_arch.records:
        seeds.append(rec.to_control(problem))
        provs.append(rec.provenance)
    arch = run_batch(problem, seeds, method, config, workers=workers,
                     min_budget=budget, provenances=provs, master_seed=master_seed)
    arch.manifest["cli"] = {"command": "optimize",
                            **{k: v if not isinstance(v, tuple) else list(v)
                               for k, v in click.get_current_context().params.items()}}
    arch.write(out)
    best = max(r.fidelity for r in arch.records)
    click.echo(f"optimized {len(seeds)} seeds; best F = {best:.6f}; wrote {out}")


def type_cast(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


@main.group()
def analyze():
    """Plot-ready tabular analyses over archives."""


@analyze.command()
@click.option("--archive", "archives", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--bandwidth", type=float, default=0.08)
@click.option("--out", type=click.Path(), required=True)
def density(archives, bandwidth, out):
    """CSV columns: t_lo, t_hi, log10_infidelity, density."""
    dm = kde_density(_load_archives(archives), bandwidth=bandwidth)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_lo", "t_hi", "log10_infidelity", "density"])
        for c in range(dm.density.shape[1]):
            for yi, d in zip(dm.y_grid, dm.density[:, c]):
                w.writerow([dm.t_edges[c], dm.t_edges[c + 1], yi, d])
    click.echo(f"wrote density map to {out}")


@analyze.command()
@click.option("--archive", "archives", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--preset", type=click.Choice(sorted(CLUSTER_PRESETS)), default="bhw_paper")
@click.option("--out", type=click.Path(), required=True)
def cluster(archives, preset, out):
    """CSV columns: record_id, T_ms, fidelity, label; plus fit lines."""
    records = _load_archives(archives)
    params = CLUSTER_PRESETS[preset]
    vectors, kept = prepare_bhw_clustering(records)
    if len(kept) == 0:
        raise click.ClickException("no records pass the clustering selection")
    labels = dbscan(vectors, **params)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["record_id", "T_ms", "fidelity", "label"])
        for rec, label in zip(kept, labels):
            w.writerow([rec.record_id, rec.T_ms, rec.fidelity, int(label)])
    for label in sorted(set(labels) - {-1}):
        members = [r for r, l in zip(kept, labels) if l == label]
        try:
            a, b = exp_gap_fit(members)
            click.echo(f"cluster {label}: {len(members)} records, "
                       f"log10(1-F) = {a:.3f} + {b:.2f} (T - 0.0929)")
        except ValueError:
            click.echo(f"cluster {label}: {len(members)} records (fit degenerate)")
    click.echo(f"wrote labels to {out}")


@analyze.command()
@click.option("--archive", "archives", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--tref", type=float, required=True, help="T_QSL^0.99 in ms")
@click.option("--samples", "samples_list", multiple=True, type=int,
              default=(30, 100, 300))
@click.option("--trials", type=int, default=1000)
@click.option("--seed", "master_seed", type=int, default=0)
def qsl(archives, tref, samples_list, trials, master_seed):
    """Random-sampling speed-limit table: n_samples, mean T_fit, success rate."""
    records = _load_archives(archives)
    click.echo(f"{'n_samples':>10} {'mean_T_fit_ms':>14} {'P':>7} {'discarded':>10}")
    for n in samples_list:
        est = qsl_sampling(records, tref, n, np.random.default_rng(master_seed),
                           n_trials=trials)
        click.echo(f"{n:>10} {est.mean_t_fit:>14.5f} "
                   f"{est.success_probability:>7.3f} {est.n_discarded:>10}")


@analyze.command()
@click.option("--archive", "archives", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--t-max", type=float, default=780.0)
@click.option("--points", type=int, default=120)
@click.option("--out", type=click.Path(), required=True)
def quantiles(archives, t_max, points, out):
    """CSV columns: wall_s, q25, q50, q75 of fidelity across runs."""
    records = _load_archives(archives)
    grid = np.linspace(0.0, t_max, points)
    q = quantile_trajectories(records, grid)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["wall_s", "q25", "q50", "q75"])
        for j, t in enumerate(grid):
            w.writerow([t, q[0, j], q[1, j], q[2, j]])
    click.echo(f"wrote quantile trajectories to {out}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8777)
def serve(host, port):
    """Run the local play service."""
    from .service import serve as _serve

    _serve(host=host, port=port)


if __name__ == "__main__":
    main()
