"""Command-line front end: experiment configuration and plot-ready data files.

Three subcommands cover the workflow: `tradeoff` emits the full single-channel
selection geometry (sweep curve, envelope, pf marker, operating point),
`compare` runs ensembles of every requested criterion plus the rate-split
bound, and `sample` demonstrates the statistical allocation converging to its
operating point. Options override config-file values; outputs are
deterministic given the master seed and land in an atomically created run
directory. FAIRSHARE_THREADS caps ensemble parallelism.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path

import click
import numpy as np

from fairshare import allocators, benchmark, fairness, tristage
from fairshare.benchmark import CRITERIA, _draw_block, block_seed, db_to_linear
from fairshare.channel import zfdpc_rates
from fairshare.errors import ConfigError, FairshareError

EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

_SCHEMA_VERSION = 1

#: Spawn key namespace for the draw-sampling RNG, disjoint from block seeds.
_SAMPLER_KEY = 1 << 40

_MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; the single source of truth for a run."""

    K: int = 2
    N: int = 2
    P_dB: tuple = (0.0,)
    criteria: tuple = CRITERIA
    n_blocks: int = 1000
    c_grid: int = 201
    master_seed: int = 0
    output_dir: str | None = None
    output_formats: tuple = ("csv", "json")

    def validate(self) -> "ExperimentConfig":
        if self.K < 1:
            raise ConfigError(f"config.K must be >= 1, got {self.K}")
        if self.N < 1:
            raise ConfigError(f"config.N must be >= 1, got {self.N}")
        if self.K > self.N:
            raise ConfigError(f"config requires K <= N, got K={self.K}, N={self.N}")
        if not self.P_dB:
            raise ConfigError("config.P_dB must list at least one power")
        for p in self.P_dB:
            if not np.isfinite(p):
                raise ConfigError(f"config.P_dB entries must be finite, got {p}")
        if self.n_blocks < 1:
            raise ConfigError(f"config.n_blocks must be >= 1, got {self.n_blocks}")
        if self.c_grid < 2:
            raise ConfigError(f"config.c_grid must be >= 2, got {self.c_grid}")
        if not 0 <= self.master_seed <= _MAX_SEED:
            raise ConfigError("config.master_seed must fit in an unsigned 64-bit int")
        for crit in self.criteria:
            if crit not in CRITERIA:
                raise ConfigError(
                    f"config.criteria entry {crit!r} unknown; expected one of {list(CRITERIA)}"
                )
        if not self.criteria:
            raise ConfigError("config.criteria must list at least one criterion")
        for fmt in self.output_formats:
            if fmt not in ("csv", "json"):
                raise ConfigError(f"config.output_formats entry {fmt!r} must be csv or json")
        if not self.output_formats:
            raise ConfigError("config.output_formats must not be empty")
        return self


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level config must be a JSON object")
    return data


def _coerce(name: str, value, kind):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config.{name}: cannot interpret {value!r}")


def build_config(config_path=None, **overrides) -> ExperimentConfig:
    """Assemble the config from defaults, an optional JSON file, then flags."""
    known = {f.name for f in fields(ExperimentConfig)}
    cfg = ExperimentConfig()
    if config_path is not None:
        data = _load_config_file(config_path)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unrecognized config keys: {sorted(unknown)}")
        cfg = _apply(cfg, data)
    cfg = _apply(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def _apply(cfg: ExperimentConfig, data: dict) -> ExperimentConfig:
    updates = {}
    for name, value in data.items():
        if name in ("K", "N", "n_blocks", "c_grid", "master_seed"):
            updates[name] = _coerce(name, value, int)
        elif name == "P_dB":
            seq = value if isinstance(value, (list, tuple)) else [value]
            updates[name] = tuple(_coerce("P_dB", v, float) for v in seq)
        elif name == "criteria":
            seq = value if isinstance(value, (list, tuple)) else [value]
            updates[name] = tuple(str(v) for v in seq)
        elif name == "output_formats":
            seq = value if isinstance(value, (list, tuple)) else [value]
            updates[name] = tuple(str(v) for v in seq)
        elif name == "output_dir":
            updates[name] = str(value)
        else:
            raise ConfigError(f"config key {name!r} is not recognized")
    return replace(cfg, **updates)


def _parse_list(_ctx, _param, value):
    if value is None:
        return None
    return tuple(part.strip() for part in str(value).split(",") if part.strip())


def _parse_float_list(_ctx, _param, value):
    if value is None:
        return None
    out = []
    for part in str(value).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(float(part))
        except ValueError:
            raise click.UsageError(f"--power-db entry {part!r} is not a number")
    if not out:
        raise click.UsageError("--power-db must list at least one value")
    return tuple(out)


def _fmt(x) -> str:
    return repr(float(x))


def _power_tag(p_db: float) -> str:
    tag = f"{p_db:g}"
    return tag.replace("-", "m").replace(".", "p")


def _write_run_dir(out_dir: str, writers: dict) -> Path:
    """Write all files into a temp dir, then atomically rename it into place."""
    final = Path(out_dir)
    if final.exists():
        raise ConfigError(f"output directory already exists: {final}")
    final.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=final.parent, prefix=final.name + ".tmp."))
    try:
        for name, writer in writers.items():
            with open(tmp / name, "w", encoding="utf-8", newline="") as fh:
                writer(fh)
        os.replace(tmp, final)
    except Exception:
        for leftover in tmp.glob("*"):
            leftover.unlink()
        tmp.rmdir()
        raise
    return final


def _json_writer(payload):
    def write(fh):
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")

    return write


def _derived_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit seed for the index-th power configuration."""
    state = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,)).generate_state(1, np.uint64)
    return int(state[0])


def _single_draw_pipeline(cfg: ExperimentConfig, p_db: float):
    """One seeded channel: decomposition, sweep+envelope, pf pair, selection."""
    budget = db_to_linear(p_db)
    dec, _ = _draw_block(cfg.K, cfg.N, cfg.master_seed, 0)
    curve = tristage.mix(tristage.sweep(dec, budget, cfg.c_grid))
    pf_res = allocators.proportional_fair(dec.effective_gains, budget)
    pf_pair = (pf_res.sum_rate, fairness.l1_fairness(fairness.normalize(pf_res.rates)))
    op = tristage.select(curve, pf_pair)
    return dec, curve, pf_res, pf_pair, op


def _mixer_payload(op: tristage.OperatingPoint):
    if op.mixer is None:
        return None
    return {
        "atoms": [int(a) for a in op.mixer.atoms],
        "weights": [float(w) for w in op.mixer.weights],
        "c_values": [float(c) for c in op.mixer.c_values],
    }


@click.group()
@click.version_option(package_name="fairshare")
def main():
    """Sum-rate/fairness tradeoff experiments for the zero-forcing downlink."""


_config_option = click.option("--config", "config_path", type=click.Path(), default=None,
                              help="JSON config file; flags override its values.")
_seed_option = click.option("--seed", "master_seed", type=int, default=None,
                            help="Master seed (unsigned 64-bit).")
_out_option = click.option("--out", "output_dir", type=click.Path(), default=None,
                           help="Run directory to create (must not exist).")
_grid_option = click.option("--grid", "c_grid", type=int, default=None,
                            help="Splitting-factor grid size.")
_blocks_option = click.option("--blocks", "n_blocks", type=int, default=None,
                              help="Channel blocks per ensemble.")
_power_option = click.option("--power-db", "P_dB", callback=_parse_float_list, default=None,
                             help="Comma-separated power budgets in dB.")
_criteria_option = click.option("--criteria", callback=_parse_list, default=None,
                                help="Comma-separated subset of: " + ",".join(CRITERIA))


def _run_command(body, **config_kwargs):
    try:
        cfg = build_config(**config_kwargs)
        body(cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except FairshareError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME_ERROR)


@main.command()
@_config_option
@_seed_option
@_out_option
@_grid_option
@_power_option
def tradeoff(config_path, master_seed, output_dir, c_grid, P_dB):
    """Emit the selection geometry of one channel draw as plot-ready data."""

    def body(cfg: ExperimentConfig):
        if len(cfg.P_dB) != 1:
            raise ConfigError(f"tradeoff needs a single P_dB value, got {list(cfg.P_dB)}")
        if cfg.K < 2:
            raise ConfigError("tradeoff needs K >= 2: the tradeoff is trivial for one user")
        if cfg.output_dir is None:
            raise ConfigError("an output directory is required (--out or config.output_dir)")
        p_db = cfg.P_dB[0]
        dec, curve, pf_res, pf_pair, op = _single_draw_pipeline(cfg, p_db)
        curve.validate()

        stem = f"tradeoff_K{cfg.K}_N{cfg.N}_P{_power_tag(p_db)}dB_g{cfg.c_grid}_s{cfg.master_seed}"
        writers = {}
        if "csv" in cfg.output_formats:
            writers[stem + ".csv"] = _tradeoff_csv_writer(curve, pf_pair, op)
        if "json" in cfg.output_formats:
            writers[stem + ".json"] = _json_writer(_tradeoff_payload(cfg, p_db, curve, pf_res, pf_pair, op))
        final = _write_run_dir(cfg.output_dir, writers)
        click.echo(f"wrote {len(writers)} file(s) to {final}")
        click.echo(
            f"pf=({pf_pair[0]:.6g}, {pf_pair[1]:.6g}) "
            f"selected=({op.sum_rate:.6g}, {op.fairness:.6g}) fallback={op.fallback_used}"
        )

    _run_command(body, config_path=config_path, master_seed=master_seed,
                 output_dir=output_dir, c_grid=c_grid, P_dB=P_dB)


def _tradeoff_csv_writer(curve: tristage.TradeoffCurve, pf_pair, op):
    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "c", "sum_rate", "fairness"])
        for i in range(curve.grid_size):
            writer.writerow(["grid", _fmt(curve.c[i]), _fmt(curve.sum_rates[i]), _fmt(curve.fairness[i])])
        for j in curve.hull_idx:
            writer.writerow(["hull", _fmt(curve.c[j]), _fmt(curve.sum_rates[j]), _fmt(curve.fairness[j])])
        writer.writerow(["pf", "", _fmt(pf_pair[0]), _fmt(pf_pair[1])])
        writer.writerow(["tri", "", _fmt(op.sum_rate), _fmt(op.fairness)])

    return write


def _tradeoff_payload(cfg, p_db, curve, pf_res, pf_pair, op):
    return {
        "schema_version": _SCHEMA_VERSION,
        "config": _config_payload(cfg),
        "P_dB": p_db,
        "curve": curve.to_json(),
        "pf": {
            "sum_rate": pf_res.sum_rate,
            "fairness": pf_pair[1],
            "alloc": pf_res.alloc.powers.tolist(),
            "kkt_residual": pf_res.kkt_residual,
        },
        "operating_point": {
            "sum_rate": op.sum_rate,
            "fairness": op.fairness,
            "fallback_used": op.fallback_used,
            "mixer": _mixer_payload(op),
        },
    }


@main.command()
@_config_option
@_seed_option
@_out_option
@_grid_option
@_blocks_option
@_power_option
@_criteria_option
def compare(config_path, master_seed, output_dir, c_grid, n_blocks, P_dB, criteria):
    """Ensemble-average every criterion and the rate-split bound per power."""

    def body(cfg: ExperimentConfig):
        if cfg.output_dir is None:
            raise ConfigError("an output directory is required (--out or config.output_dir)")
        want_tristage = "tristage" in cfg.criteria
        if cfg.K < 2 and want_tristage:
            raise ConfigError("tristage needs K >= 2; drop it from criteria for K = 1")
        writers = {}
        summaries = []
        for idx, p_db in enumerate(cfg.P_dB):
            seed = _derived_seed(cfg.master_seed, idx)
            results = []
            for crit in cfg.criteria:
                if crit == "tristage":
                    continue
                results.append(benchmark.run_ensemble(
                    crit, cfg.K, cfg.N, p_db, cfg.n_blocks, seed,
                    c_grid=cfg.c_grid, single_user_fairness=1.0))
            bound_curve = None
            report = None
            if cfg.K >= 2:
                tri_result, envelopes = benchmark.run_tristage_ensemble(
                    cfg.K, cfg.N, p_db, cfg.n_blocks, seed, c_grid=cfg.c_grid)
                if want_tristage:
                    results.append(tri_result)
                bound_curve = benchmark.upper_bound_curve(envelopes)
                report = benchmark.bound_dominance_report(tri_result, envelopes)
            results.sort(key=lambda r: CRITERIA.index(r.criterion))

            tag = f"K{cfg.K}_N{cfg.N}_P{_power_tag(p_db)}dB_B{cfg.n_blocks}_s{cfg.master_seed}"
            if "csv" in cfg.output_formats:
                writers[f"compare_{tag}.csv"] = _compare_csv_writer(results)
                if bound_curve is not None:
                    writers[f"bound_{tag}.csv"] = _bound_csv_writer(bound_curve)
            if "json" in cfg.output_formats:
                writers[f"compare_{tag}.json"] = _json_writer(
                    _compare_payload(cfg, p_db, seed, results, bound_curve, report))
            summaries.append((p_db, results, report))

        final = _write_run_dir(cfg.output_dir, writers)
        click.echo(f"wrote {len(writers)} file(s) to {final}")
        for p_db, results, report in summaries:
            for res in results:
                click.echo(
                    f"P={p_db:g}dB {res.criterion}: R={res.avg_sum_rate:.6g} "
                    f"F={res.avg_fairness_l1:.6g} J={res.avg_fairness_jain:.6g}"
                )
            if report is not None:
                click.echo(f"P={p_db:g}dB bound gap at tristage rate: {report.gap:.6g}")

    _run_command(body, config_path=config_path, master_seed=master_seed,
                 output_dir=output_dir, c_grid=c_grid, n_blocks=n_blocks,
                 P_dB=P_dB, criteria=criteria)


def _compare_csv_writer(results):
    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["criterion", "avg_sum_rate", "avg_fairness_l1",
                         "avg_fairness_jain", "n_blocks", "n_resampled", "n_fallback"])
        for res in results:
            writer.writerow([res.criterion, _fmt(res.avg_sum_rate), _fmt(res.avg_fairness_l1),
                             _fmt(res.avg_fairness_jain), res.n_blocks, res.n_resampled,
                             res.n_fallback])

    return write


def _bound_csv_writer(bound_curve):
    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["avg_sum_rate", "fairness_bound"])
        for r, f in zip(bound_curve.avg_sum_rates, bound_curve.fairness_bound):
            writer.writerow([_fmt(r), _fmt(f)])

    return write


def _compare_payload(cfg, p_db, seed, results, bound_curve, report):
    payload = {
        "schema_version": _SCHEMA_VERSION,
        "config": _config_payload(cfg),
        "P_dB": p_db,
        "derived_seed": seed,
        "results": [
            {
                "criterion": res.criterion,
                "avg_sum_rate": res.avg_sum_rate,
                "avg_fairness_l1": res.avg_fairness_l1,
                "avg_fairness_jain": res.avg_fairness_jain,
                "n_blocks": res.n_blocks,
                "n_resampled": res.n_resampled,
                "n_fallback": res.n_fallback,
            }
            for res in results
        ],
        "bound": None,
        "bound_gap": None,
    }
    if bound_curve is not None:
        payload["bound"] = {
            "avg_sum_rate": bound_curve.avg_sum_rates.tolist(),
            "fairness_bound": bound_curve.fairness_bound.tolist(),
        }
    if report is not None:
        payload["bound_gap"] = {
            "avg_sum_rate": report.avg_sum_rate,
            "avg_fairness": report.avg_fairness,
            "bound_fairness": report.bound_fairness,
            "gap": report.gap,
            "n_fallback": report.n_fallback,
        }
    return payload


@main.command()
@_config_option
@_seed_option
@_out_option
@_grid_option
@_power_option
@click.option("--draws", "n_draws", type=int, default=10_000, show_default=True,
              help="Number of sampled allocations.")
def sample(config_path, master_seed, output_dir, c_grid, P_dB, n_draws):
    """Sample allocations from the operating point's time-sharing law."""

    def body(cfg: ExperimentConfig):
        if len(cfg.P_dB) != 1:
            raise ConfigError(f"sample needs a single P_dB value, got {list(cfg.P_dB)}")
        if cfg.K < 2:
            raise ConfigError("sample needs K >= 2: the mixing law is trivial for one user")
        if cfg.output_dir is None:
            raise ConfigError("an output directory is required (--out or config.output_dir)")
        if n_draws < 1:
            raise ConfigError(f"--draws must be >= 1, got {n_draws}")
        p_db = cfg.P_dB[0]
        budget = db_to_linear(p_db)
        dec, curve, _, pf_pair, op = _single_draw_pipeline(cfg, p_db)
        if op.fallback_used:
            raise FairshareError(
                "selection fell back to the fixed pf allocation; there is no "
                "distribution to sample")
        sampler_seed = np.random.SeedSequence(entropy=cfg.master_seed, spawn_key=(_SAMPLER_KEY,))
        allocs = tristage.sample_allocation(op, curve, dec, budget, n_draws, sampler_seed)

        stem = f"sample_K{cfg.K}_N{cfg.N}_P{_power_tag(p_db)}dB_n{n_draws}_s{cfg.master_seed}"
        writers = {}
        if "csv" in cfg.output_formats:
            writers[stem + ".csv"] = _sample_csv_writer(cfg, dec, curve, op, allocs)
        if "json" in cfg.output_formats:
            writers[stem + ".json"] = _json_writer({
                "schema_version": _SCHEMA_VERSION,
                "config": _config_payload(cfg),
                "P_dB": p_db,
                "n_draws": n_draws,
                "pf": {"sum_rate": pf_pair[0], "fairness": pf_pair[1]},
                "operating_point": {
                    "sum_rate": op.sum_rate,
                    "fairness": op.fairness,
                    "fallback_used": op.fallback_used,
                    "mixer": _mixer_payload(op),
                },
            })
        final = _write_run_dir(cfg.output_dir, writers)
        click.echo(f"wrote {len(writers)} file(s) to {final}")
        click.echo(f"target=({op.sum_rate:.6g}, {op.fairness:.6g}) over {n_draws} draws")

    _run_command(body, config_path=config_path, master_seed=master_seed,
                 output_dir=output_dir, c_grid=c_grid, P_dB=P_dB)


def _sample_csv_writer(cfg, dec, curve, op, allocs):
    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        power_cols = [f"p_{k}" for k in range(cfg.K)]
        writer.writerow(["draw", "c"] + power_cols +
                        ["sum_rate", "fairness", "avg_sum_rate", "avg_fairness"])
        atom_allocs = {a: curve.allocs[a] for a in op.mixer.atoms}
        run_r = 0.0
        run_f = 0.0
        for i, alloc in enumerate(allocs):
            atom = next(a for a, row in atom_allocs.items()
                        if np.array_equal(row, alloc.powers))
            rates = zfdpc_rates(dec, alloc)
            r = float(rates.sum())
            f = fairness.l1_fairness(fairness.normalize(rates))
            run_r += r
            run_f += f
            writer.writerow([i, _fmt(curve.c[atom])] + [_fmt(p) for p in alloc.powers] +
                            [_fmt(r), _fmt(f), _fmt(run_r / (i + 1)), _fmt(run_f / (i + 1))])

    return write


def _config_payload(cfg: ExperimentConfig) -> dict:
    return {
        "K": cfg.K,
        "N": cfg.N,
        "P_dB": list(cfg.P_dB),
        "criteria": list(cfg.criteria),
        "n_blocks": cfg.n_blocks,
        "c_grid": cfg.c_grid,
        "master_seed": cfg.master_seed,
        "output_formats": list(cfg.output_formats),
    }


if __name__ == "__main__":
    main()
