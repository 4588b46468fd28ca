"""Command-line interface: config ingestion, dispatch, result serialization.

Commands
--------
validate   structural report, fixed point, distance ladder  -> validate.json
solve      fixed point of the measurement-branch map        -> p_star.csv
simulate   synthetic closed-loop estimator run              -> trajectory.csv
empirical  independent-trial distance sampling              -> samples.csv, histogram.csv
ergodic    single-trajectory time sampling                  -> samples.csv, histogram.csv
approx     atomic stationary approximation                  -> atoms.csv
compare    three-method cluster table                       -> clusters.csv
rate       time-average convergence diagnostics             -> rate.csv

Every run writes ``manifest.json`` (config digest, tool version, timestamps,
output paths) into the output directory; no command writes anywhere else.
Floats are serialized with ``repr`` (shortest round-trip decimals), so
re-parsing a CSV recovers the in-memory values exactly and identical configs
produce byte-identical tables.

Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelParams, sample_chain, stationary_probability
from .estimator import simulate_trajectory
from .experiments import (
    SIMULATE_CHAIN_STREAM,
    SIMULATE_NOISE_STREAM,
    ExperimentConfig,
    compare_table,
    prepare,
    rate_study,
    run_empirical,
    run_ergodic,
)
from .pdm import NotPositiveDefiniteError, PDMatrix, SingularMatrixError
from .plant import NominalPlant, build_modified_plant, check_structure
from .riccati import ConvergenceError, solve_dare
from .stationary import LN10, enumeration_distribution, delta_distribution

COMMANDS = ("validate", "solve", "simulate", "empirical", "ergodic", "approx", "compare", "rate")

_PLANT_KEYS = {"a", "b", "c", "q", "r", "da", "db", "dc", "mu"}
_CHANNEL_KEYS = {"alpha", "beta"}
_TOP_KEYS = {
    "plant",
    "channel",
    "trials",
    "horizon",
    "ergodic_length",
    "init_p1",
    "init_pcm_scale",
    "n_e_bins",
    "delta_max",
    "n_d",
    "n_s",
    "master_seed",
}


class ConfigError(ValueError):
    """Configuration file is unreadable or violates a field constraint."""


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing required field {where}.{key}")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {', '.join(sorted(unknown))}")


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config.

    Matrices are row-major nested arrays.  Unknown keys are rejected;
    missing keys and constraint violations raise :class:`ConfigError`
    naming the offending field.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")

    plant_raw = _require(raw, "plant", "config")
    _reject_unknown(plant_raw, _PLANT_KEYS, "config.plant")
    channel_raw = _require(raw, "channel", "config")
    _reject_unknown(channel_raw, _CHANNEL_KEYS, "config.channel")

    def matrix(key, source, where):
        value = _require(source, key, where)
        try:
            return np.array(value, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.{key} is not a numeric matrix: {exc}") from exc

    try:
        q = PDMatrix(matrix("q", plant_raw, "config.plant"))
        r = PDMatrix(matrix("r", plant_raw, "config.plant"))
    except NotPositiveDefiniteError as exc:
        raise ConfigError(f"config.plant noise covariance invalid: {exc}") from exc

    derivs = {}
    for key in ("da", "db", "dc"):
        entries = plant_raw.get(key, [])
        if not isinstance(entries, list):
            raise ConfigError(f"config.plant.{key} must be a list of matrices")
        derivs[key] = tuple(np.array(m, dtype=float) for m in entries)

    try:
        plant = NominalPlant(
            a=matrix("a", plant_raw, "config.plant"),
            b=matrix("b", plant_raw, "config.plant"),
            c=matrix("c", plant_raw, "config.plant"),
            q=q,
            r=r,
            da=derivs["da"],
            db=derivs["db"],
            dc=derivs["dc"],
            mu=float(plant_raw.get("mu", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"config.plant: {exc}") from exc

    try:
        channel = ChannelParams(
            alpha=float(_require(channel_raw, "alpha", "config.channel")),
            beta=float(_require(channel_raw, "beta", "config.channel")),
        )
    except ValueError as exc:
        raise ConfigError(f"config.channel: {exc}") from exc

    kwargs = {}
    for key in _TOP_KEYS - {"plant", "channel"}:
        if key in raw and raw[key] is not None:
            kwargs[key] = raw[key]
    try:
        return ExperimentConfig(plant=plant, channel=channel, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from exc


def config_dict(cfg: ExperimentConfig) -> dict:
    """Canonical JSON-ready form of a resolved config (digest input)."""
    plant = cfg.plant
    return {
        "plant": {
            "a": plant.a.tolist(),
            "b": plant.b.tolist(),
            "c": plant.c.tolist(),
            "q": plant.q.entries.tolist(),
            "r": plant.r.entries.tolist(),
            "da": [m.tolist() for m in plant.da],
            "db": [m.tolist() for m in plant.db],
            "dc": [m.tolist() for m in plant.dc],
            "mu": plant.mu,
        },
        "channel": {"alpha": cfg.channel.alpha, "beta": cfg.channel.beta},
        "trials": cfg.trials,
        "horizon": cfg.horizon,
        "ergodic_length": cfg.ergodic_length,
        "init_p1": cfg.init_p1,
        "init_pcm_scale": cfg.init_pcm_scale,
        "n_e_bins": cfg.n_e_bins,
        "delta_max": cfg.delta_max,
        "n_d": cfg.n_d,
        "n_s": cfg.n_s,
        "master_seed": cfg.master_seed,
    }


def config_digest(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(config_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_manifest(out_dir: Path, command: str, cfg: ExperimentConfig, outputs: list) -> Path:
    manifest = {
        "command": command,
        "config_digest": config_digest(cfg),
        "tool_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "master_seed": cfg.master_seed,
        "output_paths": [str(p) for p in outputs],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _cmd_validate(cfg: ExperimentConfig, out_dir: Path, args) -> list:
    mp = build_modified_plant(cfg.plant)
    report = check_structure(mp)
    if not (report.controllable and report.observable):
        raise SingularMatrixError(
            "controllability/observability hypothesis violated: "
            f"reachability rank {report.ctrb_rank}, observability rank "
            f"{report.obsv_rank}, state dimension {mp.n}"
        )
    prep = prepare(cfg)
    payload = {
        "structure": {
            "a0_invertible": report.a0_invertible,
            "a1_invertible": report.a1_invertible,
            "ctrb_rank": report.ctrb_rank,
            "obsv_rank": report.obsv_rank,
            "controllable": report.controllable,
            "observable": report.observable,
            "spectral_radius_a0": report.spectral_radius_a0,
        },
        "p_star": prep.p_star.entries.tolist(),
        "distance_ladder": prep.ladder.tolist(),
    }
    path = out_dir / "validate.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"structure ok: ctrb {report.ctrb_rank}/{mp.n}, obsv {report.obsv_rank}/{mp.n}, "
          f"rho(a0) = {report.spectral_radius_a0:.6g}")
    print(f"distance ladder: {np.array2string(prep.ladder, precision=5)}")
    return [path]


def _cmd_solve(cfg: ExperimentConfig, out_dir: Path, args) -> list:
    mp = build_modified_plant(cfg.plant)
    sol = solve_dare(mp)
    path = out_dir / "p_star.csv"
    n = sol.p_star.dim
    write_csv(path, [f"col_{j}" for j in range(n)], sol.p_star.entries.tolist())
    print(f"fixed point after {sol.iterations} iterations "
          f"(final step {sol.final_step_delta:.3e}):")
    print(np.array2string(sol.p_star.entries, precision=6))
    return [path]


def _cmd_simulate(cfg: ExperimentConfig, out_dir: Path, args) -> list:
    seed = cfg.require_seed()
    prep = prepare(cfg)
    word = sample_chain(cfg.channel, cfg.init_p1, cfg.horizon, seed, stream=SIMULATE_CHAIN_STREAM)
    p0 = PDMatrix(cfg.init_pcm_scale * np.eye(cfg.plant.n))
    run = simulate_trajectory(
        cfg.plant, prep.mp, word[1:], np.zeros(cfg.plant.n), p0,
        seed=seed, stream=SIMULATE_NOISE_STREAM,
    )
    from .pdm import riemannian_distance

    rows = []
    for k in range(cfg.horizon + 1):
        gamma = int(word[k]) if k > 0 else int(word[0])
        dist = riemannian_distance(run["pcms"][k], prep.p_star) / LN10
        rows.append(
            [k, gamma]
            + list(run["states"][k])
            + list(run["estimates"][k])
            + ([] if k == 0 else list(np.atleast_1d(run["measurements"][k - 1])))
            + [dist]
        )
    n, p = cfg.plant.n, cfg.plant.p
    header = (
        ["k", "gamma"]
        + [f"x_true_{i}" for i in range(n)]
        + [f"x_hat_{i}" for i in range(n)]
        + [f"y_{i}" for i in range(p)]
        + ["pcm_distance"]
    )
    # Pad the k = 0 row (no measurement yet) with NaNs for fixed width.
    rows[0] = rows[0][: 2 + 2 * n] + [float("nan")] * p + [rows[0][-1]]
    path = out_dir / "trajectory.csv"
    write_csv(path, header, rows)
    print(f"simulated {cfg.horizon} steps; final estimate error "
          f"{np.linalg.norm(run['states'][-1] - run['estimates'][-1]):.4g}")
    return [path]


def _write_samples(out_dir: Path, samples, hist) -> list:
    samples_path = out_dir / "samples.csv"
    write_csv(samples_path, ["distance"], ([s] for s in samples))
    hist_path = out_dir / "histogram.csv"
    width = hist.delta_max / hist.n_bins
    rows = [
        [i * width, (i + 1) * width, int(c), c / hist.total]
        for i, c in enumerate(hist.counts)
    ]
    write_csv(hist_path, ["bin_lo", "bin_hi", "count", "fraction"], rows)
    return [samples_path, hist_path]


def _cmd_empirical(cfg: ExperimentConfig, out_dir: Path, args) -> list:
    samples, hist = run_empirical(cfg)
    print(f"{samples.size} trials; histogram overflow {hist.overflow}")
    return _write_samples(out_dir, samples, hist)


def _cmd_ergodic(cfg: ExperimentConfig, out_dir: Path, args) -> list:
    samples, hist = run_ergodic(cfg)
    print(f"{samples.size} time samples; histogram overflow {hist.overflow}")
    return _write_samples(out_dir, samples, hist)


def _cmd_approx(cfg: ExperimentConfig, out_dir: Path, args) -> list:
    prep = prepare(cfg)
    gamma_st = stationary_probability(cfg.channel)
    if args.method == "delta":
        dist = delta_distribution(prep.mp, prep.p_star, gamma_st, cfg.n_d)
    else:
        dist = enumeration_distribution(
            prep.mp, prep.p_star, gamma_st, max_len=args.max_len, eps_p=args.eps_p
        )
    rows = [
        [i, atom.distance, atom.mass, atom.code]
        for i, atom in enumerate(dist.atoms)
    ]
    path = out_dir / "atoms.csv"
    write_csv(path, ["index", "distance", "mass", "code"], rows)
    print(f"{len(dist.atoms)} atoms ({args.method}); residual mass {dist.residual_mass:.3e}")
    return [path]


def _cmd_compare(cfg: ExperimentConfig, out_dir: Path, args) -> list:
    table = compare_table(cfg)
    rows = [
        [table.distances[i], table.delta_approx[i], table.ergodic[i], table.empirical[i]]
        for i in range(len(table.distances))
    ]
    rows.append(
        ["unassigned", table.unassigned_delta, table.unassigned_ergodic, table.unassigned_empirical]
    )
    path = out_dir / "clusters.csv"
    write_csv(path, ["distance", "mass_delta", "mass_ergodic", "mass_empirical"], rows)
    print(f"cluster table with {len(table.distances)} rows written")
    return [path]


def _cmd_rate(cfg: ExperimentConfig, out_dir: Path, args) -> list:
    if args.checkpoints:
        checkpoints = [int(tok) for tok in args.checkpoints.split(",")]
    else:
        n = cfg.effective_ergodic_length
        checkpoints = sorted({max(10, n // 100), max(100, n // 10), n // 2})
    results = rate_study(cfg, checkpoints)
    path = out_dir / "rate.csv"
    write_csv(path, ["n", "sup_gap", "envelope_ratio"], results)
    for n, gap, env in results:
        print(f"n = {n}: sup gap {gap:.5f}, envelope ratio {env:.4f}")
    return [path]


_HANDLERS = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "empirical": _cmd_empirical,
    "ergodic": _cmd_ergodic,
    "approx": _cmd_approx,
    "compare": _cmd_compare,
    "rate": _cmd_rate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcmlab",
        description="Stationary-distribution toolkit for a robust filter over a lossy channel",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to a JSON experiment config")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    parser.add_argument("--seed", type=int, default=None, help="override master_seed")
    parser.add_argument("--trials", type=int, default=None, help="override trial count")
    parser.add_argument("--horizon", type=int, default=None, help="override per-trial horizon")
    parser.add_argument("--ergodic-length", dest="ergodic_length", type=int, default=None,
                        help="override single-trajectory run length")
    parser.add_argument(
        "--method", choices=("enumerate", "delta"), default="delta",
        help="atomic approximation method for `approx`",
    )
    parser.add_argument("--alpha", type=float, default=None, help="override channel alpha")
    parser.add_argument("--beta", type=float, default=None, help="override channel beta")
    parser.add_argument("--max-len", dest="max_len", type=int, default=12,
                        help="enumeration horizon for `approx --method enumerate`")
    parser.add_argument("--eps-p", dest="eps_p", type=float, default=1e-9,
                        help="pruning threshold for `approx --method enumerate`")
    parser.add_argument("--checkpoints", default=None,
                        help="comma-separated checkpoint lengths for `rate`")
    return parser


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    from dataclasses import replace

    channel = cfg.channel
    if args.alpha is not None or args.beta is not None:
        channel = ChannelParams(
            alpha=args.alpha if args.alpha is not None else channel.alpha,
            beta=args.beta if args.beta is not None else channel.beta,
        )
    updates = {"channel": channel}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.horizon is not None:
        updates["horizon"] = args.horizon
    if args.ergodic_length is not None:
        updates["ergodic_length"] = args.ergodic_length
    return replace(cfg, **updates)


def dispatch(command: str, cfg: ExperimentConfig, args, out_dir) -> int:
    """Run one command against a resolved config; returns the exit code."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        outputs = _HANDLERS[command](cfg, out_dir, args)
    except (ConfigError, SingularMatrixError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, NotPositiveDefiniteError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    manifest = write_manifest(out_dir, command, cfg, outputs)
    print(f"outputs: {', '.join(str(p) for p in outputs + [manifest])}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 2
    return dispatch(args.command, cfg, args, args.out)


if __name__ == "__main__":
    sys.exit(main())
