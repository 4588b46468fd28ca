"""Monte-Carlo protocol: empirical law, ergodic averaging, cluster tables.

Two sampling regimes produce distance samples (decimal-log units):

- *empirical*: many independent trials, each evolving the PCM from a large
  multiple of the identity over a fresh arrival word, sampled at the final
  horizon;
- *ergodic*: a single long trajectory started at the fixed point with the
  arrival chain initialized at its stationary law.

Samples are binned into equal-width histograms and, for table output,
assigned to clusters around the open-loop orbit distances.  Empirical trials
use one derived generator stream per trial (streams ``0..trials-1``); the
ergodic and synthetic-run chains use dedicated high stream offsets so the
two regimes never share bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, sample_chain, sample_chain_batch, stationary_probability
from .pdm import PDMatrix, distances_to, homographic
from .plant import ModifiedPlant, NominalPlant, build_modified_plant, check_structure
from .riccati import orbit_distances, solve_dare
from .stationary import LN10, Atom, AtomicDistribution, delta_distribution

# Stream offsets reserved for non-trial chains (trials take 0..trials-1).
ERGODIC_STREAM = 1 << 48
SIMULATE_CHAIN_STREAM = (1 << 48) + 1
SIMULATE_NOISE_STREAM = (1 << 48) + 2


@dataclass(frozen=True)
class Histogram:
    """Equal-width histogram of distance samples over ``[0, delta_max)``.

    Bin ``i`` covers ``[i * delta_max / n_bins, (i+1) * delta_max / n_bins)``.
    Samples at or beyond ``delta_max`` are counted in ``overflow`` rather
    than silently dropped, so ``sum(counts) + overflow == total``.
    """

    delta_max: float
    n_bins: int
    counts: np.ndarray
    total: int
    normalized: np.ndarray
    overflow: int = 0


@dataclass(frozen=True)
class ClusterTable:
    """Per-cluster probability columns in the three-method table layout."""

    distances: np.ndarray
    n_s: int
    empirical: np.ndarray
    ergodic: np.ndarray
    delta_approx: np.ndarray
    unassigned_empirical: float
    unassigned_ergodic: float
    unassigned_delta: float

    def __post_init__(self):
        k = len(self.distances)
        for name in ("empirical", "ergodic", "delta_approx"):
            col = getattr(self, name)
            if len(col) != k:
                raise ValueError(f"column {name} has length {len(col)}, expected {k}")
            if np.sum(col) > 1.0 + 1e-9:
                raise ValueError(f"column {name} sums above 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one simulation/approximation run.

    ``horizon`` is the per-trial word length for empirical runs;
    ``ergodic_length`` (falling back to ``horizon`` when unset) is the total
    length of single-trajectory runs.  ``master_seed`` may be None for
    purely deterministic commands; stochastic routines then refuse to run
    rather than pulling silent entropy.
    """

    plant: NominalPlant
    channel: ChannelParams
    trials: int = 5_000
    horizon: int = 400
    ergodic_length: int | None = None
    init_p1: float = 0.7
    init_pcm_scale: float = 1_000.0
    n_e_bins: int = 200
    delta_max: float = 1.6
    n_d: int = 5
    n_s: int = 10
    master_seed: int | None = None

    @property
    def effective_ergodic_length(self) -> int:
        return self.horizon if self.ergodic_length is None else self.ergodic_length

    def __post_init__(self):
        if self.trials < 1 or self.horizon < 1:
            raise ValueError("trials and horizon must be >= 1")
        if self.ergodic_length is not None and self.ergodic_length < 1:
            raise ValueError("ergodic_length must be >= 1 when set")
        if not (0.0 <= self.init_p1 <= 1.0):
            raise ValueError("init_p1 must lie in [0, 1]")
        if self.init_pcm_scale <= 0:
            raise ValueError("init_pcm_scale must be positive")
        if self.n_e_bins < 1 or self.n_d < 1 or self.n_s < 1:
            raise ValueError("n_e_bins, n_d, n_s must be >= 1")
        if self.delta_max <= 0:
            raise ValueError("delta_max must be positive")

    def require_seed(self) -> int:
        if self.master_seed is None:
            raise ValueError(
                "master_seed is required for stochastic commands; set it in the "
                "config or pass --seed"
            )
        return self.master_seed


@dataclass(frozen=True)
class PreparedPlant:
    """Solved artifacts shared by every experiment on one config."""

    mp: ModifiedPlant
    p_star: PDMatrix
    ladder: np.ndarray  # decimal-log orbit distances d_0..d_{n_d}


def prepare(cfg: ExperimentConfig) -> PreparedPlant:
    """Build the modified plant, check structure, solve the fixed point."""
    mp = build_modified_plant(cfg.plant)
    report = check_structure(mp)
    if not (report.controllable and report.observable):
        raise ValueError(
            "modified plant fails the controllability/observability hypothesis "
            f"(ranks {report.ctrb_rank}/{report.obsv_rank} of {mp.n})"
        )
    p_star = solve_dare(mp, require_structure=False).p_star
    ladder = orbit_distances(mp, p_star, cfg.n_d) / LN10
    return PreparedPlant(mp=mp, p_star=p_star, ladder=ladder)


def make_histogram(samples: np.ndarray, delta_max: float, n_bins: int) -> Histogram:
    samples = np.asarray(samples, dtype=float)
    width = delta_max / n_bins
    idx = np.floor(samples / width).astype(np.int64)
    in_range = (samples >= 0) & (idx < n_bins)
    counts = np.bincount(idx[in_range], minlength=n_bins)[:n_bins]
    overflow = int(samples.size - np.count_nonzero(in_range))
    return Histogram(
        delta_max=delta_max,
        n_bins=n_bins,
        counts=counts,
        total=int(samples.size),
        normalized=counts / samples.size,
        overflow=overflow,
    )


def _gamma0_update(a0: np.ndarray, w0: np.ndarray, p: np.ndarray) -> np.ndarray:
    out = a0 @ p @ a0.T + w0
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _gamma1_update(
    a1: np.ndarray, w1: np.ndarray, k1: np.ndarray, p: np.ndarray
) -> np.ndarray:
    """Batched measurement update ``z (I + k1 z)^{-1}`` with ``z`` the
    predicted matrix; algebraically the homographic measurement branch."""
    z = a1 @ p @ a1.T + w1
    eye = np.eye(a1.shape[0])
    lhs = eye + k1 @ z
    out = np.linalg.solve(np.swapaxes(lhs, -1, -2), np.swapaxes(z, -1, -2))
    out = np.swapaxes(out, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _branch_blocks(mp: ModifiedPlant):
    return (
        mp.a0,
        mp.g0 @ mp.g0.T,
        mp.a1,
        mp.g1 @ mp.g1.T,
        mp.h1.T @ mp.h1,
    )


def run_empirical(
    cfg: ExperimentConfig, prep: PreparedPlant | None = None
) -> tuple[np.ndarray, Histogram]:
    """Independent-trial sampling of the PCM law at the final horizon.

    Each trial draws its own arrival word (stream ``i`` of the master seed),
    evolves the PCM from ``init_pcm_scale * I``, and records the decimal-log
    distance of the final PCM to the fixed point.  Trials are evolved as one
    batched array; the result is deterministic in the config.
    """
    seed = cfg.require_seed()
    if prep is None:
        prep = prepare(cfg)
    a0, w0, a1, w1, k1 = _branch_blocks(prep.mp)
    n = a0.shape[0]

    words = sample_chain_batch(cfg.channel, cfg.init_p1, cfg.horizon, seed, cfg.trials)
    p = np.broadcast_to(
        cfg.init_pcm_scale * np.eye(n), (cfg.trials, n, n)
    ).copy()
    for k in range(1, cfg.horizon + 1):
        got = words[:, k].astype(bool)
        if np.any(~got):
            p[~got] = _gamma0_update(a0, w0, p[~got])
        if np.any(got):
            p[got] = _gamma1_update(a1, w1, k1, p[got])
    samples = distances_to(prep.p_star, p) / LN10
    return samples, make_histogram(samples, cfg.delta_max, cfg.n_e_bins)


def run_ergodic(
    cfg: ExperimentConfig, prep: PreparedPlant | None = None
) -> tuple[np.ndarray, Histogram]:
    """Single-trajectory time sampling started at the fixed point.

    The arrival chain is initialized at its stationary probability (not the
    empirical ``init_p1``) and the PCM at the fixed point, which is what
    makes time averages converge to the stationary law.  Samples include the
    initial step, so ``horizon + 1`` distances are returned.
    """
    seed = cfg.require_seed()
    if prep is None:
        prep = prepare(cfg)
    a0, w0, a1, w1, k1 = _branch_blocks(prep.mp)
    n = a0.shape[0]

    length = cfg.effective_ergodic_length
    gamma_st = stationary_probability(cfg.channel)
    word = sample_chain(cfg.channel, gamma_st, length, seed, stream=ERGODIC_STREAM)
    path = np.empty((length + 1, n, n))
    path[0] = prep.p_star.entries
    p = path[0]
    for k in range(1, length + 1):
        p = (
            _gamma1_update(a1, w1, k1, p)
            if word[k]
            else _gamma0_update(a0, w0, p)
        )
        path[k] = p
    samples = distances_to(prep.p_star, path) / LN10
    return samples, make_histogram(samples, cfg.delta_max, cfg.n_e_bins)


def cluster_intervals(distances: np.ndarray, n_s: int) -> list:
    """Half-open assignment intervals around each orbit distance.

    Cluster 0 takes ``[0, d1/n_s]``; interior cluster ``i`` takes
    ``(d_i - (d_i - d_{i-1})/n_s, d_i + (d_{i+1} - d_i)/n_s]``; the last
    cluster is capped at its own distance.  Anything outside every interval
    belongs to no cluster.
    """
    d = np.asarray(distances, dtype=float)
    if d[0] != 0.0:
        raise ValueError("distances must start at 0")
    if np.any(np.diff(d) <= 0):
        raise ValueError("distances must be strictly increasing")
    last = len(d) - 1
    out = [(0.0, d[1] / n_s, True)]
    for i in range(1, last + 1):
        lo = d[i] - (d[i] - d[i - 1]) / n_s
        hi = d[i] + (d[i + 1] - d[i]) / n_s if i < last else d[last]
        out.append((lo, hi, False))
    return out


def cluster_probabilities(
    samples: np.ndarray, distances: np.ndarray, n_s: int
) -> tuple[np.ndarray, float]:
    """Fraction of samples in each cluster interval, plus the leftover.

    Returns ``(fractions, unassigned)`` where ``fractions[i]`` is the share
    of samples inside interval ``i`` and ``unassigned`` the share outside
    every interval.
    """
    samples = np.asarray(samples, dtype=float)
    fractions = np.zeros(len(distances))
    for i, (lo, hi, closed_lo) in enumerate(cluster_intervals(distances, n_s)):
        if closed_lo:
            mask = (samples >= lo) & (samples <= hi)
        else:
            mask = (samples > lo) & (samples <= hi)
        fractions[i] = np.count_nonzero(mask) / samples.size
    return fractions, float(1.0 - fractions.sum())


def distribution_clusters(
    dist: AtomicDistribution, distances: np.ndarray, n_s: int
) -> tuple[np.ndarray, float]:
    """Cluster masses of an atomic distribution under the same intervals."""
    fractions = np.zeros(len(distances))
    assigned = 0.0
    intervals = cluster_intervals(distances, n_s)
    for atom in dist.atoms:
        for i, (lo, hi, closed_lo) in enumerate(intervals):
            inside = (atom.distance >= lo) if closed_lo else (atom.distance > lo)
            if inside and atom.distance <= hi:
                fractions[i] += atom.mass
                assigned += atom.mass
                break
    return fractions, float(1.0 - assigned)


def ergodic_distribution(
    cfg: ExperimentConfig, prep: PreparedPlant | None = None
) -> AtomicDistribution:
    """Cluster-level atomic distribution backed by an ergodic run."""
    if prep is None:
        prep = prepare(cfg)
    samples, _ = run_ergodic(cfg, prep)
    fractions, unassigned = cluster_probabilities(samples, prep.ladder, cfg.n_s)
    mats = [prep.p_star]
    for _ in range(cfg.n_d):
        mats.append(homographic(prep.mp.sym.m0, mats[-1]))
    atoms = tuple(
        Atom(matrix=m, distance=float(d), mass=float(f), code="0" * i)
        for i, (m, d, f) in enumerate(zip(mats, prep.ladder, fractions))
    )
    return AtomicDistribution(atoms=atoms, residual_mass=unassigned, method="ergodic")


def compare_table(cfg: ExperimentConfig, prep: PreparedPlant | None = None) -> ClusterTable:
    """Three-column cluster table: delta lumping, ergodic run, empirical run."""
    if prep is None:
        prep = prepare(cfg)
    gamma_st = stationary_probability(cfg.channel)
    delta = delta_distribution(prep.mp, prep.p_star, gamma_st, cfg.n_d)
    delta_fracs, delta_un = distribution_clusters(delta, prep.ladder, cfg.n_s)
    erg_samples, _ = run_ergodic(cfg, prep)
    erg_fracs, erg_un = cluster_probabilities(erg_samples, prep.ladder, cfg.n_s)
    emp_samples, _ = run_empirical(cfg, prep)
    emp_fracs, emp_un = cluster_probabilities(emp_samples, prep.ladder, cfg.n_s)
    return ClusterTable(
        distances=prep.ladder,
        n_s=cfg.n_s,
        empirical=emp_fracs,
        ergodic=erg_fracs,
        delta_approx=delta_fracs,
        unassigned_empirical=emp_un,
        unassigned_ergodic=erg_un,
        unassigned_delta=delta_un,
    )


def rate_study(
    cfg: ExperimentConfig,
    checkpoints,
    prep: PreparedPlant | None = None,
) -> list[tuple[int, float, float]]:
    """Convergence diagnostics of the ergodic time average.

    Runs one trajectory of length ``cfg.effective_ergodic_length`` (the
    reference run), evaluates the running distribution function on the
    cluster-boundary grid at each checkpoint, and reports the sup gap to the
    full-length reference together with the gap divided by
    ``(ln n / n)^(1/4)``.
    """
    checkpoints = [int(c) for c in checkpoints]
    if any(c2 <= c1 for c1, c2 in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints and checkpoints[-1] > cfg.effective_ergodic_length:
        raise ValueError("checkpoints cannot exceed the trajectory length")
    if prep is None:
        prep = prepare(cfg)
    samples, _ = run_ergodic(cfg, prep)
    grid = np.array([hi for (_, hi, _) in cluster_intervals(prep.ladder, cfg.n_s)])
    inside = samples[:, None] <= grid[None, :]
    running = np.cumsum(inside, axis=0) / np.arange(1, samples.size + 1)[:, None]
    reference = running[-1]
    out = []
    for c in checkpoints:
        gap = float(np.max(np.abs(running[c] - reference)))
        envelope = float(gap / (np.log(c) / c) ** 0.25)
        out.append((c, gap, envelope))
    return out
