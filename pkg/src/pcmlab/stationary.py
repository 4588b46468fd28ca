"""Approximations of the stationary law of the covariance recursion.

Three complementary routes:

1. time averaging along one ergodic trajectory started at the fixed point
   (:func:`time_average_F`);
2. weighted enumeration of the finite-horizon reachable set, i.e. the exact
   law of the idealized atom chain pushed ``max_len`` steps forward under the
   stationary arrival probability, with low-probability subtrees pruned into
   a reported residual (:func:`enumeration_distribution`);
3. lumping onto the open-loop orbit of the fixed point with geometric masses
   (:func:`delta_distribution`).

Distances carried by atoms and emitted tables use the decimal-log scale
(``sqrt(sum log10^2 eigenvalues)``, i.e. the canonical metric divided by
``ln 10``) so that distance columns line up across toolchains; the canonical
natural-log metric stays the unit of the core layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import PcmTrajectory
from .pdm import PDMatrix, homographic, riemannian_distance
from .plant import ModifiedPlant

LN10 = math.log(10.0)


def decimal_distance(p, q) -> float:
    """Riemannian distance on the decimal-log scale used by emitted tables."""
    return riemannian_distance(p, q) / LN10


@dataclass(frozen=True)
class Atom:
    """One support point of an approximate stationary law.

    ``distance`` is the decimal-log Riemannian distance to the reference
    fixed point; ``code`` is the time-ordered arrival word that generated
    the matrix from the fixed point (empty for the fixed point itself).
    """

    matrix: PDMatrix
    distance: float
    mass: float
    code: str = ""


@dataclass(frozen=True)
class AtomicDistribution:
    """Atoms sorted by distance plus the mass left unassigned to any atom."""

    atoms: tuple
    residual_mass: float
    method: str

    def __post_init__(self):
        if self.method not in ("ergodic", "enumerate", "delta"):
            raise ValueError(f"unknown method {self.method!r}")
        atoms = tuple(sorted(self.atoms, key=lambda a: a.distance))
        total = sum(a.mass for a in atoms) + self.residual_mass
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"masses plus residual sum to {total!r}, not 1")
        if any(a.mass < -1e-15 for a in atoms):
            raise ValueError("negative atom mass")
        object.__setattr__(self, "atoms", atoms)

    def masses(self) -> np.ndarray:
        return np.array([a.mass for a in self.atoms])

    def distances(self) -> np.ndarray:
        return np.array([a.distance for a in self.atoms])

    def cdf(self, epsilon: float) -> float:
        """Total atom mass within decimal-log distance ``epsilon``."""
        return float(sum(a.mass for a in self.atoms if a.distance <= epsilon))


@dataclass(frozen=True)
class BallIndicatorConfig:
    """Ball radius (canonical natural-log units) around a reference matrix."""

    epsilon: float
    reference: PDMatrix

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def enumerate_reachable(mp: ModifiedPlant, p_star: PDMatrix, n: int) -> list:
    """All matrices reachable from the fixed point in at most ``n`` steps.

    Exactly ``2**n`` atoms: the fixed point itself plus one matrix per
    arrival word that starts with a drop (words whose first symbol is 1
    reduce away because the measurement branch fixes the fixed point).
    Pairwise distinctness is asserted (minimum separation 1e-6 in the
    canonical metric); a violation means the numerics are too coarse or the
    injectivity hypotheses fail.  Masses are left at 0.

    ``n`` is capped at 12 to keep the enumeration and the distinctness scan
    tractable.
    """
    if not 0 <= n <= 12:
        raise ValueError(f"n must lie in [0, 12], got {n}")
    atoms = [Atom(matrix=p_star, distance=0.0, mass=0.0, code="")]
    frontier = []
    if n >= 1:
        first = homographic(mp.sym.m0, p_star)
        atoms.append(
            Atom(
                matrix=first,
                distance=decimal_distance(first, p_star),
                mass=0.0,
                code="0",
            )
        )
        frontier = [atoms[-1]]
    for _ in range(2, n + 1):
        nxt = []
        for atom in frontier:
            for bit in (0, 1):
                mat = homographic(mp.sym.m1 if bit else mp.sym.m0, atom.matrix)
                nxt.append(
                    Atom(
                        matrix=mat,
                        distance=decimal_distance(mat, p_star),
                        mass=0.0,
                        code=atom.code + str(bit),
                    )
                )
        atoms.extend(nxt)
        frontier = nxt
    if len(atoms) != 2**n:
        raise AssertionError(f"expected {2**n} atoms, got {len(atoms)}")
    _assert_distinct(atoms)
    return atoms


def _assert_distinct(atoms, min_delta: float = 1e-6) -> None:
    """Check pairwise Riemannian separation via an entry-space prefilter."""
    from scipy.spatial import cKDTree

    flat = np.array([a.matrix.entries.ravel() for a in atoms])
    scale = 1.0 + np.max(np.abs(flat))
    # Entry-space neighbors are the only candidates for metric coincidence;
    # the radius is generous relative to the target separation.
    tree = cKDTree(flat)
    for i, j in tree.query_pairs(r=1e-3 * scale):
        d = riemannian_distance(atoms[i].matrix, atoms[j].matrix)
        if d <= min_delta:
            raise AssertionError(
                f"atoms {atoms[i].code!r} and {atoms[j].code!r} coincide "
                f"(distance {d:.3e}); injectivity violated or numerics too coarse"
            )


def index_code(j: int) -> tuple:
    """Little-endian binary code used by the closed-form enumeration weight.

    For ``j >= 2`` the code has ``ceil(log2 j)`` bits and encodes
    ``j - 1 - 2**(bits - 1)``; for ``j == 1`` it is empty.
    """
    if j < 1:
        raise ValueError("index must be >= 1")
    if j == 1:
        return ()
    s = (j - 1).bit_length()
    m = j - 1 - (1 << (s - 1))
    return tuple((m >> i) & 1 for i in range(s))


def enumeration_weight(j: int, n: int, gamma_st: float) -> float:
    """Literal closed-form enumeration weight of atom ``j`` at horizon ``n``.

    Evaluates ``(1 - g^(n-s)) * g^(#ones) * (1-g)^(s-#ones)`` where
    ``s = ceil(log2 j)`` and the bits come from :func:`index_code`.  No
    normalization is applied: summed over all ``j`` these behave like
    expected visit counts rather than a probability law (the ``j = 1`` atom
    alone carries ``1 - g^n``), which is why the distribution builder below
    uses the normalized horizon law instead.  Exposed for comparison.
    """
    if not (0.0 < gamma_st < 1.0):
        raise ValueError("gamma_st must lie in (0, 1)")
    if not 1 <= j <= 2**n:
        raise ValueError(f"index {j} outside [1, 2^{n}]")
    code = index_code(j)
    s = len(code)
    ones = sum(code)
    return (1.0 - gamma_st ** (n - s)) * gamma_st**ones * (1.0 - gamma_st) ** (s - ones)


def enumeration_distribution(
    mp: ModifiedPlant,
    p_star: PDMatrix,
    gamma_st: float,
    max_len: int,
    eps_p: float,
) -> AtomicDistribution:
    """Weighted enumeration of the reachable set at horizon ``max_len``.

    Pushes the stationary arrival law ``max_len`` steps forward over the
    reachable atoms: the fixed point keeps the all-arrivals mass
    ``g^max_len``; the atom generated by a drop followed by suffix ``w``
    carries ``g^(max_len - 1 - len(w)) * (1 - g) * g^#1(w) * (1-g)^#0(w)``
    (the documented per-suffix stationary weight times the leading-arrivals
    factor that makes the whole law sum to one exactly).

    Subtrees whose suffix probability ``g^#1 * (1-g)^#0`` falls below
    ``eps_p`` are pruned; their total mass goes to ``residual_mass`` in
    closed form rather than being dropped.

    Parameters
    ----------
    max_len : int
        Horizon length, at most 20 (with pruning this keeps the node count
        around a million in the worst case).
    eps_p : float
        Suffix-probability cutoff in (0, 1).
    """
    if not (0.0 < gamma_st < 1.0):
        raise ValueError("gamma_st must lie in (0, 1)")
    if not 1 <= max_len <= 20:
        raise ValueError(f"max_len must lie in [1, 20], got {max_len}")
    if not (0.0 < eps_p < 1.0):
        raise ValueError("eps_p must lie in (0, 1)")

    g = gamma_st
    atoms = [Atom(matrix=p_star, distance=0.0, mass=g**max_len, code="")]
    root = homographic(mp.sym.m0, p_star)
    # DFS over suffixes w (applied after the initial drop); suffix
    # probability only shrinks along a branch, so pruning is subtree-safe.
    stack = [(root, "0", 0, 1.0)]
    while stack:
        mat, code, depth, p_suffix = stack.pop()
        if p_suffix < eps_p:
            # Entire subtree pruned; its mass lands in the residual below.
            continue
        mass = g ** (max_len - 1 - depth) * (1.0 - g) * p_suffix
        atoms.append(
            Atom(
                matrix=mat,
                distance=decimal_distance(mat, p_star),
                mass=mass,
                code=code,
            )
        )
        if depth < max_len - 1:
            stack.append(
                (homographic(mp.sym.m0, mat), code + "0", depth + 1, p_suffix * (1.0 - g))
            )
            stack.append(
                (homographic(mp.sym.m1, mat), code + "1", depth + 1, p_suffix * g)
            )
    # Float the residual so the validated sum is exact.
    residual = 1.0 - sum(a.mass for a in atoms)
    return AtomicDistribution(atoms=tuple(atoms), residual_mass=residual, method="enumerate")


def delta_distribution(
    mp: ModifiedPlant,
    p_star: PDMatrix,
    gamma_st: float,
    n_d: int,
) -> AtomicDistribution:
    """Delta-function lumping on the open-loop orbit of the fixed point.

    The fixed point gets mass ``g``; the ``i``-th open-loop image gets
    ``g * (1 - g)^i`` for ``i = 1..n_d``; the geometric tail
    ``(1 - g)^(n_d + 1)`` is reported as residual.
    """
    if not (0.0 < gamma_st < 1.0):
        raise ValueError("gamma_st must lie in (0, 1)")
    if n_d < 1:
        raise ValueError("n_d must be >= 1")
    g = gamma_st
    atoms = [Atom(matrix=p_star, distance=0.0, mass=g, code="")]
    mat = p_star
    for i in range(1, n_d + 1):
        mat = homographic(mp.sym.m0, mat)
        atoms.append(
            Atom(
                matrix=mat,
                distance=decimal_distance(mat, p_star),
                mass=g * (1.0 - g) ** i,
                code="0" * i,
            )
        )
    residual = 1.0 - sum(a.mass for a in atoms)
    return AtomicDistribution(atoms=tuple(atoms), residual_mass=residual, method="delta")


def time_average_F(traj: PcmTrajectory, config: BallIndicatorConfig, burn_in: int = 0) -> float:
    """Fraction of trajectory time spent inside the reference ball.

    Estimates the stationary distribution function of the distance to the
    reference at radius ``config.epsilon`` (canonical units), provided the
    trajectory started at the fixed point with the arrival chain already
    stationary.
    """
    if traj.distances is not None:
        distances = np.asarray(traj.distances)
    else:
        distances = np.array(
            [riemannian_distance(p, config.reference) for p in traj.pcms]
        )
    if burn_in < 0 or burn_in >= distances.size:
        raise ValueError(
            f"burn_in {burn_in} leaves no samples out of {distances.size}"
        )
    tail = distances[burn_in:]
    return float(np.mean(tail <= config.epsilon))
