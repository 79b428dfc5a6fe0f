"""Williamson types, the partial order on them, and numerical classification.

A non-degenerate critical point of an integrable system carries a quadruplet
(k_e, k_f, k_h, k_x) counting its elliptic, focus-focus, hyperbolic and
transverse components; the counts satisfy k_e + 2*k_f + k_h + k_x = n.
Classification of a fixed point proceeds from the commuting family of
Hessians: a generic linear combination is turned into its linear Hamiltonian
field, whose eigenvalue group structure (imaginary pairs / real pairs /
complex quadruples) determines the counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError
from .symplectic import QuadraticHamiltonian, standard_form_matrix

CLUSTER_TOL_FACTOR = 1e-7  # relative eigenvalue clustering threshold
MAX_DRAWS = 5


@dataclass(frozen=True, order=True)
class WilliamsonType:
    """The invariant quadruplet of a non-degenerate critical point."""

    k_e: int
    k_f: int
    k_h: int
    k_x: int

    def __post_init__(self):
        for v in (self.k_e, self.k_f, self.k_h, self.k_x):
            if v < 0 or int(v) != v:
                raise DimensionError(f"component counts must be non-negative integers, got {self}")

    @property
    def n(self) -> int:
        return self.k_e + 2 * self.k_f + self.k_h + self.k_x

    @property
    def reduced_dim(self) -> int:
        """Dimension m = n - k_x of the reduced fixed-point problem."""
        return self.k_e + 2 * self.k_f + self.k_h

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.k_e, self.k_f, self.k_h, self.k_x)

    def __str__(self) -> str:
        return f"({self.k_e},{self.k_f},{self.k_h},{self.k_x})"


def regular_type(n: int) -> WilliamsonType:
    return WilliamsonType(0, 0, 0, n)


def williamson_type(k_e: int, k_f: int, k_h: int, k_x: int, n: int | None = None) -> WilliamsonType:
    """Construct a type, validating the count identity against an explicit n."""
    w = WilliamsonType(k_e, k_f, k_h, k_x)
    if n is not None and w.n != n:
        raise DimensionError(
            f"counts {w} give ambient dimension {w.n}, not the stated {n}")
    return w


def type_leq(a: WilliamsonType, b: WilliamsonType) -> bool:
    """Partial order: a <= b iff a.k_e >= b.k_e, a.k_f >= b.k_f, a.k_h >= b.k_h."""
    if a.n != b.n:
        raise DimensionError(f"cannot compare types of ambient dimension {a.n} and {b.n}")
    return a.k_e >= b.k_e and a.k_f >= b.k_f and a.k_h >= b.k_h


def type_of_product(a: WilliamsonType, b: WilliamsonType) -> WilliamsonType:
    """Componentwise sum; the ambient dimensions add."""
    return WilliamsonType(a.k_e + b.k_e, a.k_f + b.k_f, a.k_h + b.k_h, a.k_x + b.k_x)


@dataclass(frozen=True)
class TypePoset:
    """A set of Williamson types sharing one ambient dimension, under <=."""

    members: frozenset[WilliamsonType]

    def __post_init__(self):
        members = frozenset(self.members)
        if members:
            dims = {w.n for w in members}
            if len(dims) > 1:
                raise DimensionError(f"poset members span several ambient dimensions: {sorted(dims)}")
        object.__setattr__(self, "members", members)

    def leq(self, a: WilliamsonType, b: WilliamsonType) -> bool:
        return type_leq(a, b)

    def comparable(self, a: WilliamsonType, b: WilliamsonType) -> bool:
        return type_leq(a, b) or type_leq(b, a)

    def minimal_elements(self) -> set[WilliamsonType]:
        return {a for a in self.members
                if not any(b != a and type_leq(b, a) for b in self.members)}

    def maximal_elements(self) -> set[WilliamsonType]:
        return {a for a in self.members
                if not any(b != a and type_leq(a, b) for b in self.members)}


@dataclass
class CartanCandidate:
    """A commuting family of m quadratic Hamiltonians on R^(2m).

    The list length must match the reduced dimension m; `tolerance` drives
    both the commutation test and the eigenvalue species thresholds.
    """

    hessians: list[QuadraticHamiltonian]
    tolerance: float = 1e-8

    def __post_init__(self):
        if not self.hessians:
            raise DimensionError("candidate needs at least one quadratic Hamiltonian")
        self.hessians = [h if isinstance(h, QuadraticHamiltonian) else QuadraticHamiltonian(h)
                         for h in self.hessians]
        dims = {h.dim for h in self.hessians}
        if len(dims) > 1:
            raise DimensionError(f"mixed Hessian dimensions {sorted(dims)}")
        self.dim = dims.pop()

    @property
    def m(self) -> int:
        return len(self.hessians)


@dataclass
class ClassificationReport:
    wtype: WilliamsonType | None
    nondegenerate: bool
    eigenvalues: np.ndarray
    coefficients: np.ndarray
    diagnostics: str = ""


def quadratic_bracket_matrix(S: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Symmetric matrix of the Poisson bracket {p^T S p, p^T T p}."""
    omega = standard_form_matrix(S.shape[0] // 2)
    return 2.0 * (S @ omega @ T - T @ omega @ S)


def is_commuting(c: CartanCandidate) -> bool:
    """True iff all pairwise quadratic brackets vanish within tolerance."""
    mats = [h.S for h in c.hessians]
    scale = max(1.0, max(float(np.max(np.abs(S))) for S in mats))
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            B = quadratic_bracket_matrix(mats[i], mats[j])
            if np.max(np.abs(B)) > c.tolerance * scale:
                return False
    return True


def _group_eigenvalues(eigs: np.ndarray, species_tol: float, match_tol: float):
    """Partition eigenvalues into elliptic pairs, hyperbolic pairs and
    focus-focus quadruples; returns (k_e, k_f, k_h, clusters) or None."""
    remaining = list(eigs)
    counts = {"e": 0, "h": 0, "f": 0}
    clusters: list[list[complex]] = []

    def pop_closest(target):
        if not remaining:
            return None
        dists = [abs(z - target) for z in remaining]
        j = int(np.argmin(dists))
        if dists[j] > match_tol:
            return None
        return remaining.pop(j)

    while remaining:
        remaining.sort(key=lambda z: (-abs(z), z.real, z.imag))
        lam = remaining.pop(0)
        mag = abs(lam)
        if abs(lam.real) <= species_tol * mag:
            partner = pop_closest(np.conj(lam))
            if partner is None:
                return None
            counts["e"] += 1
            clusters.append([lam, partner])
        elif abs(lam.imag) <= species_tol * mag:
            partner = pop_closest(-lam)
            if partner is None:
                return None
            counts["h"] += 1
            clusters.append([lam, partner])
        else:
            group = [lam]
            for target in (np.conj(lam), -lam, -np.conj(lam)):
                nxt = pop_closest(target)
                if nxt is None:
                    return None
                group.append(nxt)
            counts["f"] += 1
            clusters.append(group)
    return counts["e"], counts["f"], counts["h"], clusters


def _clusters_separated(clusters, min_dist: float) -> bool:
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            d = min(abs(a - b) for a in clusters[i] for b in clusters[j])
            if d <= min_dist:
                return False
    return True


def classify_fixed(c: CartanCandidate, ambient_n: int | None = None, seed: int = 0) -> ClassificationReport:
    """Classify a commuting family of quadratic Hamiltonians at a fixed point.

    Draws up to MAX_DRAWS random unit coefficient vectors; the first draw
    whose linearized field has 2m nonzero eigenvalues cleanly separated into
    the three species wins.  k_x of the returned type is ambient_n - m (0 if
    ambient_n is omitted).  Degeneracy is a verdict, not an error.
    """
    m = c.m
    if c.dim != 2 * m:
        raise DimensionError(f"{m} Hessians must live on R^{2*m}, got dimension {c.dim}")
    n = m if ambient_n is None else ambient_n
    if n < m:
        raise DimensionError("ambient dimension smaller than reduced dimension")

    stacked = np.stack([h.S.ravel() for h in c.hessians])
    sv = np.linalg.svd(stacked, compute_uv=False)
    span_dim = int(np.sum(sv > 1e-10 * max(sv[0], 1.0)))
    if span_dim < m:
        return ClassificationReport(None, False, np.array([]), np.array([]),
                                    f"hessian span has dimension {span_dim} < {m}")

    rng = np.random.default_rng(seed)
    omega = standard_form_matrix(m)
    last_eigs = np.array([])
    last_coeffs = np.array([])
    for _ in range(MAX_DRAWS):
        coeffs = rng.normal(size=m)
        coeffs /= np.linalg.norm(coeffs)
        S = sum(ci * h.S for ci, h in zip(coeffs, c.hessians))
        A = np.linalg.solve(omega, 2.0 * S)
        try:
            eigs = np.linalg.eigvals(A)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalError(f"eigenvalue solver failed: {exc}") from exc
        last_eigs, last_coeffs = eigs, coeffs
        scale = float(np.max(np.abs(eigs)))
        if scale == 0.0 or np.min(np.abs(eigs)) <= c.tolerance * scale:
            continue
        grouped = _group_eigenvalues(eigs, species_tol=c.tolerance,
                                     match_tol=10 * c.tolerance * scale)
        if grouped is None:
            continue
        k_e, k_f, k_h, clusters = grouped
        if k_e + 2 * k_f + k_h != m:
            continue
        if not _clusters_separated(clusters, CLUSTER_TOL_FACTOR * scale):
            continue
        wtype = WilliamsonType(k_e, k_f, k_h, n - m)
        return ClassificationReport(wtype, True, eigs, coeffs, "ok")

    return ClassificationReport(None, False, last_eigs, last_coeffs,
                                f"no generic draw separated species in {MAX_DRAWS} attempts")
