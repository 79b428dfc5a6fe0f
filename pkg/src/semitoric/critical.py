"""Numerical detection and classification of critical points.

Pipeline: a coarse per-chart grid is scored by the smallest singular value
of the moment-map Jacobian; promising cells (local minima of the score
below a threshold) seed a Gauss-Newton refinement that drives the trailing
singular values to zero for the smallest viable rank hypothesis.  Refined
points are deduplicated chart-aware through the system embedding,
classified by reduction to a fixed-point problem plus eigenvalue species
separation, and collected into strata keyed by Williamson type.

Grid cells are processed independently; results are merged by sorted cell
index and the per-cell classification seed is derived from (seed, cell
index), so the worker count never changes the output.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ChartError, DimensionError, NumericalError
from .symplectic import darboux_basis, standard_form_matrix
from .systems import MomentMapSystem, make_system
from .williamson import (
    CartanCandidate,
    WilliamsonType,
    classify_fixed,
    regular_type,
    type_leq,
)

DEFAULT_TOLERANCES = {
    "rank": 1e-7,        # relative singular-value cutoff for numerical rank
    "refine": 1e-9,      # residual target of the Gauss-Newton refinement
    "dedup": 1e-4,       # embedding-distance radius identifying two points
    "commute": 1e-6,     # bracket tolerance for reduced Hessian families
    "closure": 0.25,     # adjacency distance for the closure check
    "promote": None,     # grid score threshold; None -> 3 * max grid step
}
RANK_TOL_ABS = 1e-9
MAX_CANDIDATES = 4000


def numerical_rank(J: np.ndarray, tol: float, tol_abs: float = RANK_TOL_ABS) -> int:
    """Count singular values above max(tol * largest, tol_abs)."""
    if tol <= 0:
        raise DimensionError("tol must be positive")
    J = np.asarray(J, dtype=float)
    if not np.all(np.isfinite(J)):
        raise NumericalError("non-finite matrix in rank computation")
    try:
        s = np.linalg.svd(J, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    if s.size == 0:
        return 0
    threshold = max(tol * float(s[0]), tol_abs)
    return int(np.sum(s > threshold))


@dataclass
class CriticalPoint:
    """A refined and classified critical (or regular) point."""

    chart_id: str
    coords: np.ndarray
    rank: int
    wtype: WilliamsonType | None
    value: np.ndarray
    nondegenerate: bool
    residual: float
    cell_index: int = -1

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.wtype is not None and self.wtype.k_x != self.rank:
            raise DimensionError(
                f"type {self.wtype} has k_x = {self.wtype.k_x}, inconsistent with rank {self.rank}")

    def csv_row(self) -> list:
        ks = (["", "", "", ""] if self.wtype is None
              else list(self.wtype.as_tuple()))
        return ([self.chart_id] + list(self.coords) + [self.rank] + ks
                + [self.nondegenerate] + list(self.value) + [self.residual])


def csv_header(n: int, dim: int) -> list[str]:
    return (["chart"] + [f"coord{i}" for i in range(dim)] + ["rank", "k_e", "k_f", "k_h", "k_x",
            "nondegenerate"] + [f"value{i}" for i in range(n)] + ["residual"])


@dataclass
class StratumMap:
    """Partition of classified points by Williamson type."""

    strata: dict[WilliamsonType, list[CriticalPoint]] = field(default_factory=dict)
    degenerate: list[CriticalPoint] = field(default_factory=list)
    region: dict = field(default_factory=dict)

    def add(self, p: CriticalPoint):
        if p.wtype is None or not p.nondegenerate:
            self.degenerate.append(p)
            return
        self.strata.setdefault(p.wtype, []).append(p)
        if self.strata[p.wtype][0].wtype != p.wtype:
            raise DimensionError("stratum key mismatch")

    def points(self) -> list[CriticalPoint]:
        out = [p for pts in self.strata.values() for p in pts]
        return out + list(self.degenerate)

    def counts(self) -> dict[str, int]:
        out = {str(w): len(pts) for w, pts in sorted(self.strata.items())}
        if self.degenerate:
            out["degenerate"] = len(self.degenerate)
        return out


# ---------------------------------------------------------------------------
# reduction and classification


def reduce_hessians(sys: MomentMapSystem, chart_id: str, p: np.ndarray, rank: int,
                    commute_tol: float = 1e-6) -> CartanCandidate:
    """Reduced commuting Hessian family at a critical point of the given rank.

    The n-rank coefficient vectors spanning the left null space of dF(p)
    yield Hessians of the null combinations; these are restricted to a
    Darboux basis of ker dF(p) modulo the span of the component fields and
    expressed in standard symplectic coordinates.
    """
    p = np.asarray(p, dtype=float)
    n, dim = sys.n, p.size
    J = sys.jacobian(chart_id, p)
    U, s, Vt = np.linalg.svd(J)
    C = U[:, rank:]                    # left null space, coefficients of c.F
    W = sys.form_matrix(chart_id, p)
    hess = sys.hessians(chart_id, p)   # (n, dim, dim)

    flat = np.max(np.abs(W - standard_form_matrix(n))) < 1e-12 if dim == 2 * n else False
    if rank == 0 and flat:
        basis = np.eye(dim)
    else:
        kernel = Vt[rank:].T           # (dim, dim - rank)
        if rank:
            fields = np.linalg.solve(W, J.T)     # (dim, n), rank `rank`
            fq, fs, _ = np.linalg.svd(fields, full_matrices=False)
            fq = fq[:, :rank]
            kernel = kernel - fq @ (fq.T @ kernel)
            kq, ks, _ = np.linalg.svd(kernel, full_matrices=False)
            keep = int(np.sum(ks > 1e-8 * max(ks[0], 1.0)))
            if keep != dim - 2 * rank:
                raise NumericalError(
                    f"reduced space has dimension {keep}, expected {dim - 2*rank}")
            kernel = kq[:, :keep]
        basis = darboux_basis(W, kernel)

    reduced = []
    for k in range(n - rank):
        Hc = np.tensordot(C[:, k], hess, axes=(0, 0))
        reduced.append(basis.T @ (0.5 * Hc) @ basis)
    return CartanCandidate(reduced, tolerance=commute_tol)


def classify_point(sys: MomentMapSystem, chart_id: str, p: np.ndarray,
                   rank_tol: float = 1e-7, commute_tol: float = 1e-6,
                   seed: int = 0, cell_index: int = -1) -> CriticalPoint:
    """Compose rank, reduction and fixed-point classification at p."""
    p = np.asarray(p, dtype=float)
    J = sys.jacobian(chart_id, p)
    s = np.linalg.svd(J, compute_uv=False)
    rank = numerical_rank(J, rank_tol)
    residual = float(np.sqrt(np.sum(s[rank:] ** 2)))
    value = sys.value(chart_id, p)
    if rank == sys.n:
        return CriticalPoint(chart_id, p, rank, regular_type(sys.n), value, True,
                             residual, cell_index)
    try:
        cand = reduce_hessians(sys, chart_id, p, rank, commute_tol)
        report = classify_fixed(cand, ambient_n=sys.n, seed=seed)
    except NumericalError:
        return CriticalPoint(chart_id, p, rank, None, value, False, residual, cell_index)
    return CriticalPoint(chart_id, p, rank, report.wtype, value,
                         report.nondegenerate, residual, cell_index)


# ---------------------------------------------------------------------------
# refinement


def _gauss_newton_refine(sys: MomentMapSystem, chart_id: str, p0: np.ndarray, rank: int,
                         tol: float, box_lo: np.ndarray, box_hi: np.ndarray,
                         local_radius: float = np.inf, max_iter: int = 40):
    """Drive the trailing singular values of dF to zero at hypothesis `rank`.

    The iteration is confined to a sup-ball of local_radius around the seed
    so a low-rank hypothesis cannot slide along a critical valley and claim
    a faraway point of even lower rank that belongs to another cell.
    """
    p = np.asarray(p0, dtype=float).copy()
    start = p.copy()
    n = sys.n

    def admissible(q):
        return (np.all(q >= box_lo) and np.all(q <= box_hi)
                and np.max(np.abs(q - start)) <= local_radius
                and bool(np.all(sys.in_chart(chart_id, q))))

    def cost(q):
        s = np.linalg.svd(sys.jacobian(chart_id, q), compute_uv=False)
        return float(np.sum(s[rank:] ** 2))

    for _ in range(max_iter):
        J = sys.jacobian(chart_id, p)
        U, s, _ = np.linalg.svd(J)
        res_val = float(np.sum(s[rank:] ** 2))
        if np.sqrt(res_val) < tol:
            return p, True
        C = U[:, rank:]
        R = (C.T @ J).ravel()
        hess = sys.hessians(chart_id, p)
        G = np.concatenate([np.tensordot(C[:, k], hess, axes=(0, 0))
                            for k in range(n - rank)], axis=0)
        try:
            step, *_ = np.linalg.lstsq(G, -R, rcond=1e-10)
        except np.linalg.LinAlgError:
            return p, False
        alpha = 1.0
        while alpha > 1e-4:
            q = p + alpha * step
            if admissible(q) and cost(q) < res_val:
                break
            alpha *= 0.5
        else:
            return p, np.sqrt(res_val) < tol
        p = p + alpha * step
    s = np.linalg.svd(sys.jacobian(chart_id, p), compute_uv=False)
    return p, bool(np.sqrt(np.sum(s[rank:] ** 2)) < tol)


def refine_candidate(sys: MomentMapSystem, chart_id: str, p0: np.ndarray,
                     refine_tol: float, box, local_radius: float = np.inf):
    """Ascending-rank refinement; returns the refined point or None."""
    margin = min(local_radius, 1.0)
    lo = np.array([b[0] for b in box]) - margin
    hi = np.array([b[1] for b in box]) + margin
    for r in range(sys.n):
        p, ok = _gauss_newton_refine(sys, chart_id, p0, r, refine_tol, lo, hi, local_radius)
        if ok and bool(np.all(sys.in_chart(chart_id, p))):
            return p
    return None


# ---------------------------------------------------------------------------
# the scan


def _grid_centers(box, steps):
    axes = [np.arange(lo, hi + 1e-12, st) for (lo, hi), st in zip(box, steps)]
    return axes


def _normalize_region(sys: MomentMapSystem, region, grid):
    if region is None:
        region = sys.default_region()
    elif not isinstance(region, dict):
        region = {cid: [tuple(ax) for ax in region] for cid in sys.chart_ids}
    out_region = {}
    out_steps = {}
    for cid, box in region.items():
        if cid not in sys.charts:
            raise ChartError(f"region names unknown chart {cid!r}")
        box = [tuple(map(float, ax)) for ax in box]
        if len(box) != sys.charts[cid].dim:
            raise DimensionError(f"region for chart {cid!r} must have "
                                 f"{sys.charts[cid].dim} axes")
        st = grid if grid is not None else sys.default_step
        steps = [float(st)] * len(box) if np.isscalar(st) else [float(x) for x in st]
        if any(x <= 0 for x in steps):
            raise DimensionError("grid steps must be positive")
        out_region[cid] = box
        out_steps[cid] = steps
    return out_region, out_steps


def _score_chart(sys, cid, box, steps):
    """Grid the chart box, score sigma_min(dF), return promising cells."""
    from scipy.ndimage import minimum_filter

    axes = _grid_centers(box, steps)
    shape = tuple(len(ax) for ax in axes)
    if any(s == 0 for s in shape):
        return np.zeros((0, len(axes))), np.zeros(0, dtype=int), shape
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    mask = np.asarray(sys.in_chart(cid, pts), dtype=bool)
    J = sys.jacobian(cid, pts)
    smin = np.linalg.svd(J, compute_uv=False)[..., -1]
    smin = np.where(mask, smin, np.inf)
    grid_smin = smin.reshape(shape)
    local_min = grid_smin <= minimum_filter(grid_smin, size=3, mode="nearest")
    return pts, smin, local_min.ravel()


def _cell_seed(seed: int, idx: int) -> int:
    return int(np.random.SeedSequence((seed, int(idx))).generate_state(1)[0])


def _refine_chunk(sys, cid, cells, indices, box, radius, refine_tol, rank_tol,
                  commute_tol, seed):
    out = []
    for p0, idx in zip(cells, indices):
        refined = refine_candidate(sys, cid, p0, refine_tol, box, radius)
        if refined is None:
            continue
        cp = classify_point(sys, cid, refined, rank_tol, commute_tol,
                            seed=_cell_seed(seed, idx), cell_index=int(idx))
        out.append(cp)
    return out


def _process_cells(args):
    """Worker entry: rebuild the system by name, then refine a cell chunk."""
    (name, cid, cells, indices, box, radius, refine_tol, rank_tol, commute_tol, seed) = args
    return _refine_chunk(make_system(name), cid, cells, indices, box, radius,
                         refine_tol, rank_tol, commute_tol, seed)


def find_critical(sys: MomentMapSystem, region=None, grid=None,
                  tolerances: dict | None = None, seed: int = 0,
                  workers: int = 1, max_candidates: int = MAX_CANDIDATES,
                  keep_regular: bool = False) -> list[CriticalPoint]:
    """Scan a region for critical points and classify them.

    Returns deduplicated CriticalPoints ordered by (chart, cell index).
    Points that refine to full rank are dropped unless keep_regular is set.
    """
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(tolerances or {})
    region_n, steps_n = _normalize_region(sys, region, grid)

    tasks = []
    for cid in sys.chart_ids:
        if cid not in region_n:
            continue
        box, steps = region_n[cid], steps_n[cid]
        pts, smin, local_min = _score_chart(sys, cid, box, steps)
        if pts.shape[0] == 0:
            continue
        promote = tols.get("promote")
        if promote is None:
            promote = 3.0 * max(steps)
        good = np.flatnonzero((smin < promote) & local_min)
        good = good[np.argsort(smin[good], kind="stable")][:max_candidates]
        good = np.sort(good)
        if good.size:
            tasks.append((cid, pts[good], good, box, 3.0 * max(steps)))

    results: list[CriticalPoint] = []
    if workers > 1 and tasks:
        import multiprocessing as mp

        chunked = []
        for cid, cells, idx, box, radius in tasks:
            for k in range(0, len(idx), 64):
                chunked.append((sys.name, cid, cells[k:k + 64], idx[k:k + 64], box,
                                radius, tols["refine"], tols["rank"], tols["commute"], seed))
        with mp.get_context("fork").Pool(processes=workers) as pool:
            for part in pool.map(_process_cells, chunked):
                results.extend(part)
    else:
        for cid, cells, idx, box, radius in tasks:
            results.extend(_refine_chunk(sys, cid, cells, idx, box, radius, tols["refine"],
                                         tols["rank"], tols["commute"], seed))

    order = {cid: k for k, cid in enumerate(sys.chart_ids)}
    results.sort(key=lambda cp: (order[cp.chart_id], cp.cell_index))

    kept: list[CriticalPoint] = []
    embeds: list[np.ndarray] = []
    for cp in results:
        if cp.rank == sys.n and not keep_regular:
            continue
        e = sys.embed(cp.chart_id, cp.coords)
        if any(np.max(np.abs(e - e0)) < tols["dedup"] for e0 in embeds):
            continue
        embeds.append(e)
        kept.append(cp)
    return kept


def build_strata(sys: MomentMapSystem, points: list[CriticalPoint],
                 region=None) -> StratumMap:
    smap = StratumMap(region={"system": sys.name, "region": region})
    for p in points:
        smap.add(p)
    return smap


def classify_grid(sys: MomentMapSystem, region=None, grid=None,
                  rank_tol: float = 1e-7, commute_tol: float = 1e-6,
                  seed: int = 0) -> list[CriticalPoint]:
    """Classify raw grid points without refinement (regular points included).

    Useful for sampling a full stratification, e.g. to exercise the closure
    order against the regular stratum, which a critical-point scan drops.
    """
    region_n, steps_n = _normalize_region(sys, region, grid)
    out = []
    for cid in sys.chart_ids:
        if cid not in region_n:
            continue
        axes = _grid_centers(region_n[cid], steps_n[cid])
        idx = 0
        for combo in itertools.product(*axes):
            p = np.array(combo)
            idx += 1
            if not bool(np.all(sys.in_chart(cid, p))):
                continue
            out.append(classify_point(sys, cid, p, rank_tol, commute_tol,
                                      seed=_cell_seed(seed, idx), cell_index=idx))
    return out


# ---------------------------------------------------------------------------
# closure / adjacency


@dataclass
class AdjacencyReport:
    """Closure-order consistency of sampled strata."""

    assertions: list[tuple[WilliamsonType, WilliamsonType, bool]] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "assertions": [{"lower": str(a), "upper": str(b), "holds": ok}
                           for a, b, ok in self.assertions],
            "violations": self.violations,
            "consistent": self.consistent,
        }


def closure_check(sys: MomentMapSystem, strata: StratumMap, tol: float = 0.25) -> AdjacencyReport:
    """Check that sampled closure adjacency respects the partial order.

    For types k, k': when every sampled point of stratum k lies within tol
    (embedding distance) of the sampled point set of k', the stratum k sits
    in the closure of k' at sampling resolution, so k <= k' must hold.
    """
    report = AdjacencyReport()
    embeds = {w: np.stack([sys.embed(p.chart_id, p.coords) for p in pts])
              for w, pts in strata.strata.items() if pts}
    for wa, ea in embeds.items():
        for wb, eb in embeds.items():
            if wa == wb:
                continue
            dists = np.array([np.min(np.max(np.abs(eb - x), axis=-1)) for x in ea])
            if np.all(dists <= tol):
                holds = type_leq(wa, wb)
                report.assertions.append((wa, wb, holds))
                if not holds:
                    report.violations.append({
                        "lower": str(wa), "upper": str(wb),
                        "max_distance": float(np.max(dists)), "tolerance": tol,
                    })
    return report
