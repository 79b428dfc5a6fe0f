"""Extraction and verification of focus-focus nodal surfaces.

The critical values of a type with one focus-focus block form connected
pieces of dimension k_x in value space.  Each piece lies in an affine
plane spanned by the first value axis together with k_x integer direction
vectors, and inside that plane it is the graph of a smooth function of the
transverse parameters.  This module recovers all of that numerically from
classified scan output: collect the values, fit the plane, snap the
transverse directions to primitive integer vectors, extract the graph,
check single-valuedness, and probe a value-space tube for isolation.

For k_x = 1 the piece is a curve; trace_curve continues it with a
predictor-corrector that pins one transverse component value per step and
re-solves for the critical point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .critical import CriticalPoint, StratumMap, classify_point, refine_candidate
from .errors import DimensionError, DomainError, NoIntegerDirection, NotAGraph
from .systems import MomentMapSystem
from .williamson import WilliamsonType

QMAX_DEFAULT = 64
DIRECTION_TOL = 1e-6
DELTA_T = 1e-3  # parameter-collision radius of the single-valuedness check


@dataclass
class CriticalValueCloud:
    """Images of the classified points of one Williamson type."""

    wtype: WilliamsonType
    values: np.ndarray                       # (N, n)
    witnesses: list[CriticalPoint] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def collect_values(strata: StratumMap, w: WilliamsonType,
                   merge_tol: float = 1e-8) -> CriticalValueCloud:
    """Values of all stratum-w points, duplicates within merge_tol merged."""
    if w.k_f != 1:
        raise DimensionError(f"value clouds are collected for k_f = 1 types, got {w}")
    pts = strata.strata.get(w, [])
    vals: list[np.ndarray] = []
    wits: list[CriticalPoint] = []
    for p in pts:
        v = np.asarray(p.value, dtype=float)
        if any(np.max(np.abs(v - u)) < merge_tol for u in vals):
            continue
        vals.append(v)
        wits.append(p)
    n = len(vals[0]) if vals else 0
    values = np.array(vals).reshape(len(vals), n)
    return CriticalValueCloud(w, values, wits)


@dataclass
class AffineFit:
    P: np.ndarray
    basis: np.ndarray          # (n, d) orthonormal columns
    plane_residual: float
    spanned_dim: int
    degenerate: bool


def fit_affine(cloud: CriticalValueCloud | np.ndarray, k_x: int,
               span_tol: float = 1e-7) -> AffineFit:
    """Fit the affine plane through a value cloud by principal directions.

    Returns the centroid, the top k_x+1 principal directions, and the
    maximal orthogonal distance of the cloud to the fitted plane.  When the
    cloud spans fewer than k_x+1 dimensions the fit is flagged degenerate
    and carries only the spanned directions.
    """
    values = cloud.values if isinstance(cloud, CriticalValueCloud) else np.asarray(cloud, dtype=float)
    if values.ndim != 2 or values.shape[0] < 2:
        raise DimensionError("plane fitting needs at least two cloud points")
    P = values.mean(axis=0)
    centered = values - P
    _, s, Vt = np.linalg.svd(centered, full_matrices=False)
    scale = max(float(s[0]), 1e-30)
    spanned = int(np.sum(s > span_tol * scale))
    d = min(k_x + 1, spanned)
    basis = Vt[:d].T
    proj = centered @ basis
    resid = centered - proj @ basis.T
    plane_residual = float(np.max(np.linalg.norm(resid, axis=1))) if values.size else 0.0
    return AffineFit(P, basis, plane_residual, spanned, spanned < k_x + 1)


def _rationalize_one(u: np.ndarray, qmax: int, tol: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    pivot = int(np.argmax(np.abs(u)))
    if u[pivot] == 0:
        raise NoIntegerDirection("zero direction vector")
    ratios = u / u[pivot]
    fracs = [Fraction(float(r)).limit_denominator(qmax) for r in ratios]
    lcm = 1
    for f in fracs:
        lcm = lcm * f.denominator // math.gcd(lcm, f.denominator)
    ints = np.array([int(f * lcm) for f in fracs], dtype=int)
    g = int(np.gcd.reduce(np.abs(ints[ints != 0]))) if np.any(ints) else 1
    v = ints // max(g, 1)
    first = v[np.flatnonzero(v)[0]]
    if first < 0:
        v = -v
    vn = v / np.linalg.norm(v)
    un = u / np.linalg.norm(u)
    sin_angle = float(np.linalg.norm(un - (un @ vn) * vn))
    if sin_angle > tol:
        raise NoIntegerDirection(
            f"no integer vector with denominators <= {qmax} within angle {tol:g} "
            f"(best miss {sin_angle:.3e})")
    return v


def rationalize_directions(fit: AffineFit, qmax: int = QMAX_DEFAULT,
                           tol: float = DIRECTION_TOL) -> list[np.ndarray]:
    """Primitive integer vectors spanning the fitted plane transverse to axis 1.

    The first value axis is projected out of the plane; each remaining
    principal direction is snapped to integers by continued fractions with
    denominators bounded by qmax, and accepted only if the angular error
    stays below tol.
    """
    n = fit.basis.shape[0]
    e1 = np.zeros(n)
    e1[0] = 1.0
    in_plane = fit.basis @ (fit.basis.T @ e1)
    stripped = fit.basis - np.outer(e1, e1 @ fit.basis)
    q, s, _ = np.linalg.svd(stripped, full_matrices=False)
    keep = int(np.sum(s > 1e-9 * max(float(s[0]), 1.0))) if s.size else 0
    expected = fit.basis.shape[1] - (1 if np.linalg.norm(in_plane) > 0.5 else 0)
    dirs = [q[:, i] for i in range(keep)]
    if keep != expected:
        raise NoIntegerDirection(
            f"transverse span has dimension {keep}, expected {expected}")
    return [_rationalize_one(u, qmax, tol) for u in dirs]


@dataclass
class NodalSurface:
    """A sampled nodal piece: base point, integer directions, graph samples."""

    wtype: WilliamsonType
    P: np.ndarray
    v: list[np.ndarray]
    t: np.ndarray              # (N, k_x) transverse parameters
    h: np.ndarray              # (N,) graph values along the first axis
    plane_residual: float
    graph_residual: float
    phase_points: list[tuple[str, np.ndarray]] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        n = self.P.size
        e1 = np.zeros(n)
        e1[0] = 1.0
        V = np.stack(self.v, axis=1) if self.v else np.zeros((n, 0))
        return self.P[None, :] + np.outer(self.h, e1) + self.t @ V.T

    def as_dict(self) -> dict:
        return {
            "type": str(self.wtype),
            "P": self.P.tolist(),
            "v": [vi.tolist() for vi in self.v],
            "samples": [{"t": list(ti), "h": float(hi)} for ti, hi in zip(self.t, self.h)],
            "plane_residual": self.plane_residual,
            "graph_residual": self.graph_residual,
        }


def extract_graph(values: np.ndarray, P: np.ndarray, v: list[np.ndarray],
                  delta_t: float = DELTA_T, tol: float = 1e-6):
    """Decompose values as P + h e_1 + sum t_j v_j and check single-valuedness.

    Returns (t, h, graph_residual); raises NotAGraph when two samples share
    transverse parameters (within delta_t) but disagree in h by more than tol.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[1]
    e1 = np.zeros(n)
    e1[0] = 1.0
    A = np.column_stack([e1] + [np.asarray(x, dtype=float) for x in v])
    coords, *_ = np.linalg.lstsq(A, (values - P).T, rcond=None)
    h = coords[0]
    t = coords[1:].T
    groups: dict[tuple, list[int]] = {}
    for i, ti in enumerate(t):
        key = tuple(np.round(ti / delta_t).astype(int))
        groups.setdefault(key, []).append(i)
    spread = 0.0
    for idx in groups.values():
        if len(idx) > 1:
            spread = max(spread, float(np.ptp(h[idx])))
    if spread > tol:
        raise NotAGraph(f"h-spread {spread:.3e} over shared parameters exceeds {tol:g}")
    return t, h, spread


# ---------------------------------------------------------------------------
# continuation


@dataclass
class TraceResult:
    values: np.ndarray
    points: list[tuple[str, np.ndarray]]
    parameters: np.ndarray
    pinned_component: int
    diagnostics: str = ""


def _correct(sys: MomentMapSystem, chart_id: str, p0: np.ndarray, rank: int,
             comp: int, target: float, tol: float = 1e-10, max_iter: int = 30):
    """Re-solve for a rank-`rank` critical point with component `comp` pinned."""
    p = np.asarray(p0, dtype=float).copy()
    n = sys.n
    for _ in range(max_iter):
        if not bool(np.all(sys.in_chart(chart_id, p))):
            return None
        J = sys.jacobian(chart_id, p)
        U, s, _ = np.linalg.svd(J)
        C = U[:, rank:]
        fval = sys.value(chart_id, p)[comp]
        res = np.concatenate([(C.T @ J).ravel(), [fval - target]])
        if np.linalg.norm(res) < tol:
            return p
        hess = sys.hessians(chart_id, p)
        G = np.concatenate([np.tensordot(C[:, k], hess, axes=(0, 0))
                            for k in range(n - rank)] + [J[comp][None, :]], axis=0)
        try:
            step, *_ = np.linalg.lstsq(G, -res, rcond=1e-10)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 1.0:
            step = step / max(np.linalg.norm(step), 1.0)
        p = p + step
    return None


def _switch_chart(sys: MomentMapSystem, chart_id: str, p: np.ndarray):
    """Move to a chart where the point is well inside the domain, if needed."""
    r = float(np.max(np.abs(p)))
    best = (chart_id, p, r)
    for cid in sys.chart_ids:
        if cid == chart_id:
            continue
        try:
            q = sys.transition(chart_id, cid, p)
        except Exception:
            continue
        rq = float(np.max(np.abs(q)))
        if rq < best[2] - 1e-9:
            best = (cid, q, rq)
    return best[0], best[1]


def trace_curve(sys: MomentMapSystem, seed: CriticalPoint, step: float = 0.05,
                max_steps: int = 40, tol: float = 1e-10) -> TraceResult:
    """Predictor-corrector continuation of a one-parameter nodal piece.

    The transverse component with the strongest differential at the seed is
    pinned and stepped by +-step; each step re-solves for the critical point.
    Stops at the domain boundary (corrector divergence) or after max_steps
    samples per direction.
    """
    w = seed.wtype
    if w is None or w.k_f != 1 or w.k_x != 1:
        raise DomainError(f"continuation needs a focus-focus-transverse seed, got {w}")
    J = sys.jacobian(seed.chart_id, seed.coords)
    comp = 1 + int(np.argmax(np.linalg.norm(J[1:], axis=1)))
    samples = []  # (tau, chart, point, value)

    def record(chart_id, p):
        val = sys.value(chart_id, p)
        samples.append((float(val[comp]), chart_id, p.copy(), val))

    record(seed.chart_id, np.asarray(seed.coords, dtype=float))
    diag = []
    for direction in (+1.0, -1.0):
        chart_id = seed.chart_id
        p = np.asarray(seed.coords, dtype=float).copy()
        prev = None
        tau = float(sys.value(chart_id, p)[comp])
        for _ in range(max_steps):
            tau += direction * step
            guess = p if prev is None else p + (p - prev)
            nxt = _correct(sys, chart_id, guess, w.k_x, comp, tau, tol)
            if nxt is None:
                chart2, moved = _switch_chart(sys, chart_id, p)
                if chart2 != chart_id:
                    nxt = _correct(sys, chart2, moved, w.k_x, comp, tau, tol)
                    if nxt is not None:
                        prev, p, chart_id = None, nxt, chart2
                        record(chart_id, nxt)
                        continue
                diag.append(f"corrector stopped at {comp}={tau:.4f} ({direction:+.0f})")
                break
            prev, p = p, nxt
            record(chart_id, nxt)
    samples.sort(key=lambda s: s[0])
    return TraceResult(
        values=np.array([s[3] for s in samples]),
        points=[(s[1], s[2]) for s in samples],
        parameters=np.array([s[0] for s in samples]),
        pinned_component=comp,
        diagnostics="; ".join(diag),
    )


# ---------------------------------------------------------------------------
# isolation


def isolation_verdict(surface: NodalSurface, candidate_values: np.ndarray,
                      radius: float, tol: float = 5e-3):
    """True iff every candidate value inside the tube lies on the surface.

    Distances are measured to the sampled surface; candidates farther than
    radius from it are outside the probed tube and ignored.
    """
    candidates = np.asarray(candidate_values, dtype=float).reshape(-1, surface.P.size)
    targets = surface.values
    witnesses = []
    for y in candidates:
        d = float(np.min(np.linalg.norm(targets - y, axis=1))) if targets.size else np.inf
        if d <= radius and d > surface.plane_residual + tol:
            witnesses.append({"value": y.tolist(), "distance": d})
    return len(witnesses) == 0, witnesses


def isolation_check(sys: MomentMapSystem, surface: NodalSurface, radius: float = 0.05,
                    tol: float = 5e-3, perturbations: int = 4,
                    scales=(0.04, 0.12), seed: int = 0):
    """Probe a value-space tube around the surface by preimage-guided sampling.

    Phase points underlying the surface samples are perturbed and re-refined;
    every recovered point of the surface type whose value lands inside the
    tube must lie on the surface.  Vacuously true when nothing is found.
    """
    rng = np.random.default_rng(seed)
    found = []
    for chart_id, p in surface.phase_points:
        for _ in range(perturbations):
            for scale in scales:
                q0 = p + rng.normal(scale=scale, size=p.size)
                box = [(c - 1.0, c + 1.0) for c in p]
                q = refine_candidate(sys, chart_id, q0, 1e-9, box, local_radius=1.0)
                if q is None:
                    continue
                cp = classify_point(sys, chart_id, q, seed=seed)
                if cp.wtype == surface.wtype:
                    found.append(cp.value)
    if not found:
        return True, [], 0
    ok, witnesses = isolation_verdict(surface, np.array(found), radius, tol)
    return ok, witnesses, len(found)


# ---------------------------------------------------------------------------
# pipeline


def extract_nodal_surface(sys: MomentMapSystem, strata: StratumMap, w: WilliamsonType,
                          trace_step: float = 0.05, trace_max_steps: int = 40,
                          qmax: int = QMAX_DEFAULT, direction_tol: float = DIRECTION_TOL,
                          graph_tol: float = 1e-6) -> NodalSurface:
    """Collect, trace, fit, rationalize and graph one nodal surface."""
    cloud = collect_values(strata, w)
    if cloud.size == 0:
        raise DomainError(f"no critical values of type {w} in the strata")
    phase_points: list[tuple[str, np.ndarray]] = [
        (p.chart_id, np.asarray(p.coords, dtype=float)) for p in cloud.witnesses]
    values = cloud.values
    if w.k_x == 1 and cloud.witnesses:
        mid = int(np.argmin(np.linalg.norm(cloud.values - cloud.values.mean(0), axis=1)))
        trace = trace_curve(sys, cloud.witnesses[mid], trace_step, trace_max_steps)
        values = np.vstack([values, trace.values])
        phase_points.extend(trace.points)
        keep = _dedup_rows(values, 1e-8)
        values = values[keep]
        phase_points = [phase_points[i] for i in keep]
    fit = fit_affine(values, w.k_x)
    v = rationalize_directions(fit, qmax, direction_tol)
    t, h, graph_residual = extract_graph(values, fit.P, v, tol=graph_tol)
    order = np.lexsort(t.T[::-1]) if t.size else np.arange(len(h))
    return NodalSurface(
        wtype=w, P=fit.P, v=v, t=t[order], h=h[order],
        plane_residual=fit.plane_residual, graph_residual=graph_residual,
        phase_points=[phase_points[i] for i in order],
    )


def _dedup_rows(values: np.ndarray, tol: float) -> list[int]:
    keep: list[int] = []
    for i, y in enumerate(values):
        if not any(np.max(np.abs(y - values[j])) < tol for j in keep):
            keep.append(i)
    return keep
