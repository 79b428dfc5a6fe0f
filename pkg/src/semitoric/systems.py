"""Catalog of concrete integrable systems used as numerical test beds.

Every system is a MomentMapSystem: n commuting component functions given
per chart with analytic values and Jacobians (vectorized over trailing
point batches), a per-chart symplectic form matrix, an embedding into an
ambient product space used for chart-independent point identity, and
involutive transitions between overlapping charts.

The unit sphere is covered by two stereographic charts.  Chart "n" is
centered at the north pole, chart "s" at the south pole; both use
coordinates (a, b) with

    x = 2a/(1+r^2),  y = eps*2b/(1+r^2),  z = eps*(1-r^2)/(1+r^2)

where eps = +1 on "n" and -1 on "s".  The transition (a, b) ->
(a, -b)/r^2 is an exact involution and both charts carry the same area
form 4/(1+r^2)^2 da^db (total area 4pi).

Catalog (addressable by name for the CLI and for scan workers):
    toric-oscillator:m   F_i = x_i^2 + xi_i^2 on R^(2m)
    spin-oscillator      S^2 x R^2, F = (H, J), J = z + (u^2+v^2)/2,
                         H = (x u + y v)/2; J generates the 2pi action
    ff-x-family:lambda   S^2 x R^2 x S^2, F = (H + lambda*z3^2, J, z3)
    model:ke,kf,kh,kx    the linear model of a Williamson type on R^(2n)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ChartError, DimensionError
from .localmodel import LinearModel
from .symplectic import SmoothHamiltonian, standard_form_matrix
from .williamson import WilliamsonType

SPHERE_CHART_RADIUS = 2.5  # chart domain bound in stereographic coordinates


# ---------------------------------------------------------------------------
# stereographic sphere helpers (vectorized over leading batch dimensions)


def sphere_embed(ab: np.ndarray, eps: int) -> np.ndarray:
    a, b = ab[..., 0], ab[..., 1]
    r2 = a * a + b * b
    d = 1.0 + r2
    return np.stack([2 * a / d, eps * 2 * b / d, eps * (1 - r2) / d], axis=-1)


def sphere_embed_jacobian(ab: np.ndarray, eps: int) -> np.ndarray:
    a, b = ab[..., 0], ab[..., 1]
    r2 = a * a + b * b
    d2 = (1.0 + r2) ** 2
    J = np.empty(ab.shape[:-1] + (3, 2))
    J[..., 0, 0] = 2 * (1 - a * a + b * b) / d2
    J[..., 0, 1] = -4 * a * b / d2
    J[..., 1, 0] = eps * (-4 * a * b) / d2
    J[..., 1, 1] = eps * 2 * (1 + a * a - b * b) / d2
    J[..., 2, 0] = eps * (-4 * a) / d2
    J[..., 2, 1] = eps * (-4 * b) / d2
    return J


def sphere_transition(ab: np.ndarray) -> np.ndarray:
    a, b = ab[..., 0], ab[..., 1]
    r2 = a * a + b * b
    return np.stack([a / r2, -b / r2], axis=-1)


def sphere_transition_jacobian(ab: np.ndarray) -> np.ndarray:
    a, b = ab[..., 0], ab[..., 1]
    r4 = (a * a + b * b) ** 2
    J = np.empty(ab.shape[:-1] + (2, 2))
    J[..., 0, 0] = (b * b - a * a) / r4
    J[..., 0, 1] = -2 * a * b / r4
    J[..., 1, 0] = 2 * a * b / r4
    J[..., 1, 1] = (b * b - a * a) / r4
    return J


def sphere_form_factor(ab: np.ndarray) -> np.ndarray:
    r2 = ab[..., 0] ** 2 + ab[..., 1] ** 2
    return 4.0 / (1.0 + r2) ** 2


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    chart_id: str
    dim: int
    box: tuple[tuple[float, float], ...]


class MomentMapSystem:
    """A concrete integrable system assembled from per-chart callables."""

    def __init__(self, name: str, n: int, charts: list[Chart],
                 value: dict[str, Callable], jacobian: dict[str, Callable],
                 form: dict[str, Callable], embed: dict[str, Callable],
                 in_chart: dict[str, Callable],
                 transitions: dict[tuple[str, str], Callable],
                 transition_jacobians: dict[tuple[str, str], Callable] | None = None,
                 default_step: float = 0.2,
                 periodic_components: tuple[int, ...] | None = None):
        self.name = name
        self.n = n
        self.charts = {c.chart_id: c for c in charts}
        self.chart_ids = tuple(c.chart_id for c in charts)
        self._value = value
        self._jacobian = jacobian
        self._form = form
        self._embed = embed
        self._in = in_chart
        self._transitions = transitions
        self._transition_jacobians = transition_jacobians or {}
        self.default_step = default_step
        # indices of the components generating 2pi-periodic flows
        self.periodic_components = periodic_components if periodic_components is not None \
            else tuple(range(1, n))

    # -- evaluation -------------------------------------------------------

    def _chart(self, chart_id: str) -> Chart:
        if chart_id not in self.charts:
            raise ChartError(f"{self.name} has no chart {chart_id!r}")
        return self.charts[chart_id]

    def _guard(self, chart_id: str, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self._chart(chart_id).dim:
            raise DimensionError(
                f"chart {chart_id!r} expects {self.charts[chart_id].dim} coordinates")
        if p.ndim == 1 and not bool(self._in[chart_id](p)):
            raise ChartError(f"point outside chart {chart_id!r} of {self.name}")
        return p

    def value(self, chart_id: str, p) -> np.ndarray:
        return self._value[chart_id](self._guard(chart_id, p))

    def jacobian(self, chart_id: str, p) -> np.ndarray:
        return self._jacobian[chart_id](self._guard(chart_id, p))

    def hessians(self, chart_id: str, p) -> np.ndarray:
        """Component Hessians by central differences of the analytic Jacobian."""
        p = self._guard(chart_id, p)
        d = p.size
        h = 1e-5 * (1.0 + float(np.max(np.abs(p))))
        steps = p[None, :] + h * np.eye(d)
        steps = np.concatenate([steps, p[None, :] - h * np.eye(d)], axis=0)
        J = self._jacobian[chart_id](steps)  # (2d, n, d)
        H = (J[:d] - J[d:]) / (2 * h)        # (d, n, d): dJ/dp_i
        H = np.moveaxis(H, 0, 2)             # (n, d, d)
        return 0.5 * (H + np.swapaxes(H, 1, 2))

    def form_matrix(self, chart_id: str, p) -> np.ndarray:
        return self._form[chart_id](self._guard(chart_id, p))

    def embed(self, chart_id: str, p) -> np.ndarray:
        return self._embed[chart_id](np.asarray(p, dtype=float))

    def in_chart(self, chart_id: str, p) -> np.ndarray:
        self._chart(chart_id)
        return self._in[chart_id](np.asarray(p, dtype=float))

    def transition(self, src: str, dst: str, p) -> np.ndarray:
        if src == dst:
            return np.asarray(p, dtype=float)
        key = (src, dst)
        if key not in self._transitions:
            raise ChartError(f"no transition {src!r} -> {dst!r} in {self.name}")
        return self._transitions[key](np.asarray(p, dtype=float))

    def transition_jacobian(self, src: str, dst: str, p) -> np.ndarray:
        if src == dst:
            return np.eye(self._chart(src).dim)
        key = (src, dst)
        if key not in self._transition_jacobians:
            raise ChartError(f"no transition Jacobian {src!r} -> {dst!r} in {self.name}")
        return self._transition_jacobians[key](np.asarray(p, dtype=float))

    # -- convenience ------------------------------------------------------

    def component(self, chart_id: str, i: int) -> SmoothHamiltonian:
        """Component i on a chart as a SmoothHamiltonian with analytic gradient."""
        def fn(p, s=self, c=chart_id, i=i):
            return float(s.value(c, p)[i])

        def grad(p, s=self, c=chart_id, i=i):
            return s.jacobian(c, p)[i]

        def hess(p, s=self, c=chart_id, i=i):
            return s.hessians(c, p)[i]

        return SmoothHamiltonian(fn=fn, grad=grad, hess=hess, name=f"{self.name}[{i}]")

    def default_region(self) -> dict[str, list[tuple[float, float]]]:
        return {cid: list(self.charts[cid].box) for cid in self.chart_ids}

    def bracket_residual(self, chart_id: str, p) -> float:
        """Largest pairwise Poisson bracket |{f_i, f_j}| at p on the chart."""
        p = self._guard(chart_id, p)
        J = self.jacobian(chart_id, p)
        W = self.form_matrix(chart_id, p)
        fields = np.linalg.solve(W, J.T)  # columns are the Hamiltonian fields
        brackets = fields.T @ W @ fields
        return float(np.max(np.abs(brackets)))


def chart_eval(sys: MomentMapSystem, chart_id: str, p) -> np.ndarray:
    return sys.value(chart_id, p)


def chart_eval_jacobian(sys: MomentMapSystem, chart_id: str, p) -> np.ndarray:
    return sys.jacobian(chart_id, p)


def chart_eval_hessians(sys: MomentMapSystem, chart_id: str, p) -> np.ndarray:
    return sys.hessians(chart_id, p)


# ---------------------------------------------------------------------------
# flat systems


def _flat_system(name: str, model: LinearModel, box_half: float, step: float) -> MomentMapSystem:
    n = model.n
    dim = 2 * n
    omega = standard_form_matrix(n)
    chart = Chart("flat", dim, tuple((-box_half, box_half) for _ in range(dim)))
    return MomentMapSystem(
        name=name, n=n, charts=[chart],
        value={"flat": model.values},
        jacobian={"flat": model.jacobian},
        form={"flat": lambda p: omega},
        embed={"flat": lambda p: p},
        in_chart={"flat": lambda p: np.ones(p.shape[:-1], dtype=bool) if p.ndim > 1 else True},
        transitions={},
        default_step=step,
    )


def toric_oscillator(m: int) -> MomentMapSystem:
    """F = (x_1^2+xi_1^2, ..., x_m^2+xi_m^2) on R^(2m): the toric baseline."""
    if m < 1:
        raise DimensionError("toric oscillator needs m >= 1")
    model = LinearModel(WilliamsonType(m, 0, 0, 0))
    sys = _flat_system(f"toric-oscillator:{m}", model, box_half=2.0, step=0.25)
    # every component generates a pi-periodic (hence 2pi-periodic) flow
    sys.periodic_components = tuple(range(m))
    return sys


def model_system(w: WilliamsonType) -> MomentMapSystem:
    """The linear model of a Williamson type as a scannable flat system."""
    model = LinearModel(w)
    name = f"model:{w.k_e},{w.k_f},{w.k_h},{w.k_x}"
    sys = _flat_system(name, model, box_half=1.0, step=0.5)
    # in the flat chart the transverse flows are translations; the flows
    # that close up after 2pi are the elliptic and q2 components
    sys.periodic_components = tuple(i for i, (kind, _) in enumerate(model.species)
                                    if kind in ("e", "q2"))
    return sys


# ---------------------------------------------------------------------------
# sphere-factor systems


def _sphere_in_chart(p):
    r2 = p[..., 0] ** 2 + p[..., 1] ** 2
    return r2 <= SPHERE_CHART_RADIUS**2


def spin_oscillator() -> MomentMapSystem:
    """The semi-toric system on S^2 x R^2 with one focus-focus point.

    F = (H, J) with J = z + (u^2+v^2)/2 generating the 2pi-periodic action
    and H = (x u + y v)/2.  The plane factor carries the form dv^du, which
    places the focus-focus point at (north pole) x (0, 0) and the doubly
    elliptic point at (south pole) x (0, 0); F there takes the values
    (0, 1) and (0, -1).
    """
    charts = [Chart("n", 4, ((-1.5, 1.5), (-1.5, 1.5), (-3.0, 3.0), (-3.0, 3.0))),
              Chart("s", 4, ((-1.5, 1.5), (-1.5, 1.5), (-3.0, 3.0), (-3.0, 3.0)))]

    def make_value(eps):
        def value(p):
            ab, u, v = p[..., :2], p[..., 2], p[..., 3]
            xyz = sphere_embed(ab, eps)
            H = 0.5 * (xyz[..., 0] * u + xyz[..., 1] * v)
            J = xyz[..., 2] + 0.5 * (u * u + v * v)
            return np.stack([H, J], axis=-1)
        return value

    def make_jacobian(eps):
        def jac(p):
            ab, u, v = p[..., :2], p[..., 2], p[..., 3]
            xyz = sphere_embed(ab, eps)
            dxyz = sphere_embed_jacobian(ab, eps)
            J = np.zeros(p.shape[:-1] + (2, 4))
            J[..., 0, 0] = 0.5 * (u * dxyz[..., 0, 0] + v * dxyz[..., 1, 0])
            J[..., 0, 1] = 0.5 * (u * dxyz[..., 0, 1] + v * dxyz[..., 1, 1])
            J[..., 0, 2] = 0.5 * xyz[..., 0]
            J[..., 0, 3] = 0.5 * xyz[..., 1]
            J[..., 1, 0] = dxyz[..., 2, 0]
            J[..., 1, 1] = dxyz[..., 2, 1]
            J[..., 1, 2] = u
            J[..., 1, 3] = v
            return J
        return jac

    def form(p):
        rho = sphere_form_factor(p[..., :2])
        W = np.zeros((4, 4))
        W[0, 1], W[1, 0] = rho, -rho
        W[2, 3], W[3, 2] = -1.0, 1.0  # plane block dv^du
        return W

    def make_embed(eps):
        def embed(p):
            return np.concatenate([sphere_embed(p[..., :2], eps), p[..., 2:]], axis=-1)
        return embed

    def trans(p):
        return np.concatenate([sphere_transition(p[..., :2]), p[..., 2:]], axis=-1)

    def trans_jac(p):
        J = np.eye(4)
        J[:2, :2] = sphere_transition_jacobian(p[:2])
        return J

    return MomentMapSystem(
        name="spin-oscillator", n=2, charts=charts,
        value={"n": make_value(+1), "s": make_value(-1)},
        jacobian={"n": make_jacobian(+1), "s": make_jacobian(-1)},
        form={"n": form, "s": form},
        embed={"n": make_embed(+1), "s": make_embed(-1)},
        in_chart={"n": _sphere_in_chart, "s": _sphere_in_chart},
        transitions={("n", "s"): trans, ("s", "n"): trans},
        transition_jacobians={("n", "s"): trans_jac, ("s", "n"): trans_jac},
        default_step=0.2,
    )


def height_sphere() -> MomentMapSystem:
    """The height function on the unit sphere: F = (z), a one-degree toric system."""
    charts = [Chart("n", 2, ((-1.2, 1.2), (-1.2, 1.2))),
              Chart("s", 2, ((-1.2, 1.2), (-1.2, 1.2)))]

    def make_value(eps):
        def value(p):
            return sphere_embed(p, eps)[..., 2:3]
        return value

    def make_jacobian(eps):
        def jac(p):
            return sphere_embed_jacobian(p, eps)[..., 2:3, :]
        return jac

    def form(p):
        rho = float(sphere_form_factor(p[:2]))
        return np.array([[0.0, rho], [-rho, 0.0]])

    def make_embed(eps):
        def embed(p):
            return sphere_embed(p, eps)
        return embed

    sys = MomentMapSystem(
        name="height-sphere", n=1, charts=charts,
        value={"n": make_value(+1), "s": make_value(-1)},
        jacobian={"n": make_jacobian(+1), "s": make_jacobian(-1)},
        form={"n": form, "s": form},
        embed={"n": make_embed(+1), "s": make_embed(-1)},
        in_chart={"n": _sphere_in_chart, "s": _sphere_in_chart},
        transitions={("n", "s"): sphere_transition, ("s", "n"): sphere_transition},
        transition_jacobians={("n", "s"): lambda p: sphere_transition_jacobian(p),
                              ("s", "n"): lambda p: sphere_transition_jacobian(p)},
        default_step=0.5,
    )
    sys.periodic_components = (0,)
    return sys


# ---------------------------------------------------------------------------
# products and recombination


def product_system(a: MomentMapSystem, b: MomentMapSystem, name: str | None = None,
                   default_step: float | None = None) -> MomentMapSystem:
    """Direct product: components concatenated, charts and forms paired."""
    name = name or f"{a.name}*{b.name}"
    charts = []
    value, jacobian, form, embed, in_chart = {}, {}, {}, {}, {}
    transitions, tjac = {}, {}
    da = {cid: a.charts[cid].dim for cid in a.chart_ids}

    for ca in a.chart_ids:
        for cb in b.chart_ids:
            cid = f"{ca}*{cb}"
            charts.append(Chart(cid, a.charts[ca].dim + b.charts[cb].dim,
                                a.charts[ca].box + b.charts[cb].box))

            def make(ca=ca, cb=cb):
                cut = da[ca]

                def val(p):
                    return np.concatenate([a._value[ca](p[..., :cut]),
                                           b._value[cb](p[..., cut:])], axis=-1)

                def jac(p):
                    Ja = a._jacobian[ca](p[..., :cut])
                    Jb = b._jacobian[cb](p[..., cut:])
                    out = np.zeros(p.shape[:-1] + (a.n + b.n, p.shape[-1]))
                    out[..., :a.n, :cut] = Ja
                    out[..., a.n:, cut:] = Jb
                    return out

                def frm(p):
                    Wa = a._form[ca](p[:cut])
                    Wb = b._form[cb](p[cut:])
                    W = np.zeros((cut + Wb.shape[0], cut + Wb.shape[0]))
                    W[:cut, :cut] = Wa
                    W[cut:, cut:] = Wb
                    return W

                def emb(p):
                    return np.concatenate([a._embed[ca](p[..., :cut]),
                                           b._embed[cb](p[..., cut:])], axis=-1)

                def inc(p):
                    ra = a._in[ca](p[..., :cut])
                    rb = b._in[cb](p[..., cut:])
                    return np.logical_and(ra, rb)

                return val, jac, frm, emb, inc

            value[cid], jacobian[cid], form[cid], embed[cid], in_chart[cid] = make()

    for ca in a.chart_ids:
        for cb in b.chart_ids:
            for ca2 in a.chart_ids:
                for cb2 in b.chart_ids:
                    if (ca, cb) == (ca2, cb2):
                        continue
                    if ca != ca2 and (ca, ca2) not in a._transitions:
                        continue
                    if cb != cb2 and (cb, cb2) not in b._transitions:
                        continue

                    def make_t(ca=ca, cb=cb, ca2=ca2, cb2=cb2):
                        cut = da[ca]

                        def t(p):
                            pa = p[..., :cut] if ca == ca2 else a._transitions[(ca, ca2)](p[..., :cut])
                            pb = p[..., cut:] if cb == cb2 else b._transitions[(cb, cb2)](p[..., cut:])
                            return np.concatenate([pa, pb], axis=-1)

                        def tj(p):
                            J = np.eye(p.shape[-1])
                            if ca != ca2:
                                J[:cut, :cut] = a._transition_jacobians[(ca, ca2)](p[:cut])
                            if cb != cb2:
                                J[cut:, cut:] = b._transition_jacobians[(cb, cb2)](p[cut:])
                            return J

                        return t, tj

                    key = (f"{ca}*{cb}", f"{ca2}*{cb2}")
                    transitions[key], tjac[key] = make_t()

    sys = MomentMapSystem(
        name=name, n=a.n + b.n, charts=charts,
        value=value, jacobian=jacobian, form=form, embed=embed, in_chart=in_chart,
        transitions=transitions, transition_jacobians=tjac,
        default_step=default_step or max(a.default_step, b.default_step),
    )
    sys.periodic_components = tuple(a.periodic_components) + \
        tuple(a.n + i for i in b.periodic_components)
    return sys


def recombine_first(sys: MomentMapSystem, g: Callable, dg: Callable,
                    name: str | None = None) -> MomentMapSystem:
    """Replace f_1 by f_1 + g(values); dg returns the n partials of g."""
    value, jacobian = {}, {}
    for cid in sys.chart_ids:
        def make(cid=cid):
            base_v, base_j = sys._value[cid], sys._jacobian[cid]

            def val(p):
                v = base_v(p).copy()
                v[..., 0] += g(v)
                return v

            def jac(p):
                v = base_v(p)
                J = base_j(p).copy()
                w = dg(v)  # (..., n) partials of g in the component values
                J[..., 0, :] += np.einsum("...j,...jk->...k", w, J)
                return J

            return val, jac

        value[cid], jacobian[cid] = make()

    out = MomentMapSystem(
        name=name or sys.name, n=sys.n, charts=list(sys.charts.values()),
        value=value, jacobian=jacobian, form=sys._form, embed=sys._embed,
        in_chart=sys._in, transitions=sys._transitions,
        transition_jacobians=sys._transition_jacobians,
        default_step=sys.default_step,
    )
    out.periodic_components = tuple(i for i in sys.periodic_components if i != 0)
    return out


def ff_x_family(lam: float) -> MomentMapSystem:
    """S^2 x R^2 x S^2 with F = (H + lambda*z3^2, J, z3).

    The focus-focus-transverse critical points occupy {FF point} x {z3 in
    (-1, 1)}; their values trace the curve (lambda*t^2, 1, t), a nonlinear
    graph whenever lambda != 0.  The poles of the third factor over the FF
    point are rank-0 points of type (1,1,0,0).
    """
    base = product_system(spin_oscillator(), height_sphere(),
                          name=f"ff-x-family:{lam:g}", default_step=0.5)

    def g(v):
        return lam * v[..., 2] ** 2

    def dg(v):
        w = np.zeros_like(v)
        w[..., 2] = 2.0 * lam * v[..., 2]
        return w

    sys = recombine_first(base, g, dg, name=base.name)
    # tighter default boxes keep the 6-dimensional scan tractable
    charts = []
    for cid in sys.chart_ids:
        box = ((-1.2, 1.2), (-1.2, 1.2), (-2.0, 2.0), (-2.0, 2.0), (-1.2, 1.2), (-1.2, 1.2))
        charts.append(Chart(cid, 6, box))
    sys.charts = {c.chart_id: c for c in charts}
    sys.default_step = 0.5
    return sys


# ---------------------------------------------------------------------------


def make_system(name: str) -> MomentMapSystem:
    """Resolve a catalog name string to a system instance."""
    if name == "spin-oscillator":
        return spin_oscillator()
    if name == "height-sphere":
        return height_sphere()
    if name.startswith("toric-oscillator:"):
        return toric_oscillator(int(name.split(":", 1)[1]))
    if name.startswith("ff-x-family:"):
        return ff_x_family(float(name.split(":", 1)[1]))
    if name.startswith("model:"):
        counts = [int(s) for s in name.split(":", 1)[1].split(",")]
        if len(counts) != 4:
            raise DimensionError("model systems need four counts ke,kf,kh,kx")
        return model_system(WilliamsonType(*counts))
    raise ChartError(f"unknown system {name!r}")
