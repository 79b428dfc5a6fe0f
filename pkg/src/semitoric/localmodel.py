"""Linear local models of non-degenerate critical points and their flows.

For a type (k_e, k_f, k_h, k_x) the model moment map on R^(2n) lists, in
order, the elliptic components e_i = x_i^2 + xi_i^2, the hyperbolic
components h_i = x_i*xi_i, the focus-focus pairs (q1, q2) with
q1 = x_a*xi_a + x_b*xi_b and q2 = x_a*xi_b - x_b*xi_a on consecutive
coordinate pairs (a, b), and the transverse momenta xi_j.

Coordinate allocation: elliptic blocks first, then hyperbolic, then two
coordinates per focus-focus pair, then the transverse block.  For the
semi-toric models (k_f = 1, k_h = 0) the complex variables are
z1 = x_a + i*x_b, z2 = xi_a + i*xi_b on the focus-focus pair,
z_e = x + i*xi on each elliptic block, and the transverse block carries
angle/action coordinates (theta, I) = (x, xi).

Closed-form flows under the package calibration:
    q2:   (z1, z2) -> (e^(it) z1, e^(it) z2)        2pi-periodic
    q1:   (z1, z2) -> (e^t z1, e^(-t) z2)
    e:    z_e -> e^(-2it) z_e                        period pi
    xi_j: theta_j -> theta_j + t
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .symplectic import QuadraticHamiltonian, SmoothHamiltonian
from .williamson import CartanCandidate, WilliamsonType


@dataclass(frozen=True)
class LinearModel:
    """The model moment map Q of a Williamson type, evaluable on R^(2n)."""

    wtype: WilliamsonType
    species: tuple[tuple[str, int], ...] = field(init=False)

    def __post_init__(self):
        w = self.wtype
        comps: list[tuple[str, int]] = []
        comps += [("e", i) for i in range(w.k_e)]
        comps += [("h", w.k_e + i) for i in range(w.k_h)]
        for j in range(w.k_f):
            base = w.k_e + w.k_h + 2 * j
            comps += [("q1", base), ("q2", base)]
        comps += [("xi", w.n - w.k_x + i) for i in range(w.k_x)]
        object.__setattr__(self, "species", tuple(comps))

    @property
    def n(self) -> int:
        return self.wtype.n

    def values(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != 2 * self.n:
            raise DimensionError(f"model expects {2*self.n} coordinates, got {p.shape[-1]}")
        x, xi = p[..., : self.n], p[..., self.n:]
        out = np.empty(p.shape[:-1] + (self.n,))
        for k, (kind, i) in enumerate(self.species):
            if kind == "e":
                out[..., k] = x[..., i] ** 2 + xi[..., i] ** 2
            elif kind == "h":
                out[..., k] = x[..., i] * xi[..., i]
            elif kind == "q1":
                out[..., k] = x[..., i] * xi[..., i] + x[..., i + 1] * xi[..., i + 1]
            elif kind == "q2":
                out[..., k] = x[..., i] * xi[..., i + 1] - x[..., i + 1] * xi[..., i]
            else:
                out[..., k] = xi[..., i]
        return out

    def jacobian(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        n = self.n
        x, xi = p[..., :n], p[..., n:]
        J = np.zeros(p.shape[:-1] + (n, 2 * n))
        for k, (kind, i) in enumerate(self.species):
            if kind == "e":
                J[..., k, i] = 2 * x[..., i]
                J[..., k, n + i] = 2 * xi[..., i]
            elif kind == "h":
                J[..., k, i] = xi[..., i]
                J[..., k, n + i] = x[..., i]
            elif kind == "q1":
                J[..., k, i] = xi[..., i]
                J[..., k, i + 1] = xi[..., i + 1]
                J[..., k, n + i] = x[..., i]
                J[..., k, n + i + 1] = x[..., i + 1]
            elif kind == "q2":
                J[..., k, i] = xi[..., i + 1]
                J[..., k, i + 1] = -xi[..., i]
                J[..., k, n + i] = -x[..., i + 1]
                J[..., k, n + i + 1] = x[..., i]
            else:
                J[..., k, n + i] = 1.0
        return J

    def quadratic(self, k: int) -> QuadraticHamiltonian | None:
        """The S-matrix of component k, or None for the linear xi components."""
        n = self.n
        kind, i = self.species[k]
        S = np.zeros((2 * n, 2 * n))
        if kind == "e":
            S[i, i] = S[n + i, n + i] = 1.0
        elif kind == "h":
            S[i, n + i] = S[n + i, i] = 0.5
        elif kind == "q1":
            S[i, n + i] = S[n + i, i] = 0.5
            S[i + 1, n + i + 1] = S[n + i + 1, i + 1] = 0.5
        elif kind == "q2":
            S[i, n + i + 1] = S[n + i + 1, i] = 0.5
            S[i + 1, n + i] = S[n + i, i + 1] = -0.5
        else:
            return None
        return QuadraticHamiltonian(S)

    def component(self, k: int) -> SmoothHamiltonian:
        """Component k with analytic gradient and Hessian oracles."""
        n = self.n
        quad = self.quadratic(k)
        kind, i = self.species[k]
        if quad is not None:
            return quad.as_smooth(name=f"{kind}{i}")
        grad_vec = np.zeros(2 * n)
        grad_vec[n + i] = 1.0
        return SmoothHamiltonian(
            fn=lambda p, i=i, n=n: float(p[n + i]),
            grad=lambda p, g=grad_vec: g.copy(),
            hess=lambda p, n=n: np.zeros((2 * n, 2 * n)),
            name=f"xi{i}",
        )

    def components(self) -> list[SmoothHamiltonian]:
        return [self.component(k) for k in range(self.n)]


def build_model(w: WilliamsonType) -> LinearModel:
    return LinearModel(w)


def eval_model(m: LinearModel, p) -> np.ndarray:
    return m.values(p)


@dataclass
class ModelPoint:
    """A point of the semi-toric model (k_f = 1, k_h = 0).

    z1, z2 are the focus-focus complex variables, ze the elliptic ones,
    (theta, I) the transverse angle/action block.  Angles are reduced
    modulo 2pi on construction.
    """

    z1: complex
    z2: complex
    ze: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    I: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.z1 = complex(self.z1)
        self.z2 = complex(self.z2)
        self.ze = np.asarray(self.ze, dtype=complex).ravel()
        self.theta = np.mod(np.asarray(self.theta, dtype=float).ravel(), 2 * math.pi)
        self.I = np.asarray(self.I, dtype=float).ravel()
        if self.theta.size != self.I.size:
            raise DimensionError("theta and I must have the same length")

    @property
    def k_e(self) -> int:
        return self.ze.size

    @property
    def k_x(self) -> int:
        return self.theta.size

    @property
    def wtype(self) -> WilliamsonType:
        return WilliamsonType(self.k_e, 1, 0, self.k_x)

    def to_phase(self) -> np.ndarray:
        """Flatten into the (x, xi) layout of the matching LinearModel."""
        n = self.k_e + 2 + self.k_x
        p = np.zeros(2 * n)
        ke = self.k_e
        p[:ke] = self.ze.real
        p[n:n + ke] = self.ze.imag
        p[ke] = self.z1.real
        p[ke + 1] = self.z1.imag
        p[n + ke] = self.z2.real
        p[n + ke + 1] = self.z2.imag
        p[ke + 2:n] = self.theta
        p[n + ke + 2:] = self.I
        return p

    @classmethod
    def from_phase(cls, p, k_e: int, k_x: int) -> "ModelPoint":
        p = np.asarray(p, dtype=float).ravel()
        n = k_e + 2 + k_x
        if p.size != 2 * n:
            raise DimensionError(f"expected {2*n} coordinates, got {p.size}")
        ze = p[:k_e] + 1j * p[n:n + k_e]
        z1 = complex(p[k_e], p[k_e + 1])
        z2 = complex(p[n + k_e], p[n + k_e + 1])
        return cls(z1, z2, ze, p[k_e + 2:n], p[n + k_e + 2:])

    def copy(self) -> "ModelPoint":
        return ModelPoint(self.z1, self.z2, self.ze.copy(), self.theta.copy(), self.I.copy())

    def model_values(self) -> np.ndarray:
        """(q1, q2, Q_e..., I...) of the model evaluated at this point."""
        qf = np.conj(self.z1) * self.z2
        return np.concatenate([[qf.real, qf.imag], np.abs(self.ze) ** 2, self.I])

    def distance(self, other: "ModelPoint") -> float:
        """Sup distance, measuring angles on the circle."""
        d = max(abs(self.z1 - other.z1), abs(self.z2 - other.z2))
        if self.ze.size:
            d = max(d, float(np.max(np.abs(self.ze - other.ze))))
        if self.theta.size:
            dth = np.abs(np.exp(1j * self.theta) - np.exp(1j * other.theta))
            d = max(d, float(np.max(dth)), float(np.max(np.abs(self.I - other.I))))
        return d


def flow_closed_form(species: str, p: ModelPoint, t: float) -> ModelPoint:
    """Exact flow of one model component for time t.

    species: "q1", "q2", "e<j>" or "xi<j>" with 1-based block index j.
    """
    out = p.copy()
    if species == "q1":
        out.z1 = p.z1 * math.exp(t)
        out.z2 = p.z2 * math.exp(-t)
    elif species == "q2":
        rot = cmath.exp(1j * t)
        out.z1 = p.z1 * rot
        out.z2 = p.z2 * rot
    elif species.startswith("e"):
        j = int(species[1:]) - 1
        if not 0 <= j < p.k_e:
            raise DimensionError(f"no elliptic block {species}")
        out.ze = p.ze.copy()
        out.ze[j] = p.ze[j] * cmath.exp(-2j * t)
    elif species.startswith("xi"):
        j = int(species[2:]) - 1
        if not 0 <= j < p.k_x:
            raise DimensionError(f"no transverse block {species}")
        theta = p.theta.copy()
        theta[j] = theta[j] + t
        out.theta = np.mod(theta, 2 * math.pi)
    else:
        raise DimensionError(f"unknown species {species!r}")
    return out


def joint_flow(c: complex, delta: complex, theta=(), I=()) -> tuple[float, float, ModelPoint]:
    """Joint q1/q2 flow normalization on the focus-focus block.

    Starting from (z1, z2) = (c, conj(delta)), the q2 flow for time
    t = arg(delta) - arg(c) followed by the q1 flow for time s = ln|delta/c|
    lands on (delta, conj(c)); theta and I ride along unchanged.  Returns
    (s, t, end point).
    """
    c = complex(c)
    delta = complex(delta)
    if c == 0 or delta == 0:
        raise DomainError("joint flow times are undefined for c = 0 or delta = 0")
    s = math.log(abs(delta / c))
    t = cmath.phase(delta) - cmath.phase(c)
    start = ModelPoint(c, np.conj(delta), np.zeros(0), theta, I)
    end = flow_closed_form("q1", flow_closed_form("q2", start, t), s)
    return s, t, end


def random_symplectic(m: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Random symplectic matrix exp(Omega^(-1) S) with S symmetric."""
    from .symplectic import standard_form_matrix
    from scipy.linalg import expm

    A = rng.normal(size=(2 * m, 2 * m), scale=scale)
    S = 0.5 * (A + A.T)
    ham = np.linalg.solve(standard_form_matrix(m), S)
    return expm(ham)


def planted_candidate(w: WilliamsonType, rng: np.random.Generator,
                      conjugate: bool = True, recombine: bool = False,
                      max_cond: float = 1e3, tolerance: float = 1e-8,
                      ) -> CartanCandidate:
    """Build the commuting Hessian family of a planted type.

    Takes the reduced model (k_x = 0) quadratics of `w`, optionally
    conjugates them by a random symplectic matrix with condition number
    below max_cond, and optionally recombines the list by a random
    invertible matrix.  The construction is its own classification oracle.
    """
    reduced = WilliamsonType(w.k_e, w.k_f, w.k_h, 0)
    model = LinearModel(reduced)
    mats = [model.quadratic(k).S for k in range(reduced.n)]
    if conjugate:
        while True:
            T = random_symplectic(reduced.n, rng)
            sv = np.linalg.svd(T, compute_uv=False)
            if sv[0] / sv[-1] <= max_cond:
                break
        mats = [T.T @ S @ T for S in mats]
    if recombine:
        while True:
            R = rng.normal(size=(len(mats), len(mats)))
            if abs(np.linalg.det(R)) > 0.1:
                break
        mats = [sum(R[i, j] * mats[j] for j in range(len(mats))) for i in range(len(mats))]
    return CartanCandidate([QuadraticHamiltonian(S) for S in mats], tolerance=tolerance)
