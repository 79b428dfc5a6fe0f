"""Model symplectomorphisms and transition-function structure verifiers.

A symplectomorphism preserving the fibers of a semi-toric model (k_f = 1,
k_h = 0) induces a diffeomorphism B of value space, written in the
coordinate order (q1, q2, q_e_1..q_e_ke, I_1..I_kx).  Its Jacobian has a
constrained shape: the first column vanishes below the first row, and the
lower-right (n-1)x(n-1) block A is an integer unimodular matrix.  On the
critical value set the structure tightens further: A splits into sign
blocks (F^f = +-1, E^e diagonal of signs, zero couplings) over an integer
lower stripe (X^f | X^e | X^x) with X^x unimodular, and the residual part
of the first row is flat.

Two families of model symplectomorphisms realize the lower stripe:

* phase_twist: rotates the fiber variables by angles linear in theta and
  compensates the actions, leaving q1, q2 and the elliptic values fixed;
* frame_change: flips the focus-focus orientation pair by the explicit
  4x4 sign matrices and reparameterizes the torus block by a unimodular
  matrix.

Both are exactly symplectic for the package conventions; their analytic
Jacobians are provided so block recovery is not limited by finite
differences.  Note the elliptic phase factor of phase_twist is the
time-(-beta) flow of e = x^2 + xi^2, i.e. multiplication by e^(+2i*beta);
a unit-speed phase with the same action shift would break symplecticity
under this normalization (the elliptic period here is pi, not 2pi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainError
from .localmodel import LinearModel, ModelPoint
from .reporting import CheckRecord
from .williamson import WilliamsonType

INTEGER_SNAP_TOL = 1e-6  # default threshold for "entry is an integer"


def _require_semitoric(w: WilliamsonType):
    if w.k_f != 1 or w.k_h != 0:
        raise DimensionError(f"semi-toric model operations need k_f = 1, k_h = 0, got {w}")


def spade_order(w: WilliamsonType) -> list[int]:
    """Permutation taking the model component order to (q1, q2, q_e..., I...)."""
    ke = w.k_e
    return [ke, ke + 1] + list(range(ke)) + list(range(ke + 2, w.n))


def model_value(w: WilliamsonType, p: np.ndarray) -> np.ndarray:
    """Model moment map at a phase point, in (q1, q2, q_e..., I...) order."""
    _require_semitoric(w)
    return LinearModel(w).values(p)[..., spade_order(w)]


def model_value_jacobian(w: WilliamsonType, p: np.ndarray) -> np.ndarray:
    _require_semitoric(w)
    return LinearModel(w).jacobian(p)[..., spade_order(w), :]


# ---------------------------------------------------------------------------
# model symplectomorphisms


@dataclass(frozen=True)
class TransitionSigns:
    """Orientation data: focus-focus signs and one sign per elliptic block."""

    eps_f1: int = 1
    eps_f2: int = 1
    eps_e: tuple[int, ...] = ()

    def __post_init__(self):
        for s in (self.eps_f1, self.eps_f2, *self.eps_e):
            if s not in (-1, 1):
                raise DomainError(f"signs must be +-1, got {s}")


def ff_flip_matrix(eps_f1: int, eps_f2: int) -> np.ndarray:
    """The 4x4 orientation matrix on the interleaved tuple (x1, xi1, x2, xi2)."""
    e1, e2 = eps_f1, eps_f2
    E1 = 0.5 * np.array([
        [1 + e1, 1 - e1, 0, 0],
        [-1 + e1, 1 + e1, 0, 0],
        [0, 0, 1 + e1, 1 - e1],
        [0, 0, -1 + e1, 1 + e1],
    ])
    E2 = 0.5 * np.array([
        [1 + e2, 0, 1 - e2, 0],
        [0, 1 + e2, 0, 1 - e2],
        [1 - e2, 0, 1 + e2, 0],
        [0, 1 - e2, 0, 1 + e2],
    ])
    return E1 @ E2


def _check_blocks(w: WilliamsonType, Xf, Xe, Xx=None):
    _require_semitoric(w)
    Xf = np.asarray(Xf, dtype=float).reshape(w.k_x) if w.k_x else np.zeros(0)
    Xe = np.asarray(Xe, dtype=float).reshape(w.k_x, w.k_e) if (w.k_x and w.k_e) \
        else np.zeros((w.k_x, w.k_e))
    if np.any(Xf != np.round(Xf)) or np.any(Xe != np.round(Xe)):
        raise DomainError("phase twist blocks must be integer")
    if Xx is None:
        return Xf, Xe
    Xx = np.asarray(Xx, dtype=float).reshape(w.k_x, w.k_x) if w.k_x else np.zeros((0, 0))
    if np.any(Xx != np.round(Xx)):
        raise DomainError("torus block must be integer")
    if w.k_x and abs(round(np.linalg.det(Xx))) != 1:
        raise DomainError("torus block must be unimodular")
    return Xf, Xe, Xx


def phase_twist(Xf, Xe, p: ModelPoint) -> ModelPoint:
    """Theta-dependent fiber phase rotation with compensating action shift.

    z1, z2 pick up the common phase e^(-i <theta, Xf>), the elliptic
    variables the phases of the time-(-theta.Xe) elliptic flows, theta is
    unchanged and I shifts by Q_e . Xe^T + q2 . Xf^T.  Pullbacks: q1, q2
    and the elliptic values are preserved exactly.
    """
    w = p.wtype
    Xf, Xe = _check_blocks(w, Xf, Xe)
    alpha = float(p.theta @ Xf)
    beta = p.theta @ Xe
    out = p.copy()
    out.z1 = p.z1 * np.exp(-1j * alpha)
    out.z2 = p.z2 * np.exp(-1j * alpha)
    out.ze = p.ze * np.exp(2j * beta)
    q2 = float((np.conj(p.z1) * p.z2).imag)
    qe = np.abs(p.ze) ** 2
    out.I = p.I + qe @ Xe.T + q2 * Xf
    return out


def phase_twist_jacobian(Xf, Xe, p: ModelPoint) -> np.ndarray:
    """Analytic Jacobian of phase_twist at p, in the phase layout."""
    w = p.wtype
    Xf, Xe = _check_blocks(w, Xf, Xe)
    ke, kx, n = w.k_e, w.k_x, w.n
    alpha = float(p.theta @ Xf)
    beta = p.theta @ Xe
    J = np.zeros((2 * n, 2 * n))

    def rot(phi):
        c, s = np.cos(phi), np.sin(phi)
        return np.array([[c, -s], [s, c]])

    def drot(phi):
        c, s = np.cos(phi), np.sin(phi)
        return np.array([[-s, -c], [c, -s]])

    ix = {"f1": ke, "f2": ke + 1}
    for l in range(ke):
        pair = np.array([p.ze[l].real, p.ze[l].imag])
        R, dR = rot(2 * beta[l]), drot(2 * beta[l])
        for (a, b), M in (((l, l), R),):
            J[a, b] = M[0, 0]
            J[a, n + b] = M[0, 1]
            J[n + a, b] = M[1, 0]
            J[n + a, n + b] = M[1, 1]
        dv = dR @ pair
        for j in range(kx):
            J[l, ke + 2 + j] = 2 * Xe[j, l] * dv[0]
            J[n + l, ke + 2 + j] = 2 * Xe[j, l] * dv[1]

    # focus-focus pairs rotate by -alpha in (x1, x2) and (xi1, xi2)
    Rf, dRf = rot(-alpha), drot(-alpha)
    for base in (ix["f1"], n + ix["f1"]):
        J[base:base + 2, base:base + 2] = Rf
    z1v = np.array([p.z1.real, p.z1.imag])
    z2v = np.array([p.z2.real, p.z2.imag])
    for j in range(kx):
        J[ix["f1"]:ix["f1"] + 2, ke + 2 + j] = -Xf[j] * (dRf @ z1v)
        J[n + ix["f1"]:n + ix["f1"] + 2, ke + 2 + j] = -Xf[j] * (dRf @ z2v)

    for j in range(kx):
        J[ke + 2 + j, ke + 2 + j] = 1.0  # theta rows
        row = n + ke + 2 + j
        J[row, row] = 1.0
        for l in range(ke):
            J[row, l] = 2 * p.ze[l].real * Xe[j, l]
            J[row, n + l] = 2 * p.ze[l].imag * Xe[j, l]
        # dq2 in (x_f1, x_f2, xi_f1, xi_f2)
        J[row, ix["f1"]] = Xf[j] * p.z2.imag
        J[row, ix["f2"]] = -Xf[j] * p.z2.real
        J[row, n + ix["f1"]] = -Xf[j] * p.z1.imag
        J[row, n + ix["f2"]] = Xf[j] * p.z1.real
    return J


def frame_change_matrix(signs: TransitionSigns, Xx, w: WilliamsonType) -> np.ndarray:
    """Linear map: focus-focus orientation flip plus torus reparameterization.

    theta -> (Xx^-1)^T theta and I -> Xx I (column convention), matching the
    row-vector actions theta.(Xx^-1) and I.Xx^T.
    """
    _, _, Xx = _check_blocks(w, np.zeros(w.k_x), np.zeros((w.k_x, w.k_e)), Xx)
    if len(signs.eps_e) not in (0, w.k_e):
        raise DimensionError("eps_e length must match k_e")
    n, ke, kx = w.n, w.k_e, w.k_x
    M = np.eye(2 * n)
    E = ff_flip_matrix(signs.eps_f1, signs.eps_f2)
    # interleaved (x1, xi1, x2, xi2) lives at phase indices (a, n+a, a+1, n+a+1)
    idx = [ke, n + ke, ke + 1, n + ke + 1]
    for r, ir in enumerate(idx):
        for c, ic in enumerate(idx):
            M[ir, ic] = E[r, c]
    if kx:
        th = slice(ke + 2, n)
        ac = slice(n + ke + 2, 2 * n)
        M[th, th] = np.linalg.inv(Xx).T
        M[ac, ac] = Xx
    return M


def frame_change(signs: TransitionSigns, Xx, p: ModelPoint) -> ModelPoint:
    w = p.wtype
    M = frame_change_matrix(signs, Xx, w)
    return ModelPoint.from_phase(M @ p.to_phase(), k_e=w.k_e, k_x=w.k_x)


# ---------------------------------------------------------------------------
# value-space transitions


@dataclass
class Transition:
    """A canonical value-space transition in (q1, q2, q_e..., I...) order.

    v -> (eps_f1*v1 + u(v), eps_f2*v2, eps_e*v_e, Xf*v2 + Xe@v_e + Xx@v_x),
    with u flat on the critical value set.  compose() implements the group
    law used to predict the blocks of composed transitions.
    """

    wtype: WilliamsonType
    eps_f1: int = 1
    eps_f2: int = 1
    eps_e: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Xf: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Xe: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    Xx: np.ndarray = field(default_factory=lambda: np.eye(0))
    u: Callable[[np.ndarray], float] | None = None
    du: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        w = self.wtype
        _require_semitoric(w)
        eps = np.asarray(self.eps_e, dtype=int).ravel()
        if eps.size == 0:
            eps = np.ones(w.k_e, dtype=int)
        if eps.size != w.k_e:
            raise DimensionError("eps_e length must match k_e")
        self.eps_e = eps
        self.Xf, self.Xe, self.Xx = (np.asarray(m, dtype=int) for m in
                                     _check_blocks(w, self.Xf if np.size(self.Xf) else np.zeros(w.k_x),
                                                   self.Xe if np.size(self.Xe) else np.zeros((w.k_x, w.k_e)),
                                                   self.Xx if np.size(self.Xx) else np.eye(w.k_x)))
        if self.eps_f1 not in (-1, 1) or self.eps_f2 not in (-1, 1) or \
                np.any(np.abs(self.eps_e) != 1):
            raise DomainError("transition signs must be +-1")

    @property
    def n(self) -> int:
        return self.wtype.n

    def split(self, v: np.ndarray):
        w = self.wtype
        v = np.asarray(v, dtype=float).reshape(self.n)
        return v[0], v[1], v[2:2 + w.k_e], v[2 + w.k_e:]

    def apply(self, v: np.ndarray) -> np.ndarray:
        v1, v2, ve, vx = self.split(v)
        u_val = self.u(np.asarray(v, dtype=float)) if self.u is not None else 0.0
        out_x = self.Xf * v2 + self.Xe @ ve + self.Xx @ vx
        return np.concatenate([[self.eps_f1 * v1 + u_val, self.eps_f2 * v2],
                               self.eps_e * ve, out_x])

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        w = self.wtype
        n = self.n
        J = np.zeros((n, n))
        J[0, 0] = self.eps_f1
        if self.du is not None:
            J[0, :] += np.asarray(self.du(np.asarray(v, dtype=float)), dtype=float)
        J[1, 1] = self.eps_f2
        for l in range(w.k_e):
            J[2 + l, 2 + l] = self.eps_e[l]
        if w.k_x:
            J[2 + w.k_e:, 1] = self.Xf
            J[2 + w.k_e:, 2:2 + w.k_e] = self.Xe
            J[2 + w.k_e:, 2 + w.k_e:] = self.Xx
        return J

    def compose(self, other: "Transition") -> "Transition":
        """self after other (apply other first)."""
        if self.wtype != other.wtype:
            raise DimensionError("cannot compose transitions of different types")
        u_new = None
        du_new = None
        if self.u is not None or other.u is not None:
            def u_new(v, s=self, o=other):
                acc = 0.0
                if o.u is not None:
                    acc += s.eps_f1 * o.u(v)
                if s.u is not None:
                    acc += s.u(o.apply(v))
                return acc

            def du_new(v, s=self, o=other):
                g = np.zeros(s.n)
                if o.du is not None:
                    g += s.eps_f1 * np.asarray(o.du(v), dtype=float)
                if s.du is not None:
                    g += np.asarray(s.du(o.apply(v)), dtype=float) @ o.jacobian(v)
                return g
        ke = self.wtype.k_e
        xe_new = (self.Xe @ np.diag(other.eps_e) + self.Xx @ other.Xe) if ke else self.Xe
        return Transition(
            wtype=self.wtype,
            eps_f1=self.eps_f1 * other.eps_f1,
            eps_f2=self.eps_f2 * other.eps_f2,
            eps_e=self.eps_e * other.eps_e,
            Xf=other.eps_f2 * self.Xf + self.Xx @ other.Xf,
            Xe=xe_new,
            Xx=self.Xx @ other.Xx,
            u=u_new,
            du=du_new,
        )


def transition_of_frame_maps(w: WilliamsonType, Xf, Xe, signs: TransitionSigns, Xx) -> Transition:
    """The value-space transition induced by phase_twist composed after frame_change."""
    Xf_a, Xe_a, Xx_a = _check_blocks(w, Xf, Xe, Xx)
    return Transition(wtype=w, eps_f1=signs.eps_f1, eps_f2=signs.eps_f2,
                      eps_e=np.ones(w.k_e, dtype=int),
                      Xf=signs.eps_f2 * Xf_a, Xe=Xe_a, Xx=Xx_a)


def value_jacobian_of_point_map(w: WilliamsonType, psi_jacobian: np.ndarray,
                                p: np.ndarray, psi_p: np.ndarray) -> np.ndarray:
    """Recover Jac(B) at Q(p) from a fiber-preserving point map with Q o psi = B o Q."""
    Jq_p = model_value_jacobian(w, p)
    Jq_psi = model_value_jacobian(w, psi_p)
    return (Jq_psi @ psi_jacobian) @ np.linalg.pinv(Jq_p)


# ---------------------------------------------------------------------------
# structure verifiers


@dataclass(frozen=True)
class TransitionBlocks:
    """The integer matrix A of a transition Jacobian with named sub-blocks."""

    wtype: WilliamsonType
    A: np.ndarray
    first_row: np.ndarray

    def __post_init__(self):
        w = self.wtype
        A = np.asarray(self.A)
        if A.shape != (w.n - 1, w.n - 1):
            raise DimensionError(f"A must be {(w.n-1, w.n-1)}")
        if abs(round(float(np.linalg.det(A)))) != 1:
            raise DomainError("A must be unimodular")
        object.__setattr__(self, "A", A.astype(int))
        object.__setattr__(self, "first_row", np.asarray(self.first_row, dtype=float))

    def _sl(self):
        ke = self.wtype.k_e
        return slice(0, 1), slice(1, 1 + ke), slice(1 + ke, self.wtype.n - 1)

    @property
    def Ff(self) -> int:
        return int(self.A[0, 0])

    @property
    def Fe(self) -> np.ndarray:
        f, e, _ = self._sl()
        return self.A[f, e][0]

    @property
    def Fx(self) -> np.ndarray:
        f, _, x = self._sl()
        return self.A[f, x][0]

    @property
    def Ef(self) -> np.ndarray:
        f, e, _ = self._sl()
        return self.A[e, f][:, 0]

    @property
    def Ee(self) -> np.ndarray:
        _, e, _ = self._sl()
        return self.A[e, e]

    @property
    def Ex(self) -> np.ndarray:
        _, e, x = self._sl()
        return self.A[e, x]

    @property
    def Xf(self) -> np.ndarray:
        f, _, x = self._sl()
        return self.A[x, f][:, 0]

    @property
    def Xe(self) -> np.ndarray:
        _, e, x = self._sl()
        return self.A[x, e]

    @property
    def Xx(self) -> np.ndarray:
        _, _, x = self._sl()
        return self.A[x, x]


@dataclass
class StructureReport:
    """Outcome of a transition-Jacobian structure check."""

    checks: list[CheckRecord]
    blocks: TransitionBlocks | None = None
    signs: TransitionSigns | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        out = {"checks": [c.as_dict() for c in self.checks], "pass": self.passed}
        if self.blocks is not None:
            out["A"] = self.blocks.A.tolist()
            out["first_row"] = self.blocks.first_row.tolist()
        if self.signs is not None:
            out["eps_f1"] = self.signs.eps_f1
            out["eps_f2"] = self.signs.eps_f2
            out["eps_e"] = list(self.signs.eps_e)
        return out


def verify_integer_blocks(J: np.ndarray, w: WilliamsonType,
                          tol: float = INTEGER_SNAP_TOL) -> StructureReport:
    """Check the loose transition-Jacobian structure.

    Column 1 must vanish below row 1, every entry outside row 1 must be an
    integer within tol, and the rounded lower-right block must be unimodular.
    """
    _require_semitoric(w)
    J = np.asarray(J, dtype=float)
    if J.shape != (w.n, w.n):
        raise DimensionError(f"Jacobian must be {w.n}x{w.n}")
    checks = []
    col_res = float(np.max(np.abs(J[1:, 0]))) if w.n > 1 else 0.0
    checks.append(CheckRecord("first-column-zero", col_res <= tol, col_res, tol))
    body = J[1:, 1:]
    int_res = float(np.max(np.abs(body - np.round(body)))) if body.size else 0.0
    checks.append(CheckRecord("integer-blocks", int_res <= tol, int_res, tol))
    A = np.round(body).astype(int)
    det = abs(round(float(np.linalg.det(A)))) if body.size else 1
    checks.append(CheckRecord("unimodular", det == 1, float(det), 1.0))
    blocks = None
    if all(c.passed for c in checks):
        blocks = TransitionBlocks(w, A, J[0, :])
    return StructureReport(checks, blocks)


def verify_canonical_blocks(J: np.ndarray, w: WilliamsonType, critical_set: bool = False,
                            tol: float = INTEGER_SNAP_TOL) -> StructureReport:
    """Check the tight sign-block structure of a foliation-preserving transition.

    On top of verify_integer_blocks: E^f = 0, E^x = 0, E^e diagonal of signs,
    F^e = 0, F^x = 0, |F^f| = 1.  With critical_set=True (the Jacobian was
    sampled at a value on the focus-focus critical set) the first row must be
    flat to first order: |dG1/dq2|, |dG1/dq_e|, |dG1/dI| <= tol and
    |dG1/dq1| within tol of +-1.
    """
    report = verify_integer_blocks(J, w, tol)
    checks = report.checks
    if report.blocks is None:
        return StructureReport(checks, None)
    b = report.blocks
    ke = w.k_e

    def block_res(name, arr, target):
        arr = np.asarray(arr, dtype=float)
        res = float(np.max(np.abs(arr - target))) if arr.size else 0.0
        checks.append(CheckRecord(name, res <= tol, res, tol))

    block_res("Ef-zero", b.Ef, 0.0)
    block_res("Ex-zero", b.Ex, 0.0)
    if ke:
        offdiag = b.Ee - np.diag(np.diag(b.Ee))
        block_res("Ee-offdiagonal-zero", offdiag, 0.0)
        diag_res = float(np.max(np.abs(np.abs(np.diag(b.Ee)).astype(float) - 1.0)))
        checks.append(CheckRecord("Ee-diagonal-signs", diag_res <= tol, diag_res, tol))
    block_res("Fe-zero", b.Fe, 0.0)
    block_res("Fx-zero", b.Fx, 0.0)
    ff_res = abs(abs(b.Ff) - 1.0)
    checks.append(CheckRecord("Ff-sign", ff_res <= tol, float(ff_res), tol))
    eps_f1 = 1
    if critical_set:
        flat_res = float(np.max(np.abs(J[0, 1:]))) if w.n > 1 else 0.0
        checks.append(CheckRecord("first-row-flat-trace", flat_res <= tol, flat_res, tol))
        lead_res = abs(abs(J[0, 0]) - 1.0)
        checks.append(CheckRecord("first-entry-sign", lead_res <= tol, float(lead_res), tol))
        eps_f1 = 1 if J[0, 0] >= 0 else -1
    signs = None
    if all(c.passed for c in checks):
        eps_e = tuple(int(s) for s in np.sign(np.diag(b.Ee))) if ke else ()
        signs = TransitionSigns(eps_f1, int(np.sign(b.Ff)), eps_e)
    return StructureReport(checks, report.blocks, signs)
