"""Chart-local symplectic machinery on R^(2n).

Phase points are flat float arrays laid out as (x_1..x_n, xi_1..xi_n).
The standard form omega_0 = sum_i dxi_i ^ dx_i is represented by the
block matrix Omega = [[0, -I], [I, 0]] acting as omega(u, v) = u^T Omega v.

Calibration used throughout the package: the Hamiltonian vector field
solves i_X omega = -dH, i.e. xdot = dH/dxi, xidot = -dH/dx, and the
bracket is {F, G} = omega(X_F, X_G).  Under this calibration the flow of
the focus-focus component q2 rotates both complex variables by e^(it),
and the flow of a transverse momentum xi_j advances its angle by +t.
The elliptic quadratic e = x^2 + xi^2 (no 1/2 factor) then rotates its
complex variable by e^(-2it): its period is pi, not 2pi.  That factor is
a documented normalization fact, asserted in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DimensionError, DomainError, IntegrationError, NumericalError

GRAD_STEP = 1e-5
HESS_STEP = 1e-3


def as_phase_point(coords) -> np.ndarray:
    """Validate and return a phase point as a flat float array of even length."""
    p = np.asarray(coords, dtype=float).ravel()
    if p.size == 0 or p.size % 2:
        raise DimensionError(f"phase point needs an even number of coordinates, got {p.size}")
    return p


def standard_form_matrix(n: int) -> np.ndarray:
    ident = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -ident], [ident, zero]])


@dataclass(frozen=True)
class SymplecticForm:
    """The constant form omega_0 on R^(2n) in the (x, xi) layout."""

    n: int
    matrix: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError("n must be positive")
        if self.matrix is None:
            object.__setattr__(self, "matrix", standard_form_matrix(self.n))
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2 * self.n, 2 * self.n):
            raise DimensionError(f"form matrix must be {2*self.n}x{2*self.n}")
        if not np.allclose(m.T, -m, atol=1e-12):
            raise DimensionError("form matrix is not antisymmetric")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 2 * self.n


def standard_form(n: int) -> SymplecticForm:
    return SymplecticForm(n)


def omega_pair(form: SymplecticForm, u, v) -> float:
    """Evaluate omega_0(u, v) = u^T Omega v on two tangent vectors."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.size != form.dim or v.size != form.dim:
        raise DimensionError(f"tangent vectors must have length {form.dim}")
    return float(u @ form.matrix @ v)


def symplectic_residual(M, form: SymplecticForm) -> float:
    """Max-entry norm of M^T Omega M - Omega; zero iff M is symplectic."""
    M = np.asarray(M, dtype=float)
    if M.shape != (form.dim, form.dim):
        raise DimensionError(f"matrix must be {form.dim}x{form.dim}")
    return float(np.max(np.abs(M.T @ form.matrix @ M - form.matrix)))


def _fd_gradient(fn, p, h):
    g = np.empty_like(p)
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        g[i] = (fn(p + e) - fn(p - e)) / (2 * h)
    return g


@dataclass
class SmoothHamiltonian:
    """Scalar Hamiltonian with optional analytic derivative oracles.

    Missing oracles fall back to central finite differences: gradient step
    GRAD_STEP, Hessian step HESS_STEP*(1+|p|) when second-differencing
    values, or GRAD_STEP when differencing an analytic gradient.
    """

    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __call__(self, p) -> float:
        return float(self.fn(np.asarray(p, dtype=float)))

    def gradient(self, p) -> np.ndarray:
        p = as_phase_point(p)
        if self.grad is not None:
            g = np.asarray(self.grad(p), dtype=float)
        else:
            g = _fd_gradient(self.fn, p, GRAD_STEP)
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient of {self.name or 'hamiltonian'} at {p}")
        return g

    def hessian(self, p) -> np.ndarray:
        p = as_phase_point(p)
        if self.hess is not None:
            return np.asarray(self.hess(p), dtype=float)
        if self.grad is not None:
            h = GRAD_STEP * (1.0 + float(np.max(np.abs(p))))
            cols = []
            for i in range(p.size):
                e = np.zeros_like(p)
                e[i] = h
                cols.append((self.gradient(p + e) - self.gradient(p - e)) / (2 * h))
            H = np.column_stack(cols)
        else:
            h = HESS_STEP * (1.0 + float(np.max(np.abs(p))))
            H = np.empty((p.size, p.size))
            f0 = self.fn(p)
            for i in range(p.size):
                ei = np.zeros_like(p)
                ei[i] = h
                H[i, i] = (self.fn(p + ei) - 2 * f0 + self.fn(p - ei)) / h**2
                for j in range(i + 1, p.size):
                    ej = np.zeros_like(p)
                    ej[j] = h
                    H[i, j] = H[j, i] = (
                        self.fn(p + ei + ej) - self.fn(p + ei - ej)
                        - self.fn(p - ei + ej) + self.fn(p - ei - ej)
                    ) / (4 * h**2)
        return 0.5 * (H + H.T)


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """Quadratic Hamiltonian p -> p^T S p with S symmetric (no 1/2 factor)."""

    S: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
            raise DimensionError("S must be square with even dimension")
        object.__setattr__(self, "S", 0.5 * (S + S.T))

    @property
    def dim(self) -> int:
        return self.S.shape[0]

    def value(self, p) -> float:
        p = np.asarray(p, dtype=float)
        return float(p @ self.S @ p)

    def as_smooth(self, name: str = "") -> SmoothHamiltonian:
        S = self.S
        return SmoothHamiltonian(
            fn=lambda p: float(p @ S @ p),
            grad=lambda p: 2.0 * (S @ p),
            hess=lambda p: 2.0 * S,
            name=name,
        )

    def field_matrix(self, form: SymplecticForm | None = None) -> np.ndarray:
        """Matrix A of the linear Hamiltonian field X(p) = A p."""
        if form is None:
            form = standard_form(self.dim // 2)
        return np.linalg.solve(form.matrix, 2.0 * self.S)


def hamiltonian_vector_field(H: SmoothHamiltonian, p, form: SymplecticForm | None = None) -> np.ndarray:
    """Field X_H with i_X omega = -dH: xdot = dH/dxi, xidot = -dH/dx."""
    p = as_phase_point(p)
    g = H.gradient(p)
    if form is None:
        n = p.size // 2
        return np.concatenate([g[n:], -g[:n]])
    return np.linalg.solve(form.matrix, g)


def poisson_bracket(F: SmoothHamiltonian, G: SmoothHamiltonian, p, form: SymplecticForm | None = None) -> float:
    """{F, G}(p) = omega(X_F, X_G)(p); equals -dF . X_G under the calibration."""
    p = as_phase_point(p)
    if form is None:
        form = standard_form(p.size // 2)
    xf = hamiltonian_vector_field(F, p, form)
    xg = hamiltonian_vector_field(G, p, form)
    return float(xf @ form.matrix @ xg)


def flow(H: SmoothHamiltonian, p, t: float, tol: float = 1e-10,
         form: SymplecticForm | None = None,
         form_field: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Integrate the Hamiltonian flow of H from p over time t.

    Adaptive embedded Runge-Kutta (DOP853) with relative tolerance tol and
    absolute tolerance tol*1e-2.  Guarantees |H(result) - H(p)| <=
    10*tol*(1+|H(p)|) and raises IntegrationError otherwise.  form_field, if
    given, supplies a position-dependent form matrix W(p) overriding form.
    """
    p = as_phase_point(p)
    if tol <= 0:
        raise DomainError("tol must be positive")
    if t == 0.0:
        return p.copy()

    if form_field is not None:
        def rhs(_s, y):
            return np.linalg.solve(form_field(y), H.gradient(y))
    elif form is not None:
        W = form.matrix

        def rhs(_s, y):
            return np.linalg.solve(W, H.gradient(y))
    else:
        n = p.size // 2

        def rhs(_s, y):
            g = H.gradient(y)
            return np.concatenate([g[n:], -g[:n]])

    sol = solve_ivp(rhs, (0.0, t), p, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    dense_output=False)
    if not sol.success:
        raise IntegrationError(f"flow integration failed: {sol.message}")
    out = sol.y[:, -1]
    if not np.all(np.isfinite(out)):
        raise IntegrationError("flow escaped to non-finite coordinates")
    h0, h1 = H(p), H(out)
    if abs(h1 - h0) > 10 * tol * (1 + abs(h0)):
        raise IntegrationError(
            f"energy drift {abs(h1 - h0):.3e} exceeds contract at tol={tol:.1e}")
    return out


def flow_map_jacobian(H: SmoothHamiltonian, p, t: float, tol: float = 1e-10,
                      step: float = 1e-6, form: SymplecticForm | None = None) -> np.ndarray:
    """Central finite-difference Jacobian of p -> flow(H, p, t)."""
    p = as_phase_point(p)
    cols = []
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = step
        cols.append((flow(H, p + e, t, tol, form) - flow(H, p - e, t, tol, form)) / (2 * step))
    return np.column_stack(cols)


def darboux_basis(W: np.ndarray, subspace: np.ndarray, cond_limit: float = 1e8) -> np.ndarray:
    """Symplectic Gram-Schmidt on the columns of `subspace` w.r.t. the form W.

    Returns B of shape (2n, 2k) with columns (u_1..u_k, w_1..w_k) such that
    B^T W B equals the standard Omega_(2k), i.e. omega(u_i, w_j) = -delta_ij
    and all other pairings vanish.  Raises NumericalError when the restricted
    form is degenerate or the basis condition number exceeds cond_limit.
    """
    V = np.asarray(subspace, dtype=float)
    if V.ndim != 2 or V.shape[1] % 2:
        raise DimensionError("subspace must have an even number of columns")
    q, _ = np.linalg.qr(V)
    cols = [q[:, i].copy() for i in range(q.shape[1])]
    scale = float(np.max(np.abs(q.T @ W @ q))) or 1.0
    us, ws = [], []
    while cols:
        u = cols.pop(0)
        pair = np.array([u @ W @ c for c in cols])
        j = int(np.argmax(np.abs(pair)))
        if abs(pair[j]) < 1e-12 * scale:
            raise NumericalError("restricted symplectic form is numerically degenerate")
        w = cols.pop(j) / (-pair[j])  # omega(u, w) = -1
        us.append(u)
        ws.append(w)
        for k, r in enumerate(cols):
            r = r + (r @ W @ w) * u - (r @ W @ u) * w
            nrm = np.linalg.norm(r)
            if nrm < 1e-12:
                raise NumericalError("symplectic reduction collapsed a basis vector")
            cols[k] = r
    B = np.column_stack(us + ws)
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] > cond_limit:
        raise NumericalError(f"Darboux basis is ill-conditioned (cond={sv[0]/sv[-1]:.2e})")
    return B
