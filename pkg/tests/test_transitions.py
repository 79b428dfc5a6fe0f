import numpy as np
import pytest

from semitoric.errors import DimensionError, DomainError
from semitoric.localmodel import ModelPoint
from semitoric.symplectic import standard_form, symplectic_residual
from semitoric.transitions import (
    Transition,
    TransitionSigns,
    ff_flip_matrix,
    frame_change,
    frame_change_matrix,
    model_value,
    model_value_jacobian,
    phase_twist,
    phase_twist_jacobian,
    spade_order,
    transition_of_frame_maps,
    value_jacobian_of_point_map,
    verify_canonical_blocks,
    verify_integer_blocks,
)
from semitoric.williamson import WilliamsonType

W211 = WilliamsonType(2, 1, 0, 2)  # k_e=2, k_f=1, k_x=2, n=6
W011 = WilliamsonType(0, 1, 0, 1)


def random_model_point(rng, w, avoid_zero=True):
    def z():
        v = complex(rng.normal(), rng.normal())
        if avoid_zero and abs(v) < 0.2:
            v += 0.5 + 0.5j
        return v
    return ModelPoint(z(), z(), [z() for _ in range(w.k_e)],
                      rng.uniform(0, 2 * np.pi, size=w.k_x), rng.normal(size=w.k_x))


def random_blocks(rng, w, lo=-3, hi=3):
    Xf = rng.integers(lo, hi + 1, size=w.k_x)
    Xe = rng.integers(lo, hi + 1, size=(w.k_x, w.k_e))
    # random unimodular: product of elementary shears and swaps
    Xx = np.eye(w.k_x, dtype=int)
    for _ in range(6):
        i, j = rng.integers(0, w.k_x, size=2) if w.k_x else (0, 0)
        if w.k_x < 2 or i == j:
            continue
        E = np.eye(w.k_x, dtype=int)
        E[i, j] = rng.integers(lo, hi + 1)
        Xx = Xx @ E
    return Xf, Xe, Xx


def fd_jacobian(fn, p, h=1e-6):
    cols = []
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        cols.append((fn(p + e) - fn(p - e)) / (2 * h))
    return np.column_stack(cols)


def test_spade_order_permutation():
    assert spade_order(W211) == [2, 3, 0, 1, 4, 5]
    assert spade_order(W011) == [0, 1, 2]


def test_ff_flip_rows_match_hand_values():
    # eps_f1 = -1 sends (x1, xi1, x2, xi2) to (xi1, -x1, xi2, -x2)
    E = ff_flip_matrix(-1, 1)
    assert np.allclose(E @ np.array([1.0, 2.0, 3.0, 4.0]), [2.0, -1.0, 4.0, -3.0])
    # eps_f2 = -1 swaps the two pairs
    E = ff_flip_matrix(1, -1)
    assert np.allclose(E @ np.array([1.0, 2.0, 3.0, 4.0]), [3.0, 4.0, 1.0, 2.0])
    assert np.allclose(ff_flip_matrix(1, 1), np.eye(4))


def test_frame_change_identity():
    rng = np.random.default_rng(0)
    p = random_model_point(rng, W211)
    out = frame_change(TransitionSigns(1, 1, (1, 1)), np.eye(2, dtype=int), p)
    assert out.distance(p) < 1e-14


def test_frame_change_ff_pullbacks():
    rng = np.random.default_rng(1)
    for ef1 in (-1, 1):
        for ef2 in (-1, 1):
            for _ in range(20):
                p = random_model_point(rng, W011)
                out = frame_change(TransitionSigns(ef1, ef2), np.eye(1, dtype=int), p)
                q_in = model_value(W011, p.to_phase())
                q_out = model_value(W011, out.to_phase())
                assert q_out[0] == pytest.approx(ef1 * q_in[0], abs=1e-12)
                assert q_out[1] == pytest.approx(ef2 * q_in[1], abs=1e-12)


def test_frame_change_torus_pullback():
    rng = np.random.default_rng(2)
    _, _, Xx = random_blocks(rng, W211)
    p = random_model_point(rng, W211)
    out = frame_change(TransitionSigns(1, 1, (1, 1)), Xx, p)
    assert np.allclose(out.I, Xx @ p.I)
    # theta transforms contragradiently so that theta . I is preserved
    assert np.allclose(np.mod(np.linalg.inv(Xx).T @ p.theta, 2 * np.pi), out.theta)


def test_frame_change_matrix_is_symplectic():
    rng = np.random.default_rng(3)
    form = standard_form(W211.n)
    for _ in range(25):
        ef1, ef2 = rng.choice([-1, 1], size=2)
        _, _, Xx = random_blocks(rng, W211)
        M = frame_change_matrix(TransitionSigns(int(ef1), int(ef2), (1, 1)), Xx, W211)
        assert symplectic_residual(M, form) <= 1e-12


def test_frame_change_rejects_non_unimodular():
    with pytest.raises(DomainError):
        frame_change_matrix(TransitionSigns(1, 1, (1, 1)), np.array([[2, 0], [0, 1]]), W211)


def test_phase_twist_identity_blocks():
    rng = np.random.default_rng(4)
    p = random_model_point(rng, W211)
    out = phase_twist(np.zeros(2, dtype=int), np.zeros((2, 2), dtype=int), p)
    assert out.distance(p) < 1e-14


def test_phase_twist_example():
    p = ModelPoint(1.0, 0.5, [], [np.pi / 2], [0.25])
    out = phase_twist([1], np.zeros((1, 0), dtype=int), p)
    assert out.z1 == pytest.approx(-1j)
    q2 = (np.conj(p.z1) * p.z2).imag
    assert out.I[0] == pytest.approx(0.25 + q2)


def test_phase_twist_pullback_identities():
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = random_model_point(rng, W211)
        Xf, Xe, _ = random_blocks(rng, W211)
        out = phase_twist(Xf, Xe, p)
        v_in = model_value(W211, p.to_phase())
        v_out = model_value(W211, out.to_phase())
        # q1 + i q2 and the elliptic values are preserved
        assert np.max(np.abs(v_out[:4] - v_in[:4])) <= 1e-10
        # I picks up q2 . Xf + Q_e . Xe^T
        shift = v_in[1] * np.asarray(Xf, dtype=float) + v_in[2:4] @ np.asarray(Xe, dtype=float).T
        assert np.max(np.abs(v_out[4:] - v_in[4:] - shift)) <= 1e-10


def test_phase_twist_jacobian_matches_fd():
    rng = np.random.default_rng(6)
    for _ in range(5):
        p = random_model_point(rng, W211)
        Xf, Xe, _ = random_blocks(rng, W211)
        J = phase_twist_jacobian(Xf, Xe, p)

        def fn(q):
            pt = ModelPoint.from_phase(q, k_e=W211.k_e, k_x=W211.k_x)
            return phase_twist(Xf, Xe, pt).to_phase()

        # compare away from the angle wrap by re-centering theta
        Jfd = fd_jacobian(fn, p.to_phase())
        assert np.max(np.abs(J - Jfd)) < 1e-6


def test_phase_twist_is_symplectic():
    rng = np.random.default_rng(7)
    form = standard_form(W211.n)
    worst = 0.0
    for _ in range(100):
        p = random_model_point(rng, W211)
        Xf, Xe, _ = random_blocks(rng, W211)
        J = phase_twist_jacobian(Xf, Xe, p)
        worst = max(worst, symplectic_residual(J, form))
    assert worst <= 1e-10


def test_phase_twist_fd_jacobian_symplectic_residual():
    rng = np.random.default_rng(8)
    form = standard_form(W211.n)
    for _ in range(5):
        p = random_model_point(rng, W211)
        Xf, Xe, _ = random_blocks(rng, W211)

        def fn(q):
            pt = ModelPoint.from_phase(q, k_e=W211.k_e, k_x=W211.k_x)
            return phase_twist(Xf, Xe, pt).to_phase()

        J = fd_jacobian(fn, p.to_phase())
        assert symplectic_residual(J, form) <= 1e-5


def test_composed_point_map_is_symplectic():
    rng = np.random.default_rng(9)
    form = standard_form(W211.n)
    for _ in range(20):
        p = random_model_point(rng, W211)
        Xf, Xe, Xx = random_blocks(rng, W211)
        signs = TransitionSigns(int(rng.choice([-1, 1])), int(rng.choice([-1, 1])), (1, 1))
        M = frame_change_matrix(signs, Xx, W211)
        mid = ModelPoint.from_phase(M @ p.to_phase(), W211.k_e, W211.k_x)
        J = phase_twist_jacobian(Xf, Xe, mid) @ M
        assert symplectic_residual(J, form) <= 1e-10


def test_verify_integer_blocks_identity():
    rep = verify_integer_blocks(np.eye(6), W211)
    assert rep.passed
    assert np.array_equal(rep.blocks.A, np.eye(5, dtype=int))


def test_verify_integer_blocks_rejects_fraction():
    J = np.eye(6)
    J[3, 2] = 0.5
    rep = verify_integer_blocks(J, W211)
    assert not rep.passed
    names = {c.name: c.passed for c in rep.checks}
    assert not names["integer-blocks"]


def test_verify_integer_blocks_rejects_first_column():
    J = np.eye(6)
    J[2, 0] = 0.3
    assert not verify_integer_blocks(J, W211).passed


def test_verify_canonical_identity():
    rep = verify_canonical_blocks(np.eye(6), W211, critical_set=True)
    assert rep.passed
    assert rep.signs.eps_f1 == 1 and rep.signs.eps_f2 == 1
    assert rep.signs.eps_e == (1, 1)


def test_verify_canonical_rejects_ef_coupling():
    J = np.eye(6)
    J[2, 1] = 1.0  # E^f entry
    rep = verify_canonical_blocks(J, W211)
    assert not rep.passed


def test_point_map_recovers_blocks():
    rng = np.random.default_rng(10)
    for trial in range(10):
        Xf, Xe, Xx = random_blocks(rng, W211)
        signs = TransitionSigns(int(rng.choice([-1, 1])), int(rng.choice([-1, 1])), (1, 1))
        expected = transition_of_frame_maps(W211, Xf, Xe, signs, Xx)
        p = random_model_point(rng, W211)
        M = frame_change_matrix(signs, Xx, W211)
        mid = ModelPoint.from_phase(M @ p.to_phase(), W211.k_e, W211.k_x)
        out = phase_twist(Xf, Xe, mid)
        J_psi = phase_twist_jacobian(Xf, Xe, mid) @ M
        J_B = value_jacobian_of_point_map(W211, J_psi, p.to_phase(), out.to_phase())
        # the recovered value Jacobian matches the canonical transition's
        v = model_value(W211, p.to_phase())
        assert np.max(np.abs(J_B - expected.jacobian(v))) < 1e-9
        rep = verify_canonical_blocks(J_B, W211, tol=1e-9)
        assert rep.passed, [c.as_dict() for c in rep.checks if not c.passed]
        assert np.array_equal(rep.blocks.Xx, Xx)
        assert np.array_equal(rep.blocks.Xe, Xe)
        assert np.array_equal(rep.blocks.Xf, signs.eps_f2 * Xf)
        assert rep.signs.eps_f2 == signs.eps_f2


def test_point_map_value_identity():
    # Q o psi = B o Q pointwise, not just at the Jacobian level
    rng = np.random.default_rng(11)
    for _ in range(20):
        Xf, Xe, Xx = random_blocks(rng, W211)
        signs = TransitionSigns(int(rng.choice([-1, 1])), int(rng.choice([-1, 1])), (1, 1))
        B = transition_of_frame_maps(W211, Xf, Xe, signs, Xx)
        p = random_model_point(rng, W211)
        psi_p = phase_twist(Xf, Xe, frame_change(signs, Xx, p))
        lhs = model_value(W211, psi_p.to_phase())
        rhs = B.apply(model_value(W211, p.to_phase()))
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def flat_bump(w):
    nq = 2 + w.k_e

    def u(v):
        rho = float(np.sum(np.asarray(v[:nq]) ** 2))
        return 0.0 if rho == 0 else float(np.exp(-1.0 / rho))

    def du(v):
        v = np.asarray(v, dtype=float)
        rho = float(np.sum(v[:nq] ** 2))
        g = np.zeros(w.n)
        if rho > 0:
            g[:nq] = np.exp(-1.0 / rho) * 2.0 * v[:nq] / rho**2
        return g

    return u, du


def test_composition_group_law():
    rng = np.random.default_rng(12)
    u, du = flat_bump(W211)
    for _ in range(10):
        Xf1, Xe1, Xx1 = random_blocks(rng, W211)
        Xf2, Xe2, Xx2 = random_blocks(rng, W211)
        t1 = Transition(W211, int(rng.choice([-1, 1])), int(rng.choice([-1, 1])),
                        rng.choice([-1, 1], size=2), Xf1, Xe1, Xx1, u=u, du=du)
        t2 = Transition(W211, int(rng.choice([-1, 1])), int(rng.choice([-1, 1])),
                        rng.choice([-1, 1], size=2), Xf2, Xe2, Xx2)
        comp = t1.compose(t2)
        v = rng.normal(size=6)
        assert np.allclose(comp.apply(v), t1.apply(t2.apply(v)), atol=1e-12)
        assert np.allclose(comp.jacobian(v), t1.jacobian(t2.apply(v)) @ t2.jacobian(v),
                           atol=1e-12)
        # the composed transition's verified blocks equal the group-law blocks
        rep = verify_canonical_blocks(t1.jacobian(t2.apply(v)) @ t2.jacobian(v), W211, tol=1e-9)
        assert rep.passed
        assert np.array_equal(rep.blocks.Xf, comp.Xf)
        assert np.array_equal(rep.blocks.Xe, comp.Xe)
        assert np.array_equal(rep.blocks.Xx, comp.Xx)
        assert np.array_equal(np.diag(rep.blocks.Ee), comp.eps_e)


def test_flat_transition_on_critical_set():
    u, du = flat_bump(W211)
    t = Transition(W211, -1, 1, (1, -1), [1, 0], [[1, 2], [0, 1]], [[1, 1], [0, 1]],
                   u=u, du=du)
    v_crit = np.array([0.0, 0.0, 0.0, 0.0, 0.7, -0.3])
    rep = verify_canonical_blocks(t.jacobian(v_crit), W211, critical_set=True, tol=1e-9)
    assert rep.passed
    assert rep.signs.eps_f1 == -1
    # off the critical set the flat part is small but nonzero
    v_off = np.array([0.9, 0.1, 0.2, 0.0, 0.7, -0.3])
    J_off = t.jacobian(v_off)
    assert abs(J_off[0, 1]) > 0


def test_transition_rejects_bad_signs():
    with pytest.raises(DomainError):
        Transition(W011, eps_f1=2)
    with pytest.raises(DomainError):
        Transition(W011, Xx=np.array([[2]]))


def test_degenerate_dimensions_pure_ff():
    # k_e = k_x = 0: no theta/I branches anywhere
    w = WilliamsonType(0, 1, 0, 0)
    p = ModelPoint(0.5 + 0.2j, -0.3 + 1j)
    out = phase_twist(np.zeros(0, dtype=int), np.zeros((0, 0), dtype=int), p)
    assert out.distance(p) < 1e-15
    M = frame_change_matrix(TransitionSigns(-1, -1, ()), np.eye(0, dtype=int), w)
    assert symplectic_residual(M, standard_form(2)) <= 1e-12
    rep = verify_canonical_blocks(np.diag([1.0, -1.0]), w, critical_set=True)
    assert rep.passed
    assert rep.signs.eps_f2 == -1
