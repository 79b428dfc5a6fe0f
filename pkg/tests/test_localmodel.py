import cmath
import math

import numpy as np
import pytest

from semitoric.errors import DimensionError, DomainError
from semitoric.localmodel import (
    LinearModel,
    ModelPoint,
    build_model,
    eval_model,
    flow_closed_form,
    joint_flow,
)
from semitoric.symplectic import flow
from semitoric.williamson import WilliamsonType


def test_component_order_ff_transverse():
    model = build_model(WilliamsonType(0, 1, 0, 1))
    assert [s[0] for s in model.species] == ["q1", "q2", "xi"]


def test_component_order_single_elliptic():
    model = build_model(WilliamsonType(1, 0, 0, 0))
    assert [s[0] for s in model.species] == ["e"]


def test_regular_model_is_momenta():
    n = 4
    model = build_model(WilliamsonType(0, 0, 0, n))
    assert [s[0] for s in model.species] == ["xi"] * n
    p = np.arange(2 * n, dtype=float)
    assert np.allclose(model.values(p), p[n:])


def test_eval_ff_transverse_point():
    model = build_model(WilliamsonType(0, 1, 0, 1))
    # (x1, x2, x3, xi1, xi2, xi3) with FF coords (1, 0, 0, 1) and xi3 = 0
    p = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    assert np.allclose(model.values(p), [0.0, 1.0, 0.0])


def test_eval_zero_point():
    model = build_model(WilliamsonType(1, 1, 1, 1))
    assert np.allclose(model.values(np.zeros(2 * model.n)), 0.0)


def test_eval_elliptic_unit():
    model = build_model(WilliamsonType(1, 0, 0, 0))
    assert eval_model(model, np.array([1.0, 0.0])) == pytest.approx([1.0])


def test_eval_dimension_check():
    model = build_model(WilliamsonType(0, 1, 0, 0))
    with pytest.raises(DimensionError):
        model.values(np.zeros(6))


def test_jacobian_matches_fd():
    model = build_model(WilliamsonType(1, 1, 0, 2))
    rng = np.random.default_rng(0)
    p = rng.normal(size=2 * model.n)
    J = model.jacobian(p)
    h = 1e-6
    for i in range(2 * model.n):
        e = np.zeros(2 * model.n)
        e[i] = h
        col = (model.values(p + e) - model.values(p - e)) / (2 * h)
        assert np.allclose(J[:, i], col, atol=1e-8)


def test_model_point_phase_roundtrip():
    pt = ModelPoint(1 + 2j, -0.5j, [0.3 - 0.1j], [1.0, 2.0], [0.5, -0.25])
    back = ModelPoint.from_phase(pt.to_phase(), k_e=1, k_x=2)
    assert back.distance(pt) < 1e-15


def test_flow_closed_form_identity_at_zero():
    pt = ModelPoint(0.2 + 0.1j, 1.0, [1j], [0.4], [0.7])
    for species in ("q1", "q2", "e1", "xi1"):
        assert flow_closed_form(species, pt, 0.0).distance(pt) < 1e-15


def test_flow_q2_is_2pi_periodic():
    pt = ModelPoint(0.3 - 1j, 0.5 + 0.2j)
    assert flow_closed_form("q2", pt, 2 * math.pi).distance(pt) < 1e-12


def test_flow_q1_scaling():
    pt = ModelPoint(1.0, 1.0)
    out = flow_closed_form("q1", pt, math.log(2.0))
    assert out.z1 == pytest.approx(2.0)
    assert out.z2 == pytest.approx(0.5)


def test_flow_elliptic_period_is_pi():
    pt = ModelPoint(0, 0, [0.7 + 0.1j])
    assert flow_closed_form("e1", pt, math.pi).distance(pt) < 1e-12
    half = flow_closed_form("e1", pt, math.pi / 2)
    assert half.ze[0] == pytest.approx(-pt.ze[0])


def test_flow_transverse_advances_angle():
    pt = ModelPoint(0, 0, [], [0.25], [1.5])
    out = flow_closed_form("xi1", pt, 1.0)
    assert out.theta[0] == pytest.approx(1.25)
    assert flow_closed_form("xi1", pt, 2 * math.pi).distance(pt) < 1e-12


def test_closed_form_agrees_with_ode():
    w = WilliamsonType(1, 1, 0, 1)
    model = build_model(w)
    pt = ModelPoint(0.4 - 0.2j, 0.3 + 0.5j, [0.6 + 0.1j], [1.2], [0.8])
    species_to_comp = {"e1": 0, "q1": 1, "q2": 2, "xi1": 3}
    for species, k in species_to_comp.items():
        H = model.component(k)
        for t in (-2 * math.pi, -1.3, 0.7, 2 * math.pi):
            exact = flow_closed_form(species, pt, t)
            ode = ModelPoint.from_phase(flow(H, pt.to_phase(), t, 1e-12), k_e=1, k_x=1)
            assert exact.distance(ode) < 1e-7, (species, t)


def test_joint_flow_example():
    s, t, end = joint_flow(1.0, 2j)
    assert s == pytest.approx(math.log(2.0))
    assert t == pytest.approx(math.pi / 2)
    assert end.z1 == pytest.approx(2j)
    assert end.z2 == pytest.approx(1.0)


def test_joint_flow_fixed_point():
    c = 0.3 - 0.7j
    s, t, end = joint_flow(c, c, theta=[0.2], I=[1.0])
    assert s == pytest.approx(0.0)
    assert t == pytest.approx(0.0)
    assert end.z1 == pytest.approx(c)
    assert end.z2 == pytest.approx(np.conj(c))


def test_joint_flow_domain_error():
    with pytest.raises(DomainError):
        joint_flow(0.0, 1.0)
    with pytest.raises(DomainError):
        joint_flow(1.0, 0.0)


def test_joint_flow_identity_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        c = rng.uniform(0.1, 10) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
        d = rng.uniform(0.1, 10) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
        theta = rng.uniform(0, 2 * math.pi, size=2)
        act = rng.normal(size=2)
        _, _, end = joint_flow(c, d, theta, act)
        target = ModelPoint(d, np.conj(c), [], theta, act)
        assert end.distance(target) <= 1e-9
