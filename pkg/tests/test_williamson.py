import numpy as np
import pytest

from semitoric.errors import DimensionError
from semitoric.localmodel import LinearModel, planted_candidate
from semitoric.symplectic import QuadraticHamiltonian
from semitoric.williamson import (
    CartanCandidate,
    TypePoset,
    WilliamsonType,
    classify_fixed,
    is_commuting,
    regular_type,
    type_leq,
    type_of_product,
    williamson_type,
)


def random_types(rng, count, n):
    """Random valid quadruplets with the given ambient dimension."""
    out = []
    while len(out) < count:
        k_f = rng.integers(0, n // 2 + 1)
        rest = n - 2 * k_f
        k_e = rng.integers(0, rest + 1)
        k_h = rng.integers(0, rest - k_e + 1)
        out.append(WilliamsonType(int(k_e), int(k_f), int(k_h), int(rest - k_e - k_h)))
    return out


def test_count_identity_always_holds():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 5):
        for w in random_types(rng, 50, n):
            assert w.k_e + 2 * w.k_f + w.k_h + w.k_x == w.n == n


def test_explicit_n_validation():
    assert williamson_type(1, 1, 0, 1, n=4).n == 4
    with pytest.raises(DimensionError):
        williamson_type(1, 1, 0, 1, n=3)
    with pytest.raises(DimensionError):
        WilliamsonType(-1, 0, 0, 1)


def test_type_leq_examples():
    assert type_leq(WilliamsonType(0, 1, 0, 0), WilliamsonType(0, 0, 0, 2))
    assert not type_leq(WilliamsonType(1, 0, 0, 1), WilliamsonType(0, 1, 0, 0))
    a = WilliamsonType(1, 1, 0, 2)
    assert type_leq(a, a)


def test_type_leq_dimension_mismatch():
    with pytest.raises(DimensionError):
        type_leq(WilliamsonType(1, 0, 0, 0), WilliamsonType(0, 0, 0, 2))


def test_type_of_product():
    assert type_of_product(WilliamsonType(0, 1, 0, 0), WilliamsonType(0, 0, 0, 1)) == \
        WilliamsonType(0, 1, 0, 1)
    zero = WilliamsonType(0, 0, 0, 0)
    a = WilliamsonType(1, 0, 0, 1)
    assert type_of_product(a, zero) == a
    assert type_of_product(a, WilliamsonType(1, 0, 0, 0)) == WilliamsonType(2, 0, 0, 1)
    assert type_of_product(a, WilliamsonType(1, 0, 0, 0)).n == 3


def test_poset_axioms_random_triples():
    rng = np.random.default_rng(42)
    types = random_types(rng, 60, 4)
    for _ in range(1000):
        a, b, c = (types[i] for i in rng.integers(0, len(types), size=3))
        assert type_leq(a, a)
        if type_leq(a, b) and type_leq(b, a):
            assert a == b  # antisymmetry, k_x pinned by the count identity
        if type_leq(a, b) and type_leq(b, c):
            assert type_leq(a, c)


def test_type_poset_container():
    members = {WilliamsonType(0, 1, 0, 1), WilliamsonType(1, 1, 0, 0), regular_type(3)}
    poset = TypePoset(frozenset(members))
    assert poset.maximal_elements() == {regular_type(3)}
    assert poset.minimal_elements() == {WilliamsonType(1, 1, 0, 0)}
    with pytest.raises(DimensionError):
        TypePoset(frozenset({regular_type(2), regular_type(3)}))


def ff_pair():
    model = LinearModel(WilliamsonType(0, 1, 0, 0))
    return [model.quadratic(0), model.quadratic(1)]


def test_is_commuting_model_pair():
    assert is_commuting(CartanCandidate(ff_pair()))


def test_is_commuting_counterexample():
    # {x^2, xi^2} = -4 x xi, a nonzero multiple of x*xi
    Sx = np.array([[1.0, 0.0], [0.0, 0.0]])
    Sxi = np.array([[0.0, 0.0], [0.0, 1.0]])
    cand = CartanCandidate([QuadraticHamiltonian(Sx), QuadraticHamiltonian(Sxi)])
    assert not is_commuting(cand)
    from semitoric.williamson import quadratic_bracket_matrix
    B = quadratic_bracket_matrix(Sx, Sxi)
    # bracket form evaluates to -4 x xi
    assert QuadraticHamiltonian(B).value([1.0, 1.0]) == pytest.approx(-4.0)


def test_is_commuting_single():
    assert is_commuting(CartanCandidate([ff_pair()[0]]))


def test_classify_elliptic_unit():
    cand = CartanCandidate([QuadraticHamiltonian(np.eye(2))])
    rep = classify_fixed(cand)
    assert rep.nondegenerate
    assert rep.wtype == WilliamsonType(1, 0, 0, 0)


def test_classify_focus_focus_pair():
    rep = classify_fixed(CartanCandidate(ff_pair()))
    assert rep.nondegenerate
    assert rep.wtype == WilliamsonType(0, 1, 0, 0)


def test_classify_hyperbolic():
    rep = classify_fixed(CartanCandidate([QuadraticHamiltonian(np.array([[0.0, 0.5], [0.5, 0.0]]))]))
    assert rep.wtype == WilliamsonType(0, 0, 1, 0)


def test_classify_planted_conjugated():
    rng = np.random.default_rng(7)
    w = WilliamsonType(1, 1, 0, 0)
    cand = planted_candidate(w, rng)
    assert is_commuting(cand)
    rep = classify_fixed(cand, ambient_n=3, seed=11)
    assert rep.nondegenerate
    assert rep.wtype == WilliamsonType(1, 1, 0, 0)
    assert rep.wtype.k_x == 0


def test_classify_planted_with_transverse_offset():
    rng = np.random.default_rng(8)
    cand = planted_candidate(WilliamsonType(2, 0, 0, 0), rng)
    rep = classify_fixed(cand, ambient_n=3, seed=1)
    assert rep.wtype == WilliamsonType(2, 0, 0, 1)


def test_classify_invariant_under_recombination():
    rng = np.random.default_rng(9)
    for planted in (WilliamsonType(0, 1, 0, 0), WilliamsonType(1, 0, 1, 0), WilliamsonType(2, 1, 0, 0)):
        cand = planted_candidate(planted, rng, recombine=True)
        rep = classify_fixed(cand, ambient_n=planted.n, seed=3)
        assert rep.nondegenerate, rep.diagnostics
        assert rep.wtype == planted


def test_classify_degenerate_span():
    S = QuadraticHamiltonian(np.eye(4))
    rep = classify_fixed(CartanCandidate([S, S]))
    assert not rep.nondegenerate
    assert rep.wtype is None
    assert "span" in rep.diagnostics


def test_classify_zero_eigenvalues_degenerate():
    # x^2 alone generates a nilpotent field: eigenvalues all zero
    S = np.array([[1.0, 0.0], [0.0, 0.0]])
    rep = classify_fixed(CartanCandidate([QuadraticHamiltonian(S)]))
    assert not rep.nondegenerate
    assert rep.wtype is None


def test_classify_deterministic_given_seed():
    rng = np.random.default_rng(10)
    cand = planted_candidate(WilliamsonType(1, 1, 0, 0), rng)
    r1 = classify_fixed(cand, ambient_n=3, seed=5)
    r2 = classify_fixed(cand, ambient_n=3, seed=5)
    assert np.array_equal(r1.coefficients, r2.coefficients)
    assert r1.wtype == r2.wtype
