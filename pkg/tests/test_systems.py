import json
from fractions import Fraction

import numpy as np
import pytest

from hydrogeo.fields import Grid2D, ScalarField2D
from hydrogeo.systems import RazTerm, bracket_equivalence, build_raz, raz_residual, render_system, system_to_json

from _support import PRINTED_N3, PRINTED_N4, parse_equation, periodic_grid, smooth_random_field


@pytest.mark.parametrize("N,printed", [(3, PRINTED_N3), (4, PRINTED_N4)])
def test_printed_systems_structural(N, printed):
    sysr = build_raz(N)
    assert [k for k, _ in sysr.equations] == list(range(1, N + 1))
    for (k, terms), text in zip(sysr.equations, printed):
        assert list(terms) == parse_equation(text), f"equation {k}"


def test_n2_system():
    sysr = build_raz(2)
    assert list(sysr.equation(1)) == parse_equation("a1_x1 + g12*a1_x2 = a1*g12_x2")
    assert list(sysr.equation(2)) == parse_equation("g12*a1_x1 + a1_x2 = a1*g12_x1")


def test_equation_count_and_factors():
    for N in range(2, 8):
        sysr = build_raz(N)
        assert len(sysr.equations) == N
        for k, terms in sysr.equations:
            scalars = {t.scalar for t in terms if t.side == "RHS"}
            if 1 <= k <= N - 1:
                assert Fraction(k) in scalars
            if k >= 2:
                assert Fraction(N + 1 - k) in scalars


def test_mask_reduction_n4_triple_root():
    sysr = build_raz(4, [2, 3])
    assert len(sysr.equations) == 2
    assert sysr.unknowns == ["a1", "g12"]
    assert list(sysr.equation(2)) == parse_equation("a1_x2 + g12*a1_x1 = 3*a1*g12_x1")
    with pytest.raises(KeyError):
        sysr.equation(3)


@pytest.mark.parametrize("N,mask", [(1, ()), (3, (0,)), (3, (3,)), (3, (1, 2))])
def test_build_raz_rejects(N, mask):
    with pytest.raises(ValueError):
        build_raz(N, mask)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_mirror_symmetry(N):
    """a_k <-> a_(N-k) with x1 <-> x2 maps equation k to equation N+1-k."""
    def mirror(t):
        swap = {"x1": "x2", "x2": "x1"}
        ren = lambda s: f"a{N - int(s[1:])}" if s.startswith("a") else s
        return RazTerm(t.side, t.scalar, ren(t.factor), ren(t.derivative_of), swap[t.wrt])

    sysr = build_raz(N)
    for k, terms in sysr.equations:
        assert sorted(mirror(t) for t in terms) == list(sysr.equation(N + 1 - k))


def test_residual_constant_fields_zero():
    g = Grid2D(8, 8, 0.1, 0.1)
    res = raz_residual(build_raz(3), {1: ScalarField2D.constant(g, 2.0), 2: ScalarField2D.constant(g, -1.0)},
                       ScalarField2D.constant(g, 0.4))
    assert max(r.max_abs() for r in res) < 1e-13


def test_residual_n2_linear_a1():
    g = Grid2D(8, 9, 0.1, 0.2, x0=-0.3)
    zero = ScalarField2D.constant(g, 0.0)
    res = raz_residual(build_raz(2), {1: ScalarField2D.constant(g, 3.0)}, zero)
    assert max(r.max_abs() for r in res) < 1e-13
    res = raz_residual(build_raz(2), {1: ScalarField2D.from_function(g, lambda x, y: x + 0 * y)}, zero)
    np.testing.assert_allclose(res[0].values, 1.0, atol=1e-12)
    np.testing.assert_allclose(res[1].values, 0.0, atol=1e-12)


def test_residual_missing_field():
    g = Grid2D(8, 8, 0.1, 0.1)
    with pytest.raises(KeyError, match="a_2"):
        raz_residual(build_raz(3), {1: ScalarField2D.constant(g, 1.0)}, ScalarField2D.constant(g, 0.0))


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
def test_bracket_equivalence_random_fields(N, rng):
    g = periodic_grid(32)
    a = {k: smooth_random_field(g, rng) for k in range(1, N)}
    assert bracket_equivalence(N, a, smooth_random_field(g, rng, amp=0.4)) < 1e-12


def test_bracket_equivalence_masked_and_constant(rng):
    g = periodic_grid(32)
    a = {k: smooth_random_field(g, rng) for k in range(1, 4)}
    assert bracket_equivalence(4, a, smooth_random_field(g, rng, amp=0.4), zero_mask=(1, 3)) < 1e-12
    for N in range(2, 7):
        const = {k: ScalarField2D.constant(g, float(k)) for k in range(1, N)}
        assert bracket_equivalence(N, const, ScalarField2D.constant(g, 0.2)) < 1e-15


def test_render_and_json():
    sysr = build_raz(3)
    text = render_system(sysr)
    assert text.count("[k=") == 3
    js = json.loads(json.dumps(system_to_json(sysr)))
    assert js["N"] == 3 and len(js["equations"]) == 3
    assert list(js["equations"][0]["terms"][0].keys()) == ["side", "scalar", "factor", "derivative_of", "wrt"]
