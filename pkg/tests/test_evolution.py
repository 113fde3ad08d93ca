import numpy as np
import pytest

from hydrogeo.evolution import (EvolutionConfig, conservation_report, evolve_diagonal, evolve_uno,
                                moment_chain_residual, n2_closure, quasilinear_rhs, rhs_uno)
from hydrogeo.fields import diff_axis
from hydrogeo.riemann import HydroSnapshot, riemann_from_state, stack_series

from _support import TWO_PI, evolved_n2, evolved_n3, lw_config, n3_initial, ratios


def grid_x(n):
    return np.arange(n) * TWO_PI / n


def test_rhs_constant_snapshot():
    s = HydroSnapshot.from_arrays(np.full(16, 2.0), [np.full(16, 0.3), np.full(16, -1.0)], 0.1)
    adot, bdot = rhs_uno(s)
    assert np.max(np.abs(adot)) == 0.0 and np.max(np.abs(bdot)) == 0.0


def test_rhs_hand_evaluation():
    errs = []
    for n in (64, 128):
        x = grid_x(n)
        s = HydroSnapshot.from_arrays(np.ones(n), [np.sin(x)], x[1])
        adot, (bdot,) = rhs_uno(s)
        errs.append(max(np.max(np.abs(adot - 2 * np.cos(x))), np.max(np.abs(bdot - np.sin(x) * np.cos(x)))))
    assert errs[1] < errs[0] / 3.5


def test_quasilinear_form_matches_literal_rhs():
    errs = []
    for n in (64, 128):
        s = n3_initial(n)
        adot, bdot = rhs_uno(s)
        u = np.vstack([s.a.values, s.b_values])
        ux = diff_axis(u, s.a.dx, 1, True)
        out = quasilinear_rhs(u, ux)
        errs.append(max(np.max(np.abs(out[0] - adot)), np.max(np.abs(out[1:] - np.array(bdot)))))
    assert errs[1] < errs[0] / 3.5


def test_rhs_in_riemann_variables():
    """dr/dy via the chain rule equals μ r_x to O(dx²)."""
    errs = []
    for n in (64, 128):
        s = n3_initial(n)
        adot, bdot = rhs_uno(s)
        u = np.vstack([s.a.values, s.b_values])
        udot = np.vstack([adot, bdot])
        h = 1e-6
        rp = riemann_from_state(u[0] + h * udot[0], u[1:] + h * udot[1:]).r
        rm = riemann_from_state(u[0] - h * udot[0], u[1:] - h * udot[1:]).r
        ry = (rp - rm) / (2 * h)
        rd = riemann_from_state(u[0], u[1:])
        rx = diff_axis(rd.r, s.a.dx, 1, True)
        errs.append(np.max(np.abs(ry - rd.mu * rx)))
    assert errs[1] < errs[0] / 3.5


@pytest.mark.parametrize("scheme", ["lax_friedrichs", "lax_wendroff", "upwind_diagonal"])
def test_constant_data_is_fixed_point(scheme):
    s = HydroSnapshot.from_arrays(np.full(32, 1.5), [np.full(32, 0.4)], 0.2)
    res = evolve_uno(s, EvolutionConfig(y_end=0.5, scheme=scheme, output_dy=0.1))
    assert not res.halted
    for snap in res.snapshots:
        np.testing.assert_allclose(snap.a.values, 1.5, rtol=1e-14)
        np.testing.assert_allclose(snap.b[0].values, 0.4, rtol=1e-14)
    assert res.report.mass_drift < 1e-14


def test_outputs_equally_spaced():
    res = evolved_n3(64)
    ys = np.array([s.y for s in res.snapshots])
    np.testing.assert_allclose(np.diff(ys), 0.05, rtol=1e-12)
    assert abs(ys[-1] - 0.5) < 1e-12


def test_mass_drift_quarters_with_lax_wendroff():
    drifts = [evolved_n3(n).report.mass_drift for n in (64, 128, 256)]
    assert np.all(ratios(drifts) >= 3.5)


def test_mass_drift_lax_friedrichs_converges():
    drifts = []
    for n in (64, 128, 256):
        res = evolve_uno(n3_initial(n), EvolutionConfig(y_end=0.5, scheme="lax_friedrichs", output_dy=0.05 * 64 / n))
        drifts.append(res.report.mass_drift)
    assert np.all(ratios(drifts) >= 1.8)


def test_diagonal_residual_second_order():
    errs = []
    for n in (64, 128, 256):
        series = evolved_n3(n).snapshots
        r = [stack_series(series, lambda s, k=k: riemann_from_state(s.a.values, s.b_values).r[k]) for k in range(3)]
        mu = [stack_series(series, lambda s, k=k: riemann_from_state(s.a.values, s.b_values).mu[k]) for k in range(3)]
        e = 0.0
        for rk, mk in zip(r, mu):
            g = rk.grid
            res = diff_axis(rk.values, g.dy, 1, False) - mk.values * diff_axis(rk.values, g.dx, 0, True)
            e = max(e, np.max(np.abs(res)))
        errs.append(e)
    assert np.all(ratios(errs) > 3.5)


def test_moment_chain_constants_and_corruption():
    x = grid_x(32)
    const = [HydroSnapshot.from_arrays(np.full(32, 1.2), [np.full(32, 0.1), np.full(32, 0.7)], x[1], y=0.1 * j)
             for j in range(5)]
    chain = moment_chain_residual(const, 2)
    assert max(np.max(v) for v in chain.values()) < 1e-13
    series = evolved_n3(64).snapshots
    rng = np.random.default_rng(3)
    bad = [s.replace(s.a.values, s.b_values + 0.05 * rng.normal(size=s.b_values.shape), s.y) for s in series]
    assert max(np.max(v) for v in moment_chain_residual(bad, 2).values()) > 0.1


def test_equal_roots_stay_equal():
    x = grid_x(64)
    s = HydroSnapshot.from_arrays(1 + 0.1 * np.cos(x), [0.2 * np.sin(x), 0.2 * np.sin(x)], x[1])
    res = evolve_uno(s, lw_config(64, 0.5))
    for snap in res.snapshots:
        np.testing.assert_array_equal(snap.b[0].values, snap.b[1].values)


def test_permutation_equivariance():
    x = grid_x(64)
    b1, b2 = 0.2 * np.sin(x), -0.1 + 0.15 * np.cos(2 * x)
    a = 1 + 0.1 * np.cos(x)
    r12 = evolve_uno(HydroSnapshot.from_arrays(a, [b1, b2], x[1]), lw_config(64, 0.3))
    r21 = evolve_uno(HydroSnapshot.from_arrays(a, [b2, b1], x[1]), lw_config(64, 0.3))
    for s, t in zip(r12.snapshots, r21.snapshots):
        np.testing.assert_allclose(s.b[0].values, t.b[1].values, atol=1e-14)
        np.testing.assert_allclose(s.a.values, t.a.values, atol=1e-14)


def test_large_data_halts_with_positive_states():
    """Large data steepen while a dips towards 0; the run stops before a goes non-positive."""
    x = grid_x(128)
    s = HydroSnapshot.from_arrays(1 + 0.5 * np.cos(x), [1.0 * np.sin(x), 1.5 + np.cos(x)], x[1])
    res = evolve_uno(s, EvolutionConfig(y_end=5.0, scheme="lax_wendroff", output_dy=0.05))
    assert res.halted and res.reason in ("a lost positivity", "gradient catastrophe")
    assert 3.0 < res.snapshots[-1].y < 5.0
    assert min(np.min(t.a.values) for t in res.snapshots) > 0


@pytest.mark.parametrize("inject,reason", [
    (lambda u: u + np.nan, "non-finite values"),
    (lambda u: np.vstack([-np.abs(u[:1]), u[1:]]), "a lost positivity"),
    (lambda u: np.vstack([u[:1], u[1:] + np.where(np.arange(u.shape[1]) == 5, 5.0, 0.0)]), "gradient catastrophe"),
])
def test_halt_keeps_last_good_state(monkeypatch, inject, reason):
    import hydrogeo.evolution as ev

    calls = {"n": 0}
    real = ev._step_lw

    def step(u, dy, dx, eps):
        calls["n"] += 1
        out = real(u, dy, dx, eps)
        return inject(out) if calls["n"] > 6 else out

    monkeypatch.setattr(ev, "_step_lw", step)
    s = n3_initial(32)
    res = evolve_uno(s, EvolutionConfig(y_end=1.0, scheme="lax_wendroff", output_dy=0.1, shock_factor=10))
    assert res.halted and res.reason == reason
    assert 1 <= len(res.snapshots) < 11
    last = res.snapshots[-1]
    assert np.all(np.isfinite(last.a.values)) and np.min(last.a.values) > 0


def test_evolve_rejects_nonperiodic_and_bad_config():
    s = HydroSnapshot.from_arrays(np.ones(16), [np.zeros(16)], 0.1, periodic=False)
    with pytest.raises(ValueError):
        evolve_uno(s, EvolutionConfig(y_end=1.0))
    for kw in ({"scheme": "rk4"}, {"cfl": 1.5}, {"output_every": 0}, {"dissipation": -1.0}):
        with pytest.raises(ValueError):
            EvolutionConfig(y_end=1.0, **kw)
    with pytest.raises(ValueError):
        EvolutionConfig(y_end=0.0)
    with pytest.raises(ValueError):
        evolve_uno(n3_initial(32), EvolutionConfig(y_end=0.1, scheme="upwind_diagonal"))


def test_diagonal_constant_is_stationary():
    r0 = np.vstack([np.full(32, -0.4), np.full(32, 0.6)])
    res = evolve_diagonal(r0, n2_closure, EvolutionConfig(y_end=1.0, output_dy=0.25), dx=0.1)
    np.testing.assert_array_equal(res.r[-1], r0)
    np.testing.assert_allclose(res.y, [0, 0.25, 0.5, 0.75, 1.0])


def test_conservation_report_json():
    rep = evolved_n3(64).report
    js = rep.to_json()
    for key in ("mass_drift", "second_density_drift", "y", "mass", "moment_chain"):
        assert key in js
    again = conservation_report(evolved_n3(64).snapshots, 2)
    assert again.mass_drift == rep.mass_drift
