import json

import numpy as np
import pytest

from hydrogeo.fields import FieldError, Grid2D, ScalarField1D, ScalarField2D, partial, partial1d

from _support import TWO_PI, periodic_grid, smooth_random_field


def sine_error(n):
    L = 3.0
    g = Grid2D(n, 8, L / n, 0.1, periodic_x=True)
    f = ScalarField2D.from_function(g, lambda x, y: np.sin(TWO_PI * x / L) + 0 * y)
    exact = (TWO_PI / L) * np.cos(TWO_PI * g.mesh()[0] / L)
    return np.max(np.abs(partial(f, 1).values - exact))


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid2D(3, 8, 0.1, 0.1)
    with pytest.raises(ValueError):
        Grid2D(8, 8, -0.1, 0.1)


def test_field_shape_must_match_grid():
    g = Grid2D(8, 6, 0.1, 0.1)
    with pytest.raises(FieldError):
        ScalarField2D(g, np.zeros((6, 8)))


def test_fields_are_immutable():
    f = ScalarField2D.constant(Grid2D(8, 8, 0.1, 0.1), 1.0)
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0


@pytest.mark.parametrize("axis", [1, 2])
def test_partial_of_constant_is_zero(axis):
    f = ScalarField2D.constant(Grid2D(10, 12, 0.3, 0.2), 4.2)
    assert partial(f, axis).max_abs() < 1e-13


def test_partial_sine_second_order():
    errs = [sine_error(n) for n in (32, 64, 128)]
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5
    # C from the finest pair bounds the coarse error
    C = errs[2] / (3.0 / 128) ** 2
    assert errs[0] <= 1.1 * C * (3.0 / 32) ** 2


def test_partial_exact_on_quadratic_nonperiodic():
    g = Grid2D(9, 11, 0.25, 0.2, x0=-1.0, y0=0.5)
    f = ScalarField2D.from_function(g, lambda x, y: x * y)
    np.testing.assert_allclose(partial(f, 2).values, g.mesh()[0], atol=1e-13)
    q = ScalarField2D.from_function(g, lambda x, y: x * x)
    np.testing.assert_allclose(partial(q, 1).values, 2 * g.mesh()[0], atol=1e-12)


def test_partial_linearity(rng):
    g = periodic_grid(32)
    f, h = smooth_random_field(g, rng), smooth_random_field(g, rng)
    lhs = partial(2.5 * f - 0.7 * h, 1)
    rhs = 2.5 * partial(f, 1) - 0.7 * partial(h, 1)
    np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-12)


def test_partial_bad_axis():
    with pytest.raises(ValueError):
        partial(ScalarField2D.constant(Grid2D(8, 8, 1, 1), 0.0), 3)


def test_partial1d_examples():
    c = ScalarField1D(16, 0.1, np.full(16, 3.0))
    assert np.max(np.abs(partial1d(c).values)) == 0.0
    ramp = ScalarField1D(16, 0.1, 2.0 + 0.7 * np.arange(16) * 0.1, periodic=False)
    np.testing.assert_allclose(partial1d(ramp).values, 0.7, atol=1e-13)
    errs = []
    for n in (32, 64, 128):
        s = ScalarField1D.from_function(n, TWO_PI / n, np.sin)
        errs.append(np.max(np.abs(partial1d(s).values - np.cos(s.x))))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_partial1d_periodic_integral_vanishes(rng):
    n = 50
    s = ScalarField1D(n, 0.2, rng.normal(size=n))
    assert abs(partial1d(s).integral()) < 1e-13


def test_csv_roundtrip_and_header():
    g = Grid2D(5, 4, 0.5, 0.25, x0=1.0, y0=-2.0, periodic_x=True)
    f = ScalarField2D.from_function(g, lambda x, y: np.exp(x) * np.cos(y))
    text = f.to_csv()
    assert text.splitlines()[0] == "# nx,ny,dx,dy,x0,y0,periodic_x,periodic_y"
    back = ScalarField2D.from_csv(text)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_csv_rejects_dimension_mismatch():
    g = Grid2D(5, 4, 0.5, 0.25)
    lines = ScalarField2D.constant(g, 1.0).to_csv().splitlines()
    with pytest.raises(FieldError):
        ScalarField2D.from_csv("\n".join(lines[:-1]))
    lines[-1] = lines[-1] + ",1.0"
    with pytest.raises(FieldError):
        ScalarField2D.from_csv("\n".join(lines))


def test_json_roundtrip(tmp_path):
    g = Grid2D(6, 5, 0.1, 0.2, periodic_y=True)
    f = ScalarField2D.from_function(g, lambda x, y: x - y * y)
    obj = json.loads(json.dumps(f.to_json()))
    back = ScalarField2D.from_json(obj)
    np.testing.assert_array_equal(back.values, f.values)
    bad = dict(obj, values=obj["values"][:-1])
    with pytest.raises(FieldError):
        ScalarField2D.from_json(bad)


def test_1d_csv_json_roundtrip(tmp_path):
    s = ScalarField1D(10, 0.3, np.linspace(-1, 1, 10), x0=0.5, periodic=False)
    p = tmp_path / "s.csv"
    p.write_text(s.to_csv())
    back = ScalarField1D.from_csv(p)
    np.testing.assert_array_equal(back.values, s.values)
    assert back.periodic is False and back.x0 == 0.5
    back2 = ScalarField1D.from_json(s.to_json())
    np.testing.assert_array_equal(back2.values, s.values)
