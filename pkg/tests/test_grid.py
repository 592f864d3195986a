import io
import json
import math

import numpy as np
import pytest

from angiosim.errors import DomainConfigError
from angiosim.grid import (
    const_field,
    field_from_callable,
    field_from_csv,
    field_to_csv,
    grid_from_json,
    grid_to_json,
    integrate,
    make_field,
    make_grid,
    norm,
)


def test_make_grid_nodes():
    g = make_grid(1.0, 5)
    assert np.allclose(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert g.gamma1_index == 0
    assert g.gamma2_index == 4


def test_make_grid_spacing():
    assert make_grid(1.0, 3).h == 0.5
    assert make_grid(2.0, 1025).h == 2.0 / 1024


def test_grid_nodes_equispaced_and_immutable():
    g = make_grid(3.7, 101)
    dx = np.diff(g.nodes)
    assert dx.min() > 0
    assert np.allclose(dx, g.h, rtol=0, atol=8 * np.finfo(float).eps * g.L)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0


@pytest.mark.parametrize("L, n", [(0.0, 5), (-1.0, 5), (1.0, 2), (1.0, 1), (math.inf, 5)])
def test_make_grid_rejects_bad_domains(L, n):
    with pytest.raises(DomainConfigError):
        make_grid(L, n)


def test_field_validation(grid65):
    with pytest.raises(ValueError):
        make_field(grid65, np.ones(7))
    bad = np.ones(grid65.n)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        make_field(grid65, bad)


def test_integrate_constant_and_affine():
    g = make_grid(1.0, 17)
    assert integrate(const_field(g, 1.0)) == pytest.approx(1.0, abs=1e-15)
    assert integrate(field_from_callable(g, lambda x: x)) == pytest.approx(0.5, abs=1e-15)


def test_integrate_quadratic(grid1025):
    f = field_from_callable(grid1025, lambda x: x * x)
    assert integrate(f) == pytest.approx(1.0 / 3.0, abs=1e-6)


def test_integrate_linearity():
    g = make_grid(2.0, 33)
    rng = np.random.default_rng(7)
    f = make_field(g, rng.normal(size=g.n))
    h = make_field(g, rng.normal(size=g.n))
    a, b = 2.5, -1.25
    combo = make_field(g, a * f.values + b * h.values)
    assert integrate(combo) == pytest.approx(
        a * integrate(f) + b * integrate(h), rel=1e-13, abs=1e-13
    )


def test_integrate_refinement_order():
    exact = 1.0 / 3.0
    errs = []
    for n in (33, 65, 129):
        g = make_grid(1.0, n)
        errs.append(abs(integrate(field_from_callable(g, lambda x: x * x)) - exact))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_norm_zero_and_constant():
    g = make_grid(1.0, 9)
    z = const_field(g, 0.0)
    assert norm(z, "L2") == 0.0
    assert norm(z, "Linf") == 0.0
    two = const_field(g, 2.0)
    assert norm(two, "L2") == pytest.approx(2.0, abs=1e-14)
    assert norm(two, "Linf") == 2.0


def test_norm_sine(grid1025):
    f = field_from_callable(grid1025, lambda x: np.sin(np.pi * x))
    assert norm(f, "L2") == pytest.approx(math.sqrt(0.5), abs=1e-6)


def test_norm_rejects_unknown_kind(grid65):
    with pytest.raises(ValueError):
        norm(const_field(grid65, 1.0), "L7")


def test_field_csv_round_trip(grid65):
    f = field_from_callable(grid65, lambda x: np.cos(3 * x) + 0.1)
    buf = io.StringIO()
    field_to_csv(f, buf)
    buf.seek(0)
    g = field_from_csv(grid65, buf)
    assert np.array_equal(f.values, g.values)


def test_grid_json_round_trip():
    g = make_grid(2.5, 41)
    g2 = grid_from_json(grid_to_json(g))
    assert g2.L == g.L and g2.n == g.n
    assert json.loads(grid_to_json(g)) == {"L": 2.5, "n": 41}
