import numpy as np
import pytest

from qclab import volume
from qclab.geodesics import build_flow_graph
from qclab.spaces import get_space
from qclab.volume import ball_volume, doubling_ratios, fit_loglog, growth_curve, growth_exponent

H = get_space("heisenberg")
RT = get_space("rototranslation")
E3 = get_space("euclidean3")


def test_single_cell_volume():
    g = build_flow_graph(E3, [0, 0, 0], 0.6, 0.1)
    cell = float(np.prod(g.build_params.spacing))
    assert ball_volume(g, g.basepoint, 1e-6) == pytest.approx(cell)


def test_euclid_ball_volume_oracle():
    # closed-form Euclidean ball volume 4 pi / 3
    g = volume._ball_graph(E3, [0, 0, 0], 1.0, 14, 4, 3_000_000)
    v = ball_volume(g, g.basepoint, 1.0)
    assert v == pytest.approx(4.0 * np.pi / 3.0, rel=0.05)


def test_ball_volume_coverage_guard():
    g = build_flow_graph(E3, [0, 0, 0], 1.0, 0.1)
    with pytest.raises(ValueError):
        ball_volume(g, g.basepoint, 2.0)


def test_volume_monotone_in_radius():
    g = build_flow_graph(H, [0, 0, 0], 1.0, 0.08)
    from qclab.geodesics import graph_distance

    d = graph_distance(g, g.basepoint)
    vols = [ball_volume(g, g.basepoint, r, distances=d) for r in (0.25, 0.5, 0.75, 1.0)]
    assert all(a <= b for a, b in zip(vols, vols[1:]))


def test_fit_loglog_validates():
    with pytest.raises(ValueError):
        fit_loglog([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_loglog([1.0, 2.0, 3.0], [1.0, -2.0, 3.0])


def test_growth_exponent_single_graph_euclid():
    g = build_flow_graph(E3, [0, 0, 0], 1.0, 1.0 / 16, stencil_level=3)
    fit = growth_exponent(g, g.basepoint, [0.25, 0.5, 1.0])
    assert fit.exponent == pytest.approx(3.0, abs=0.35)


def test_euclid_growth_curve():
    fit, rows = growth_curve(E3, [0, 0, 0], [1.0, 2.0, 4.0], cells_per_radius=12,
                             stencil_level=3)
    assert fit.exponent == pytest.approx(3.0, abs=0.2)
    assert [r["radius"] for r in rows] == [1.0, 2.0, 4.0]


def test_heisenberg_growth_quartic():
    radii = [0.5, 1.0, 2.0, 4.0]
    fit, _ = growth_curve(H, [0, 0, 0], radii, cells_per_radius=12)
    assert fit.exponent == pytest.approx(4.0, abs=0.3)


def test_rt_small_scale_quartic():
    radii = [0.1, 0.2, 0.4, 0.5]
    fit, _ = growth_curve(RT, [0, 0, 0], radii, cells_per_radius=16)
    assert fit.exponent == pytest.approx(4.0, abs=0.4)


def test_rt_large_scale_cubic():
    radii = [8.0, 16.0, 32.0]
    fit, rows = growth_curve(RT, [0, 0, 0], radii, cells_per_radius=12)
    assert fit.exponent == pytest.approx(3.0, abs=0.4)
    # testable relaxation of the upper growth bound with N = 3 < Q = 4
    C = 1.05 * max(r["volume"] / r["radius"] ** 3.5 for r in rows)
    assert all(r["volume"] <= C * r["radius"] ** 3.5 for r in rows)


def test_doubling_windows():
    lo, hi = 2.0 ** 3.2, 2.0 ** 4.8
    for ratio in doubling_ratios(H, [0, 0, 0], [0.25, 0.5], cells_per_radius=12):
        assert lo <= ratio <= hi
    for ratio in doubling_ratios(RT, [0, 0, 0], [0.1, 0.2], cells_per_radius=12):
        assert lo <= ratio <= hi


def test_growth_fit_serializes():
    fit, _ = growth_curve(E3, [0, 0, 0], [0.5, 1.0, 2.0], cells_per_radius=10,
                          stencil_level=2)
    d = fit.to_dict()
    assert set(d) == {"radii", "volumes", "exponent", "intercept", "residual"}
