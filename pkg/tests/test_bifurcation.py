import numpy as np
import pytest

from foodchain.bifurcation import (Criticality, NotFoundError, find_hopf, find_hopf_values,
                                   find_saddle_node, find_transcritical, hopf_function,
                                   sn_transversality, tangency_residual, tc_transversality,
                                   thresholds)
from foodchain.equilibria import boundary_point, interior_equilibria, upper_interior
from foodchain.model import jacobian

REFERENCE = {
    "holling2": {"sn": 0.1049651383, "tc": 0.09244019, "h": (0.10406993, 0.09453397)},
    "ivlev": {"sn": 0.10405163, "tc": 0.09544625, "h": (0.10275556, 0.09840295)},
}


def ref(params):
    return REFERENCE[params.f1.kind.value]


def test_saddle_node_value(family):
    d2s, point = find_saddle_node(family)
    assert d2s == pytest.approx(ref(family)["sn"], abs=1e-6)
    x, y, z = point
    p = family.with_d2(d2s)
    assert 1 - 2 * x - y * p.f1.deriv(x) == pytest.approx(0.0, abs=1e-8)
    assert abs(tangency_residual(family, d2s)) < 1e-10


def test_saddle_node_holling_tight(holling):
    assert find_saddle_node(holling)[0] == pytest.approx(0.1049651383, abs=1e-8)


def test_saddle_node_simple_zero_eigenvalue(family):
    d2s, point = find_saddle_node(family)
    lam = np.linalg.eigvals(jacobian(family.with_d2(d2s), point))
    order = np.argsort(np.abs(lam))
    assert abs(lam[order[0]]) < 1e-6
    assert np.all(np.abs(lam[order[1:]].real) > 1e-6)


def test_saddle_node_transversality(family):
    d2s, point = find_saddle_node(family)
    q1, q2 = sn_transversality(family.with_d2(d2s), point)
    assert q1 < 0 and abs(q2) > 1e-6
    if family.f1.kind.value == "holling2":
        assert abs(q1) > 0.1 and abs(q2) > 0.1


def test_saddle_node_bad_interval(holling):
    with pytest.raises(NotFoundError):
        find_saddle_node(holling, search=(0.01, 0.02))


def test_transcritical_closed_form(family):
    d2t = find_transcritical(family)
    assert d2t == pytest.approx(ref(family)["tc"], abs=1e-6)
    xb, yb = boundary_point(family)
    assert d2t == pytest.approx(family.f2(yb), abs=1e-15)


def test_transcritical_holling_tight(holling):
    assert find_transcritical(holling) == pytest.approx(0.09244019, abs=1e-8)


def test_transcritical_branch_crossing(family):
    d2t = find_transcritical(family)
    pts = interior_equilibria(family.with_d2(d2t + 1e-6))
    assert len(pts) == 2
    lower = pts[0]
    assert family.f1(lower.coords[0]) - family.d1 == pytest.approx(0.0, abs=1e-4)
    # brute-force count change across the threshold
    grid = np.linspace(d2t - 1e-4, d2t + 1e-4, 201)
    counts = [len(interior_equilibria(family.with_d2(float(d)))) for d in grid]
    i = counts.index(2)
    assert counts[i - 1] == 1
    # the change happens between two neighbouring grid points (spacing 1e-6)
    assert grid[i - 1] <= d2t + 1e-12 and grid[i] >= d2t - 1e-12


def test_transcritical_transversality(family):
    a, b, c = tc_transversality(family)
    assert a == 0.0
    assert b < 0
    assert abs(c) > 1e-6


def test_transcritical_requires_boundary(holling):
    from dataclasses import replace
    with pytest.raises(NotFoundError):
        find_transcritical(replace(holling, d1=0.9))


def test_hopf_values_and_coefficient_signs(family):
    roots = find_hopf_values(family)
    assert len(roots) == 2
    for got, want in zip(roots, ref(family)["h"]):
        assert got == pytest.approx(want, abs=1e-6)
    for d in roots:
        delta, p0, p2 = hopf_function(family, d)
        assert abs(delta) < 1e-9 and p0 > 0 and p2 > 0
        lam = np.linalg.eigvals(jacobian(family.with_d2(d), upper_interior(family.with_d2(d)).coords))
        pair = lam[np.abs(lam.imag) > 1e-8]
        assert len(pair) == 2 and np.all(np.abs(pair.real) < 1e-6)


def test_hopf_none_on_lower_branch(family):
    # Delta on the lower branch never yields an admissible root since P0 < 0 there
    from foodchain.model import char_coeffs
    d2t = find_transcritical(family)
    d2s, _ = find_saddle_node(family)
    for d in np.linspace(d2t + 1e-5, d2s - 1e-5, 100):
        p = family.with_d2(float(d))
        lower = interior_equilibria(p)[0]
        assert char_coeffs(p, lower.coords).P0 < 0


def test_hopf_criticality(family):
    hopf = find_hopf(family)
    assert [c for _, c in hopf] == [Criticality.SUB, Criticality.SUPER]


def test_threshold_report(family):
    rep = thresholds(family, classify=False)
    r = ref(family)
    assert rep.d2_sn == pytest.approx(r["sn"], abs=1e-6)
    assert rep.d2_tc == pytest.approx(r["tc"], abs=1e-6)
    hs = [d for d, _ in rep.d2_hopf]
    assert rep.d2_tc < min(hs) <= max(hs) < rep.d2_sn
    for i in range(len(hs)):
        assert abs(rep.transversality[f"hopf{i}_dDelta_dd2"]) > 1e-6
    d = rep.to_dict()
    import json
    assert json.loads(json.dumps(d)) == d
    assert {h["criticality"] for h in d["d2_hopf"]} == {"undetermined"}
