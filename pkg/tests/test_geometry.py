"""Wedge construction, coordinate maps, and mesh generation."""

import numpy as np
import pytest

import cornergl as cg
from cornergl.errors import InvalidGeometry, MeshFailure, OutsideDomain
from cornergl.geometry import minus_patch_to_cartesian, patch_coords_arrays

RNG = np.random.default_rng(42)


def test_flat_wedge_is_rectangle():
    g = cg.build_wedge(np.pi, 8.0, 4.0, 0.0)
    v = g.vertices
    assert np.allclose(v["A"], [-8, 0], atol=1e-12)
    assert np.allclose(v["B"], [8, 0])
    assert np.allclose(v["C"], [-8, 4], atol=1e-12)
    assert np.allclose(v["E"], [8, 4])
    assert np.allclose(v["D"], [0, 4], atol=1e-12)
    assert g.area() == pytest.approx(64.0)


def test_inner_corner_against_line_intersection():
    # independent oracle: D solves the 2x2 linear system of the two inner
    # offset lines  y = ell  and  x sin(beta) - y cos(beta) = ell
    beta, L, ell = np.pi - 0.2, 8.0, 4.0
    g = cg.build_wedge(beta, L, ell, 0.1)
    A = np.array([[0.0, 1.0], [np.sin(beta), -np.cos(beta)]])
    D_oracle = np.linalg.solve(A, np.array([ell, ell]))
    assert np.allclose(g.vertices["D"], D_oracle, atol=1e-12)
    assert np.hypot(*g.vertices["D"]) == pytest.approx(ell / np.cos(0.1), abs=1e-12)


def test_layer_constraint_rejected():
    # ell <= tan(beta/2) L: at beta = pi/6, tan(pi/12)*8 ~ 2.14 < 4
    with pytest.raises(InvalidGeometry):
        cg.build_wedge(np.pi / 6, 8.0, 4.0, 0.1)
    with pytest.raises(InvalidGeometry):
        cg.build_wedge(0.0, 8.0, 4.0, 0.1)
    with pytest.raises(InvalidGeometry):
        cg.build_wedge(np.pi - 0.2, 8.0, 4.0, 2.0)   # gamma >= beta/2


def test_vertex_coordinates():
    g = cg.build_wedge(np.pi - 0.2, 8.0, 4.0, 0.1)
    pc, pol = cg.map_coordinates(g, (0.0, 0.0))
    assert pc.s == 0.0 and pc.t == 0.0
    assert pol.rho == 0.0


def test_normal_coordinate_continuous_on_bisectrix():
    for beta in (np.pi - 0.2, np.pi + 0.2):
        g = cg.build_wedge(beta, 8.0, 4.0, 0.1)
        th = g.theta_bis
        for rho in (0.5, 2.0, 3.9):
            x, y = rho * np.cos(th), rho * np.sin(th)
            _, tp, _, tm = patch_coords_arrays(g, x, y)
            assert abs(tp - tm) <= 1e-12
            pc, _ = cg.map_coordinates(g, (x, y))
            assert pc.patch == "plus"   # tie-break convention


def test_polar_tubular_roundtrip():
    g = cg.build_wedge(np.pi - 0.2, 8.0, 4.0, 0.1)
    d = g.delta_signed
    for _ in range(50):
        rho = RNG.uniform(0.1, 4.0)
        theta = RNG.uniform(0.0, g.beta)
        x, y = rho * np.cos(theta), rho * np.sin(theta)
        try:
            pc, pol = cg.map_coordinates(g, (x, y))
        except OutsideDomain:
            continue
        assert pol.rho == pytest.approx(rho, abs=1e-12)
        if pc.patch == "plus":
            assert pc.s == pytest.approx(rho * np.cos(theta), abs=1e-12)
            assert pc.t == pytest.approx(rho * np.sin(theta), abs=1e-12)
        else:
            assert pc.s == pytest.approx(rho * np.cos(theta + d), abs=1e-12)
            assert pc.t == pytest.approx(rho * np.sin(theta + d), abs=1e-12)


def test_patch_maps_are_isometries():
    g = cg.build_wedge(np.pi - 0.3, 8.0, 4.0, 0.1)
    # finite-difference stencil of the patch maps at sampled points
    eps = 1e-6
    for x0, y0 in [(-3.0, 1.0), (-1.0, 2.0), (-5.0, 0.5)]:
        grads = []
        for dx, dy in [(eps, 0.0), (0.0, eps)]:
            sp0, tp0, sm0, tm0 = patch_coords_arrays(g, x0, y0)
            sp1, tp1, sm1, tm1 = patch_coords_arrays(g, x0 + dx, y0 + dy)
            grads.append([(sm1 - sm0) / eps, (tm1 - tm0) / eps])
        gs = np.array(grads).T   # rows: grad s, grad t
        assert np.linalg.norm(gs[0]) == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.norm(gs[1]) == pytest.approx(1.0, abs=1e-9)
        assert abs(gs[0] @ gs[1]) <= 1e-9


def test_outside_domain_rejected():
    g = cg.build_wedge(np.pi - 0.2, 8.0, 4.0, 0.1)
    with pytest.raises(OutsideDomain):
        cg.map_coordinates(g, (0.0, -1.0))
    with pytest.raises(OutsideDomain):
        cg.map_coordinates(g, (0.0, 5.0))
    with pytest.raises(OutsideDomain):
        cg.map_coordinates(g, (9.0, 1.0))


def test_strip_mesh_structure():
    g = cg.build_wedge(np.pi, 8.0, 4.0, 0.0)
    m = cg.generate_mesh(g, 0.5)
    assert m.n_nodes == (2 * 16 + 1) * (8 + 1)
    assert len(m.triangles) == 2 * 32 * 8
    assert m.areas().sum() == pytest.approx(64.0, rel=1e-12)


@pytest.mark.parametrize("beta", [np.pi - 0.2, np.pi + 0.2, np.pi - 0.05])
def test_mesh_area_identity(beta):
    g = cg.build_wedge(beta, 8.0, 4.0, 0.1)
    m = cg.generate_mesh(g, 0.25)
    delta = np.pi - beta
    expect = 2 * 8.0 * 4.0 - 4.0**2 * np.tan(delta / 2)
    assert m.areas().sum() == pytest.approx(expect, rel=1e-10)
    assert np.all(m.areas() > 0)
    assert m.min_angle_deg() >= 20.0


def test_boundary_tags_match_polygon_sides():
    # independent scan: free edges (adjacent to one triangle) classified by
    # distance to the polygon sides must match the assigned tags
    beta = np.pi - 0.2
    g = cg.build_wedge(beta, 8.0, 4.0, 0.1)
    m = cg.generate_mesh(g, 0.25)

    from collections import Counter
    edge_count = Counter()
    for tri in m.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edge_count[frozenset((int(a), int(b)))] += 1
    free = {e for e, c in edge_count.items() if c == 1}
    tagged = {frozenset((a, b)) for a, b, _ in m.boundary_edges}
    assert free == tagged

    tags = {frozenset((a, b)): tag for a, b, tag in m.boundary_edges}
    v = g.vertices
    for e in free:
        mid = m.nodes[list(e)].mean(axis=0)
        d_out = min(_seg_dist(mid, v["V"], v["B"]), _seg_dist(mid, v["V"], v["A"]))
        d_in = min(_seg_dist(mid, v["C"], v["D"]), _seg_dist(mid, v["D"], v["E"]))
        d_bd = min(_seg_dist(mid, v["A"], v["C"]), _seg_dist(mid, v["E"], v["B"]))
        expect = {d_out: "out", d_in: "in", d_bd: "bd"}[min(d_out, d_in, d_bd)]
        assert tags[e] == expect

    ns, nt = m.ns, m.nt
    counts = Counter(tag for *_, tag in m.boundary_edges)
    assert counts == {"out": 2 * ns, "in": 2 * ns, "bd": 2 * nt}


def _seg_dist(p, a, b):
    ab = b - a
    s = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + s * ab)))


def test_bisectrix_interface_conforming():
    g = cg.build_wedge(np.pi - 0.2, 8.0, 4.0, 0.1)
    m = cg.generate_mesh(g, 0.25)
    # every bisectrix edge is shared by exactly one element of each patch
    from collections import defaultdict
    owner = defaultdict(list)
    for i, tri in enumerate(m.triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            owner[frozenset((int(a), int(b)))].append(i)
    for a, b in m.bis_edges:
        elems = owner[frozenset((int(a), int(b)))]
        assert len(elems) == 2
        assert {m.element_patch[elems[0]], m.element_patch[elems[1]]} == {-1, 1}
        # interface nodes sit exactly on the bisectrix line
        for nid in (a, b):
            x, y = m.nodes[nid]
            assert abs(x * np.sin(g.theta_bis) - y * np.cos(g.theta_bis)) <= 1e-12


def test_mesh_resolution_guard():
    g = cg.build_wedge(np.pi - 0.2, 8.0, 4.0, 0.1)
    with pytest.raises(MeshFailure):
        cg.generate_mesh(g, 1.0)   # h > ell/8


def test_mesh_export_roundtrip(tmp_path):
    g = cg.build_wedge(np.pi - 0.2, 8.0, 4.0, 0.1)
    m = cg.generate_mesh(g, 0.5)
    txt = tmp_path / "mesh.txt"
    off = tmp_path / "mesh.off"
    cg.save_mesh_txt(m, txt)
    cg.save_mesh_off(m, off)
    lines = txt.read_text().splitlines()
    assert lines[1] == f"nodes {m.n_nodes}"
    header = off.read_text().splitlines()
    assert header[0] == "OFF"
    n, ntri, _ = map(int, header[1].split())
    assert (n, ntri) == (m.n_nodes, len(m.triangles))
