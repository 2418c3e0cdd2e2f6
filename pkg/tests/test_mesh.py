import math

import numpy as np
import pytest

from lagflow.mesh import (
    LatticeSpec,
    TriangleMesh,
    build_domain_mesh,
    build_hexagonal_patch,
    hex_sigma,
    read_mesh,
    skew_sigma,
    validate,
    write_mesh,
)


@pytest.mark.parametrize("eps", [1.0, 0.05])
@pytest.mark.parametrize("rings", [1, 3])
def test_hexagonal_patch_exact_offsets(eps, rings):
    patch = build_hexagonal_patch(LatticeSpec("hexagonal", eps), rings=rings, center=(0.4, -0.7))
    assert validate(patch) == []
    sig = eps * hex_sigma()
    interior = patch.interior_nodes()
    assert interior.size > 0
    for l in interior:
        fan = patch.fans[l]
        assert len(fan) == 6
        offs = patch.nodes[[e[1] for e in fan]] - patch.nodes[l]
        for o in offs:
            assert np.min(np.linalg.norm(sig - o, axis=1)) < 1e-13 * max(eps, 1.0)


def test_hexagonal_patch_triangle_areas():
    patch = build_hexagonal_patch(LatticeSpec("hexagonal", 1.0), rings=1)
    assert patch.n_nodes == 7 and patch.n_triangles == 6
    assert np.allclose(patch.areas(), math.sqrt(3.0) / 4.0, rtol=1e-13)


def test_fan_traversal_closes_once():
    patch = build_hexagonal_patch(LatticeSpec("hexagonal", 0.5), rings=2)
    for l in patch.interior_nodes():
        fan = patch.fans[l]
        tris = [e[0] for e in fan]
        assert len(set(tris)) == len(tris)
        for j in range(len(fan)):
            assert fan[j][2] == fan[(j + 1) % len(fan)][1]


def test_skew_patch_realizes_degenerate_hexagon():
    patch = build_hexagonal_patch(LatticeSpec("skew", 2.0), rings=1)
    assert validate(patch) == []
    assert np.array_equal(patch.nodes[1:] - patch.nodes[0], 2.0 * skew_sigma())


def test_patch_argument_validation():
    with pytest.raises(ValueError, match="one ring"):
        build_hexagonal_patch(LatticeSpec("skew", 1.0), rings=2)
    with pytest.raises(ValueError, match="ring"):
        build_hexagonal_patch(LatticeSpec("hexagonal", 1.0), rings=0)
    with pytest.raises(ValueError):
        LatticeSpec("triangular", 1.0)
    with pytest.raises(ValueError):
        LatticeSpec("hexagonal", 0.0)


def test_square_mesh_contract():
    mesh = build_domain_mesh("square", 0.5, bounds=(0.0, 0.0, 1.0, 1.0))
    assert validate(mesh) == []
    assert mesh.max_edge_length() <= 0.5
    assert np.all(mesh.signed_dets() > 0.0)
    assert np.sum(mesh.areas()) == pytest.approx(1.0, rel=1e-12)


def test_disc_mesh_area_deficit():
    mesh = build_domain_mesh("disc", 0.2, radius=1.0)
    assert validate(mesh) == []
    assert mesh.max_edge_length() <= 0.2
    # polygonal (inscribed) approximation: small area deficit, never excess
    assert np.sum(mesh.areas()) == pytest.approx(math.pi, rel=0.02)
    assert np.sum(mesh.areas()) < math.pi


def test_quarter_disc_constraints():
    mesh = build_domain_mesh("quarter_disc", 0.1, radius=1.0)
    assert validate(mesh) == []
    for l, tag in enumerate(mesh.constraints):
        x, y = mesh.nodes[l]
        if x == 0.0 and y == 0.0:
            assert tag == ("pinned",)
        elif y == 0.0:
            assert tag == ("line", (1.0, 0.0))
        elif x == 0.0:
            assert tag == ("line", (0.0, 1.0))
        else:
            assert tag == ("free",)
    # boundary arc nodes sit exactly on the circle
    r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    assert np.max(r) == pytest.approx(1.0, rel=1e-12)


def test_mesh_size_validation():
    with pytest.raises(ValueError, match="diameter"):
        build_domain_mesh("square", 5.0, bounds=(0, 0, 1, 1))
    with pytest.raises(ValueError, match="diameter"):
        build_domain_mesh("disc", 3.0, radius=1.0)
    with pytest.raises(ValueError):
        build_domain_mesh("square", -0.1, bounds=(0, 0, 1, 1))
    with pytest.raises(ValueError):
        build_domain_mesh("disc", 0.1, radius=0.0)
    with pytest.raises(ValueError, match="unknown"):
        build_domain_mesh("hexagon", 0.1, radius=1.0)


def test_validate_reports_cw_triangle():
    patch = build_hexagonal_patch(LatticeSpec("hexagonal", 1.0), rings=1)
    tris = patch.triangles.copy()
    tris[2, [1, 2]] = tris[2, [2, 1]]
    bad = TriangleMesh(patch.nodes, tris)
    assert any("non-positive" in v and "2" in v for v in validate(bad))


def test_validate_reports_dangling_node():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    mesh = TriangleMesh(nodes, np.array([[0, 1, 2]]))
    assert any("node 3" in v and "empty fan" in v for v in validate(mesh))


def test_validate_reports_duplicate_triangles():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = TriangleMesh(nodes, np.array([[0, 1, 2], [1, 2, 0]]))
    assert any("duplicate" in v for v in validate(mesh))


def test_validate_reports_bad_index():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = TriangleMesh(nodes, np.array([[0, 1, 7]]))
    assert any("out of range" in v for v in validate(mesh))


def test_export_import_round_trip(tmp_path):
    mesh = build_domain_mesh("quarter_disc", 0.3, radius=0.8)
    path = tmp_path / "mesh.txt"
    write_mesh(mesh, path)
    back = read_mesh(path)
    assert np.array_equal(back.nodes, mesh.nodes)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert back.constraints == mesh.constraints
    header = path.read_text().splitlines()[0]
    assert header == f"{mesh.n_nodes} {mesh.n_triangles}"
