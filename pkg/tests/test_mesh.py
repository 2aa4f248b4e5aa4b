import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uniporo.errors import InconsistentMeshError, InvalidArgumentError, OutOfDomainError
from uniporo.mesh import BoundaryScheme, barycentric, build_unit_square_mesh, locate_point, tag_boundaries


@pytest.mark.parametrize("n, nv, nt", [(1, 4, 2), (4, 25, 32), (7, 64, 98)])
def test_counts(n, nv, nt):
    m = build_unit_square_mesh(n)
    assert m.n_vertices == nv and m.n_triangles == nt


@pytest.mark.parametrize("n", [1, 3, 8, 64])
def test_areas_and_h(n):
    m = build_unit_square_mesh(n)
    a = m.areas()
    assert np.all(a > 0)
    assert abs(a.sum() - 1.0) <= 1e-12
    assert abs(a.min() - 1.0 / (2 * n * n)) <= 1e-14
    assert m.h == pytest.approx(np.sqrt(2) / n, abs=1e-15)
    # h is the largest element diameter
    p = m.vertices[m.triangles]
    diam = max(np.linalg.norm(p[:, a_] - p[:, b_], axis=1).max() for a_, b_ in ((0, 1), (1, 2), (0, 2)))
    assert diam == pytest.approx(m.h)


@pytest.mark.parametrize("bad", [0, -2, 1.5])
def test_invalid_n(bad):
    with pytest.raises(InvalidArgumentError):
        build_unit_square_mesh(bad)


def test_split_along_rising_diagonal():
    m = build_unit_square_mesh(1)
    assert m.triangles.tolist() == [[0, 1, 3], [0, 3, 2]]


def _edge_counts(m):
    from collections import Counter

    c = Counter()
    for tri in m.triangles:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            c[tuple(sorted((tri[a], tri[b])))] += 1
    return c


@pytest.mark.parametrize("n", [1, 2, 5])
def test_edge_triangle_consistency(n):
    m = build_unit_square_mesh(n)
    counts = _edge_counts(m)
    boundary = {tuple(sorted(e)) for e in m.boundary_edges.tolist()}
    assert len(boundary) == 4 * n
    for e, k in counts.items():
        assert k == (1 if e in boundary else 2)
    assert {e for e, k in counts.items() if k == 1} == boundary


def test_tag_right_neumann():
    m = tag_boundaries(build_unit_square_mesh(4), BoundaryScheme.named("right_neumann"))
    assert len(m.edges_with_tag("neumann")) == 4
    assert len(m.edges_with_tag("dirichlet")) == 12
    assert np.all(m.vertices[m.edges_with_tag("neumann")][..., 0] == 1.0)


def test_tag_barry_mercer():
    m = tag_boundaries(build_unit_square_mesh(4), "barry_mercer")
    where = {"gamma1": (0, 1.0), "gamma2": (1, 0.0), "gamma3": (0, 0.0), "gamma4": (1, 1.0)}
    for tag, (axis, value) in where.items():
        e = m.edges_with_tag(tag)
        assert len(e) == 4
        assert np.all(m.vertices[e][..., axis] == value)


def test_tag_all_dirichlet_default():
    m = build_unit_square_mesh(2)
    assert len(m.boundary_tags) == 8 and set(m.boundary_tags) == {"dirichlet"}


def test_retag_returns_new_value():
    m = build_unit_square_mesh(2)
    m2 = tag_boundaries(m, "right_neumann")
    assert m.scheme.kind == "all_dirichlet" and m2.scheme.kind == "right_neumann"
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 3.0


def test_tag_inconsistent_edge():
    from dataclasses import replace

    m = build_unit_square_mesh(2)
    bad = replace(m, boundary_edges=np.array([[0, 4]]))  # diagonal edge, not on a side
    with pytest.raises(InconsistentMeshError):
        tag_boundaries(bad, "all_dirichlet")


def test_unknown_scheme():
    with pytest.raises(InvalidArgumentError):
        BoundaryScheme.named("robin")


def test_locate_corner():
    m = build_unit_square_mesh(5)
    tri, lam = locate_point(m, (0.0, 0.0))
    assert sorted(np.round(lam, 12).tolist()) == [0.0, 0.0, 1.0]
    assert 0 in m.triangles[tri]


def test_locate_source_vertex():
    m = build_unit_square_mesh(64)
    tri, lam = locate_point(m, (0.25, 0.25))
    v = 16 * 65 + 16
    assert v in m.triangles[tri]
    assert lam[list(m.triangles[tri]).index(v)] == pytest.approx(1.0, abs=1e-12)


def test_locate_centroid():
    m = build_unit_square_mesh(3)
    c = m.vertices[m.triangles[0]].mean(axis=0)
    tri, lam = locate_point(m, c)
    assert tri == 0
    np.testing.assert_allclose(lam, [1 / 3] * 3, atol=1e-12)


def test_locate_shared_edge_lowest_index():
    m = build_unit_square_mesh(2)
    # on the diagonal of cell 0, shared by triangles 0 and 1
    tri, _ = locate_point(m, (0.2, 0.2))
    assert tri == 0


@pytest.mark.parametrize("p", [(-0.1, 0.5), (0.5, 1.2), (2, 2)])
def test_locate_outside(p):
    with pytest.raises(OutOfDomainError):
        locate_point(build_unit_square_mesh(3), p)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 12), x=st.floats(0, 1), y=st.floats(0, 1))
def test_locate_reconstructs_point(n, x, y):
    m = build_unit_square_mesh(n)
    tri, lam = locate_point(m, (x, y))
    assert lam.min() >= -1e-12 and abs(lam.sum() - 1) <= 1e-12
    np.testing.assert_allclose(lam @ m.vertices[m.triangles[tri]], [x, y], atol=1e-12)


@pytest.mark.parametrize("n", [1, 4])
def test_locate_every_vertex(n):
    m = build_unit_square_mesh(n)
    for v, p in enumerate(m.vertices):
        tri, lam = locate_point(m, p)
        assert v in m.triangles[tri]
        assert lam.max() == pytest.approx(1.0, abs=1e-12)


def test_barycentric_vertices():
    m = build_unit_square_mesh(2)
    for k, v in enumerate(m.triangles[3]):
        lam = barycentric(m, 3, m.vertices[v])
        np.testing.assert_allclose(lam, np.eye(3)[k], atol=1e-14)
