import numpy as np
import pytest

from hwave.nets import (NetError, NetHierarchy, build_nets,
                        build_reference_order, load_nets, reference_cubes,
                        save_nets, verify_nets)
from hwave.space import FiniteSpace, compute_constants, generate_space


def test_fix_a_hierarchy(bundle_a):
    h = bundle_a.hierarchy
    assert (h.k_coarse, h.k_fine) == (-1, 0)
    assert h.level(-1).tolist() == [0]
    assert h.level(0).tolist() == [0, 1, 2, 3]


def test_fix_b_hierarchy(bundle_b):
    h = bundle_b.hierarchy
    assert (h.k_coarse, h.k_fine) == (0, 2)
    assert h.level(0).tolist() == [0]
    assert h.level(1).tolist() == [0, 4, 8, 12]
    assert h.level(2).tolist() == list(range(16))
    assert h.wavelet_centers(0).tolist() == [4, 8, 12]
    assert h.wavelet_centers(1).size == 12


def test_single_point_hierarchy():
    sp = FiniteSpace(dist=np.zeros((1, 1)), weights=np.ones(1))
    c = compute_constants(sp)
    h = build_nets(sp, c, 0.25)
    assert (h.k_coarse, h.k_fine) == (0, 0)
    assert h.level(0).tolist() == [0]


def test_delta_validation(fix_a, constants_a):
    with pytest.raises(NetError):
        build_nets(fix_a, constants_a, 1.5)
    with pytest.raises(NetError):
        build_nets(fix_a, constants_a, 0.25, mode="weird")


def test_strict_mode_threshold(fix_a, constants_a):
    with pytest.raises(NetError, match="strict mode requires"):
        build_nets(fix_a, constants_a, 0.25, mode="strict")
    h = build_nets(fix_a, constants_a, 1e-4, mode="strict")
    assert h.level(h.k_fine).size == 4


def test_verify_nets_fix_b_margins(fix_b, constants_b, bundle_b):
    rep = verify_nets(fix_b, constants_b, bundle_b.hierarchy)
    assert rep.ok
    # worst covering radius at level 1, via the raw distance matrix
    worst = fix_b.dist[:, [0, 4, 8, 12]].min(axis=1).max()
    assert worst == 2 / 16
    row = next(r for r in rep.rows if r[0] == 1)
    assert row[2] == worst < 2 * constants_b.A0 * 0.25


def test_verify_nets_catches_missing_point(fix_b, constants_b, bundle_b):
    h = bundle_b.hierarchy
    broken = NetHierarchy(delta=h.delta, k_coarse=h.k_coarse, k_fine=h.k_fine,
                          levels=(h.level(0), h.level(1), h.level(2)[:-1]))
    rep = verify_nets(fix_b, constants_b, broken)
    assert not rep.ok
    assert any("covering" in f or "finest" in f for f in rep.failures)


def test_verify_nets_single_point_vacuous():
    sp = FiniteSpace(dist=np.zeros((1, 1)), weights=np.ones(1))
    c = compute_constants(sp)
    rep = verify_nets(sp, c, build_nets(sp, c, 0.25))
    assert rep.ok


def test_fix_a_reference_order(bundle_a):
    order = bundle_a.order
    assert order.parent_at(-1).tolist() == [0, 0, 0, 0]
    assert order.M == 4
    assert order.L == 0
    kids = order.children_at(-1)[0]
    assert bundle_a.hierarchy.level(0)[kids].tolist() == [0, 1, 2, 3]
    assert order.label2_at(0).tolist() == [1, 2, 3, 4]


def test_fix_b_reference_order(bundle_b):
    h, order = bundle_b.hierarchy, bundle_b.order
    # all four level-1 points descend from the single root
    assert order.parent_at(0).tolist() == [0, 0, 0, 0]
    # nearest-parent with lowest-id tie-break: point 2 is equidistant from
    # centers 0 and 4 and goes to 0
    lev2 = h.level(2)
    parent_of_2 = order.parent_at(1)[np.where(lev2 == 2)[0][0]]
    assert h.level(1)[parent_of_2] == 0
    blocks = [h.level(2)[c].tolist() for c in order.children_at(1)]
    assert blocks == [[0, 1, 2, 14, 15], [3, 4, 5, 6], [7, 8, 9, 10], [11, 12, 13]]
    assert (order.L, order.M) == (2, 5)


def test_self_parenting(bundle_b):
    h, order = bundle_b.hierarchy, bundle_b.order
    for k in range(h.k_coarse, h.k_fine):
        lev, nxt = h.level(k), h.level(k + 1)
        for alpha, point in enumerate(lev):
            pos = np.where(nxt == point)[0][0]
            assert order.parent_at(k)[pos] == alpha


def test_labels_distinguish(bundle_b):
    h, order = bundle_b.hierarchy, bundle_b.order
    for k in range(h.k_coarse, h.k_fine):
        lab1 = order.label1_at(k)
        assert lab1.max() <= order.L
        for alpha, nbrs in enumerate(order.neighbours_at(k)):
            assert all(lab1[b] != lab1[alpha] for b in nbrs)
        lab2 = order.label2_at(k + 1)
        for kids in order.children_at(k):
            vals = lab2[kids]
            assert len(set(vals.tolist())) == kids.size
            assert vals.min() >= 1 and vals.max() <= order.M


def test_neighbour_distance_bound(bundle_b):
    h, order = bundle_b.hierarchy, bundle_b.order
    a0 = bundle_b.constants.A0
    for k in range(h.k_coarse, h.k_fine):
        lev = h.level(k)
        for alpha, nbrs in enumerate(order.neighbours_at(k)):
            for b in nbrs:
                assert bundle_b.space.dist[lev[alpha], lev[b]] < 5 * a0**3 * h.scale(k)


def test_descendant_chains_total(bundle_b):
    h, order = bundle_b.hierarchy, bundle_b.order
    anc = reference_cubes(h, order)
    for k in range(h.k_coarse, h.k_fine + 1):
        assert anc[k].shape == (16,)
        assert anc[k].min() >= 0
        assert anc[k].max() < h.level(k).size
    assert np.all(anc[h.k_coarse] == 0)


def test_rebuild_determinism(fix_b, constants_b):
    h1 = build_nets(fix_b, constants_b, 0.25)
    h2 = build_nets(fix_b, constants_b, 0.25)
    assert all(np.array_equal(a, b) for a, b in zip(h1.levels, h2.levels))
    o1 = build_reference_order(fix_b, constants_b, h1)
    o2 = build_reference_order(fix_b, constants_b, h2)
    assert all(np.array_equal(a, b) for a, b in zip(o1.parents, o2.parents))
    assert all(np.array_equal(a, b) for a, b in zip(o1.label1, o2.label1))


def test_net_file_roundtrip(tmp_path, bundle_b):
    path = tmp_path / "nets.json"
    save_nets(bundle_b.hierarchy, bundle_b.order, path)
    first = path.read_bytes()
    h, order = load_nets(path)
    save_nets(h, order, path)
    assert path.read_bytes() == first
    assert h.k_coarse == bundle_b.hierarchy.k_coarse
    assert order.L == bundle_b.order.L
    assert all(np.array_equal(a, b)
               for a, b in zip(order.parents, bundle_b.order.parents))


def test_k_fine_is_smallest_full_level():
    # widely separated points: several scales already hold every point, and
    # the finest retained level is the smallest one that does
    sp = generate_space("line(4, scale=10)")
    c = compute_constants(sp)
    h = build_nets(sp, c, 0.25)
    assert h.level(h.k_fine).size == 4
    assert h.k_fine == -1  # the 4-separated net is already everything
    assert h.level(h.k_fine - 1).size < 4


def test_power_line_hierarchy_runs():
    sp = generate_space("power_line(33, 2)")
    c = compute_constants(sp)
    h = build_nets(sp, c, 1 / 16)
    order = build_reference_order(sp, c, h)
    assert h.level(h.k_fine).size == 33
    assert verify_nets(sp, c, h).ok
    assert order.M >= 2
