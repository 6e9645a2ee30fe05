import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwave.space import (FiniteSpace, ValidationError,
                         canonical_radii, compute_constants, generate_space,
                         load_space, resolve_space, save_space)

SETTINGS = dict(deadline=None, max_examples=25)


def test_fix_a_roundtrip(tmp_path, fix_a):
    save_space(fix_a, tmp_path / "a.json")
    back = load_space(tmp_path / "a.json")
    assert back.n == 4
    np.testing.assert_array_equal(back.dist, fix_a.dist)
    np.testing.assert_array_equal(back.weights, fix_a.weights)


def test_load_rejects_zero_weight(tmp_path):
    payload = {"n": 4, "metric": "explicit",
               "distances": [[abs(i - j) for j in range(4)] for i in range(4)],
               "weights": [1, 1, 0, 1]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ValidationError, match="weight must be positive"):
        load_space(path)


def test_load_rejects_zero_distance(tmp_path):
    dist = [[abs(i - j) for j in range(4)] for i in range(4)]
    dist[1][2] = dist[2][1] = 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"metric": "explicit", "distances": dist,
                                "weights": [1] * 4}))
    with pytest.raises(ValidationError, match="distance zero"):
        load_space(path)


def test_load_rejects_asymmetry(tmp_path):
    dist = [[abs(i - j) for j in range(3)] for i in range(3)]
    dist[0][1] = 5
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"metric": "explicit", "distances": dist,
                                "weights": [1] * 3}))
    with pytest.raises(ValidationError, match="asymmetric"):
        load_space(path)


def test_load_parse_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError, match="parse error"):
        load_space(path)


def test_fixture_b_metadata(fix_b):
    # diameter and minimum separation by direct enumeration of the matrix
    off = fix_b.dist[~np.eye(16, dtype=bool)]
    assert float(off.max()) == 0.5 == fix_b.diam
    assert float(off.min()) == 1 / 16 == fix_b.min_sep
    assert fix_b.weights.tolist() == [1 / 16] * 16


def test_power_line_quasi_triangle_constant():
    sp = generate_space("power_line(129, 2)")
    c = compute_constants(sp)
    assert c.A0 == 2.0  # 2**(r-1) for the squared line
    x, y, z = c.a0_witness
    assert sp.dist[x, y] == c.A0 * (sp.dist[x, z] + sp.dist[z, y])


def test_fix_a_is_metric(constants_a):
    assert constants_a.A0 == 1.0


def test_triple_scan_invariant(fix_b, constants_b):
    d = fix_b.dist
    a0 = constants_b.A0
    for z in range(16):
        sums = d[:, z][:, None] + d[z, :][None, :]
        mask = np.ones((16, 16), dtype=bool)
        mask[z, :] = mask[:, z] = False
        np.fill_diagonal(mask, False)
        assert np.all(d[mask] <= a0 * sums[mask] + 1e-12)


def test_cmu_against_dense_grid_oracle(fix_b, constants_b):
    # oracle: sweep a fine radius grid well past the diameter
    t = 2.0
    grid = np.arange(1, 2000) / 1024.0
    best = 1.0
    for x in range(16):
        row = fix_b.dist[x]
        for r in grid:
            v1 = fix_b.weights[row < r].sum()
            v2 = fix_b.weights[row < t * r].sum()
            best = max(best, v2 / v1)
    assert constants_b.cmu(2.0) == pytest.approx(best)
    assert constants_b.cmu(2.0) == 3.0


def test_cmu_monotone_in_t(constants_b):
    values = [constants_b.cmu(t) for t in (1.0, 1.5, 2.0, 3.0, 4.0)]
    assert values == sorted(values)
    assert all(v >= 1.0 for v in values)


def test_ball_strict_inequality(fix_a):
    assert fix_a.ball(1, 1.0).tolist() == [1]
    assert fix_a.ball(1, 1.5).tolist() == [0, 1, 2]
    assert fix_a.volume(1, 1.5) == 3.0


def test_fix_b_ball_volume(fix_b):
    # nine points closer than 5/16 under uniform weights 1/16
    assert fix_b.ball(0, 5 / 16).size == 9
    assert fix_b.volume(0, 5 / 16) == pytest.approx(9 / 16)


def test_ball_rejects_nonpositive_radius(fix_a):
    with pytest.raises(ValueError):
        fix_a.ball(0, 0.0)
    with pytest.raises(ValueError):
        fix_a.volume(0, -1.0)


def test_volume_monotone_and_positive(fix_b):
    for x in range(16):
        vols = [fix_b.volume(x, r) for r in canonical_radii(fix_b)]
        assert vols == sorted(vols)
        assert vols[0] >= fix_b.weights[x] > 0


def test_single_point_space():
    sp = FiniteSpace(dist=np.zeros((1, 1)), weights=np.array([2.5]))
    c = compute_constants(sp)
    assert (c.A0, c.N_geo) == (1.0, 1)
    assert sp.ball(0, 0.5).tolist() == [0]


def test_generator_determinism():
    a = generate_space("random_cloud(20, 3, 99)")
    b = generate_space("random_cloud(20, 3, 99)")
    assert a.dist.tobytes() == b.dist.tobytes()
    assert a.weights.tobytes() == b.weights.tobytes()


def test_generator_rejects_bad_parameters():
    with pytest.raises(ValidationError):
        generate_space("line(0)")
    with pytest.raises(ValidationError):
        generate_space("power_line(5, 0.5)")
    with pytest.raises(ValidationError):
        generate_space("mystery(4)")


def test_two_cluster_gap():
    sp = generate_space("two_cluster(4, 100)")
    assert sp.dist[1, 2] == 99.0
    assert sp.dist[0, 1] == 1.0


def test_grid_linf_is_metric():
    sp = generate_space("grid(3, 2)")
    assert sp.n == 9
    assert compute_constants(sp).A0 == 1.0


def test_tree_path_metric():
    sp = generate_space("tree(2)")
    assert sp.n == 7
    assert sp.dist[3, 4] == 2.0  # siblings through their parent
    assert sp.dist[3, 6] == 4.0  # across the root


def test_load_euclidean_and_power_metrics(tmp_path):
    path = tmp_path / "euc.json"
    path.write_text(json.dumps({"metric": "euclidean",
                                "coords": [[0, 0], [3, 4], [0, 1]],
                                "weights": [1, 2, 3]}))
    sp = load_space(path)
    assert sp.dist[0, 1] == 5.0
    path.write_text(json.dumps({"metric": "power", "r": 2,
                                "coords": [0, 1, 2], "weights": [1, 1, 1]}))
    sp = load_space(path)
    assert sp.dist[0, 2] == 4.0


def test_load_scale_field(tmp_path):
    dist = [[abs(i - j) for j in range(3)] for i in range(3)]
    path = tmp_path / "scaled.json"
    path.write_text(json.dumps({"metric": "explicit", "distances": dist,
                                "weights": [1, 1, 1], "scale": 0.5}))
    assert load_space(path).dist[0, 2] == 1.0


def test_resolve_space_fixture_descriptor_and_path(tmp_path, fix_a):
    assert resolve_space("FIX-A").n == 4
    assert resolve_space("line(7)").n == 7
    save_space(fix_a, tmp_path / "a.json")
    assert resolve_space(str(tmp_path / "a.json")).n == 4
    with pytest.raises(ValidationError):
        resolve_space("no-such-thing")


@given(s=st.floats(min_value=0.1, max_value=1.0),
       seed=st.integers(min_value=0, max_value=50))
@settings(**SETTINGS)
def test_snowflake_stability(s, seed):
    # the quasi-triangle constant of dist**s never exceeds A0**s
    sp = generate_space(f"random_cloud(12, 2, {seed})")
    a0 = compute_constants(sp).A0
    a0_s = compute_constants(sp.power(s)).A0
    assert a0_s <= a0**s + 1e-12


def test_snowflake_stability_power_line():
    sp = generate_space("power_line(17, 2)")
    a0 = compute_constants(sp).A0
    a0_half = compute_constants(sp.power(0.5)).A0
    assert a0_half <= a0**0.5 + 1e-12
    assert a0_half == 1.0  # the square root of the squared line is the line


@given(seed=st.integers(min_value=0, max_value=100),
       n=st.integers(min_value=2, max_value=12))
@settings(**SETTINGS)
def test_random_cloud_constants_are_consistent(seed, n):
    sp = generate_space(f"random_cloud({n}, 2, {seed})")
    c = compute_constants(sp)
    d = sp.dist
    for z in range(n):
        sums = d[:, z][:, None] + d[z, :][None, :]
        mask = ~np.eye(n, dtype=bool)
        mask[z, :] = mask[:, z] = False
        assert np.all(d[mask] <= c.A0 * sums[mask] * (1 + 1e-12))
    assert c.N_geo >= 1
    assert c.cmu(2.0) >= 1.0


def test_rescale_preserves_structure(fix_b):
    big = fix_b.rescale(16.0)
    assert big.min_sep == 1.0
    assert compute_constants(big).A0 == 1.0
