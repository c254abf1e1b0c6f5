import numpy as np
import pytest
from scipy import stats

from rough_heston.grid import (TimeGrid, make_grid, make_uniform_grid, sample_increments,
                               sample_normal_block)


def test_uniform_nodes():
    assert make_uniform_grid(1, 1.0).nodes.tolist() == [0.0, 1.0]
    assert make_uniform_grid(4, 1.0).nodes.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    g = make_uniform_grid(3, 1.0)
    assert g.nodes[2] == 2 / 3 and g.nodes[-1] == 1.0


@pytest.mark.parametrize("bad", [[0.0], [0.1, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0, 1.0, 0.5]])
def test_invalid_nodes(bad):
    with pytest.raises(ValueError):
        make_grid(bad)


def test_eta_left_endpoint():
    g = make_uniform_grid(4, 1.0)
    s = np.array([0.0, 0.1, 0.25, 0.49, 0.999, 1.0])
    np.testing.assert_array_equal(g.eta(s), [0.0, 0.0, 0.25, 0.25, 0.75, 1.0])
    with pytest.raises(ValueError):
        g.eta(1.2)


def test_eta_bracket_on_random_grid():
    rng = np.random.default_rng(3)
    g = make_grid(np.concatenate([[0.0], np.sort(rng.uniform(0, 1, 20)), [1.0]]))
    s = rng.uniform(0, 1, 500)
    e = g.eta(s)
    idx = np.searchsorted(g.nodes, e)
    assert np.all(e <= s)
    assert np.all(s < g.nodes[idx + 1])


def test_refine():
    g = make_uniform_grid(3, 2.0).refine(4)
    assert g.n == 12 and g.is_uniform
    np.testing.assert_allclose(g.nodes, np.linspace(0, 2, 13), rtol=0, atol=1e-15)


def test_stream_determinism():
    g = make_uniform_grid(50, 1.0)
    a, b = sample_increments(7, 123, g), sample_increments(7, 123, g)
    assert a.Z.tobytes() == b.Z.tobytes() and a.Zperp.tobytes() == b.Zperp.tobytes()
    c = sample_increments(7, 124, g)
    assert not np.array_equal(a.Z, c.Z)
    np.testing.assert_array_equal(a.dW, np.sqrt(g.steps) * a.Z)


def test_block_rows_equal_single_streams():
    g = make_uniform_grid(9, 1.0)
    Z, Zp = sample_normal_block(11, 40, 5, 9)
    for j in range(5):
        s = sample_increments(11, 40 + j, g)
        assert Z[j].tobytes() == s.Z.tobytes()
        assert Zp[j].tobytes() == s.Zperp.tobytes()


def test_negative_index_rejected():
    with pytest.raises(ValueError):
        sample_increments(0, -1, make_uniform_grid(2, 1.0))


@pytest.fixture(scope="module")
def first_increments():
    Z, Zp = sample_normal_block(2024, 0, 100_000, 2)
    return Z[:, 0], Zp[:, 0]


def test_gaussian_moments(first_increments):
    z, _ = first_increments
    M = z.size
    assert abs(z.mean()) <= 4 / np.sqrt(M)
    assert abs(z.var() - 1.0) <= 0.05


def test_components_uncorrelated(first_increments):
    z, zp = first_increments
    assert abs(np.corrcoef(z, zp)[0, 1]) <= 4 / np.sqrt(z.size)


def test_ks_against_standard_normal(first_increments):
    z = first_increments[0][:10_000]
    res = stats.kstest(z, "norm")
    assert res.statistic < 1.63 / np.sqrt(z.size)  # 1% critical value


def test_grid_equality_and_hash():
    assert make_uniform_grid(5, 1.0) == make_uniform_grid(5, 1.0)
    assert hash(make_uniform_grid(5, 1.0)) == hash(make_uniform_grid(5, 1.0))
    assert make_uniform_grid(5, 1.0) != make_uniform_grid(6, 1.0)
    assert isinstance(make_uniform_grid(5, 1.0), TimeGrid)
