import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oswi import rng
from oswi.errors import ZeroCoordinate
from oswi.initializers import (InitScheme, effective_gain, entry_variance, gain_statistics,
                               init_layer, layer_weights, mod_diagonal, orthogonal, pack_matrix,
                               read_weights, unpack_matrices, write_weights)


def test_mod_diagonal_square_and_rectangular():
    assert np.array_equal(mod_diagonal(3, 3, 2.0), 2.0 * np.eye(3))
    d = mod_diagonal(5, 2)
    assert np.array_equal(d, np.array([[1, 0], [0, 1], [1, 0], [0, 1], [1, 0]], float))
    wide = mod_diagonal(2, 5)
    assert np.array_equal(wide, np.eye(2, 5))


def test_proposed_without_noise_is_scaled_identity():
    w = init_layer(InitScheme.proposed(0.0, 0.7), 4, 4, rng.substream(0))
    assert np.array_equal(w, 0.7 * np.eye(4))


def test_proposed_noise_moments():
    scheme = InitScheme.proposed(0.8, 1.5, seed=1)
    w = layer_weights(scheme, 400, 300, 1)
    z = w - mod_diagonal(400, 300, 1.5)
    assert abs(z.mean()) < 4 * 0.8 / math.sqrt(300) / math.sqrt(z.size)
    assert z.var() == pytest.approx(0.8**2 / 300, rel=0.02)
    assert entry_variance(scheme, 400, 300) == pytest.approx(0.8**2 / 300)


@pytest.mark.parametrize("kind,var", [("xavier", 2 / (300 + 200)), ("he", 2 / 200)])
def test_baseline_variances(kind, var):
    w = layer_weights(InitScheme(kind, 5), 300, 200, 2)
    assert w.var() == pytest.approx(var, rel=0.02)
    assert entry_variance(InitScheme(kind), 300, 200) == pytest.approx(var)
    if kind == "xavier":
        assert np.max(np.abs(w)) <= math.sqrt(6 / 500)


@pytest.mark.parametrize("rows,cols", [(50, 50), (80, 30), (30, 80)])
def test_orthogonal(rows, cols):
    q = orthogonal(rows, cols, rng.substream(2))
    assert q.shape == (rows, cols)
    gram = q.T @ q if rows >= cols else q @ q.T
    assert np.allclose(gram, np.eye(min(rows, cols)), atol=1e-12)


def test_orthogonal_is_haar_sign_fixed():
    # with the sign fix the diagonal of R is positive, so the mean of diag(Q)
    # over many draws is not biased by the QR routine's sign convention
    diag = np.array([np.diag(orthogonal(8, 8, rng.substream(7, k))) for k in range(400)])
    assert abs(diag.mean()) < 0.05


def test_layer_weights_are_keyed_by_layer_only():
    s = InitScheme("he", 11)
    a = layer_weights(s, 6, 4, 3)
    _ = layer_weights(s, 6, 4, 1)
    assert np.array_equal(a, layer_weights(s, 6, 4, 3))
    assert not np.array_equal(a, layer_weights(s, 6, 4, 2))


def test_scheme_validation():
    with pytest.raises(ValueError):
        InitScheme("lecun")
    with pytest.raises(ValueError):
        InitScheme.proposed(-1.0, 1.0)
    with pytest.raises(ValueError):
        InitScheme.proposed(0.5, 0.0)
    assert InitScheme.proposed(0.5, 1.0).gaussian and InitScheme("he").gaussian
    assert not InitScheme("xavier").gaussian


def test_effective_gain_definition():
    w = np.array([[2.0, 1.0], [0.0, 3.0]])
    x = np.array([1.0, 2.0])
    assert effective_gain(w, x, 0) == 4.0
    assert effective_gain(w, x, 1) == 3.0
    with pytest.raises(ZeroCoordinate):
        effective_gain(w, np.array([0.0, 1.0]), 0)


def test_gain_statistics_against_full_matrices():
    # drawing whole matrices and reading off row i gives the same law
    width, i = 12, 3
    scheme = InitScheme.proposed(0.6, 1.0)
    x = np.linspace(-1, 1, width) + 0.05
    full = [effective_gain(init_layer(scheme, width, width, rng.substream(9, k)), x, i)
            for k in range(4000)]
    st_ = gain_statistics(scheme, width, x, i, 4000, rng.substream(10))
    assert st_.var_theory == pytest.approx(0.36 / width * np.sum((x / x[i]) ** 2))
    assert np.var(full, ddof=1) == pytest.approx(st_.var_theory, rel=0.08)
    assert st_.var_hat == pytest.approx(st_.var_theory, rel=0.08)
    assert np.mean(full) == pytest.approx(1.0, abs=5 * math.sqrt(st_.var_theory / 4000))


def test_gain_statistics_errors():
    with pytest.raises(ValueError):
        gain_statistics(InitScheme("he"), 4, np.ones(4), 0, 10, rng.substream(0))
    with pytest.raises(ZeroCoordinate):
        gain_statistics(InitScheme.proposed(0.5, 1.0), 4, np.array([0.0, 1, 1, 1]), 0, 10,
                        rng.substream(0))


def test_container_layout():
    w = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    buf = pack_matrix(w)
    assert buf[:4] == b"OSWI"
    assert buf[4:16] == (1).to_bytes(4, "little") + (2).to_bytes(4, "little") + (3).to_bytes(4, "little")
    assert np.frombuffer(buf[16:], "<f8").tolist() == [1, 2, 3, 4, 5, 6]


def test_container_errors():
    good = pack_matrix(np.eye(2))
    with pytest.raises(ValueError, match="magic"):
        unpack_matrices(b"XXXX" + good[4:])
    with pytest.raises(ValueError, match="truncated"):
        unpack_matrices(good[:-1])
    with pytest.raises(ValueError, match="truncated"):
        unpack_matrices(good + good[:10])
    with pytest.raises(ValueError, match="version"):
        unpack_matrices(good[:4] + (2).to_bytes(4, "little") + good[8:])


@settings(max_examples=60, deadline=None)
@given(st.lists(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
                           elements=st.floats(allow_nan=False)), min_size=1, max_size=4))
def test_container_round_trip(mats):
    out = unpack_matrices(b"".join(pack_matrix(m) for m in mats))
    assert len(out) == len(mats)
    for a, b in zip(mats, out):
        assert np.array_equal(a, b)


def test_weights_file_round_trip(tmp_path):
    mats = [layer_weights(InitScheme("he", 1), 5, 3, k) for k in (1, 2)]
    write_weights(tmp_path / "w.oswi", mats)
    back = read_weights(tmp_path / "w.oswi")
    assert all(np.array_equal(a, b) for a, b in zip(mats, back))
