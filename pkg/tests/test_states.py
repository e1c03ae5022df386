"""State constructors, validation gates, and the seeded stream contract."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphacoh.states import (
    BadRankError,
    dephase,
    embed_diagonal,
    haar_unitary,
    load_state,
    make_rng,
    maximally_coherent,
    random_density,
    random_incoherent,
    random_pure,
    rank_of,
    save_state,
    substream,
    validate_density,
    validate_probability_vector,
)


class TestValidateDensity:
    def test_accepts_valid(self):
        rho = np.array([[0.6, 0.2j], [-0.2j, 0.4]])
        out = validate_density(rho)
        assert out.dtype == complex

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace violated"):
            validate_density(np.diag([0.7, 0.4]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="hermiticity violated"):
            validate_density(np.array([[0.5, 0.3], [0.0, 0.5]]))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(ValueError, match="positivity violated"):
            validate_density(np.array([[0.9, 0.5], [0.5, 0.1]]))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            validate_density(np.ones((2, 3)))

    def test_name_appears_in_message(self):
        with pytest.raises(ValueError, match="input_rho"):
            validate_density(np.diag([2.0, 0.0]), name="input_rho")


def test_validate_probability_vector_gates():
    np.testing.assert_array_equal(validate_probability_vector([0.25, 0.75]), [0.25, 0.75])
    with pytest.raises(ValueError, match="nonnegativity"):
        validate_probability_vector([1.1, -0.1])
    with pytest.raises(ValueError, match="normalization"):
        validate_probability_vector([0.5, 0.6])
    with pytest.raises(ValueError, match="1-D"):
        validate_probability_vector([[0.5, 0.5]])


def test_embed_and_dephase_round_trip():
    probs = np.array([0.1, 0.2, 0.7])
    rho = embed_diagonal(probs)
    assert rho.shape == (3, 3)
    assert np.all(rho == np.diag(probs))
    np.testing.assert_allclose(dephase(rho), probs, atol=1e-15)


def test_dephase_strips_off_diagonals():
    rho = maximally_coherent(4)
    np.testing.assert_allclose(dephase(rho), np.full(4, 0.25), atol=1e-15)


class TestMaximallyCoherent:
    def test_is_pure_uniform(self):
        rho = maximally_coherent(3)
        assert np.trace(rho).real == pytest.approx(1.0)
        np.testing.assert_allclose(rho, np.full((3, 3), 1 / 3), atol=1e-15)
        assert rank_of(rho) == 1

    def test_phases_affect_off_diagonals_only(self):
        rho = maximally_coherent(2, phases=[0.0, np.pi / 2])
        np.testing.assert_allclose(np.diag(rho), [0.5, 0.5], atol=1e-15)
        assert rho[0, 1] == pytest.approx(-0.5j)

    def test_phase_count_checked(self):
        with pytest.raises(ValueError, match="expected 3 phases"):
            maximally_coherent(3, phases=[0.0, 1.0])

    def test_dimension_gate(self):
        with pytest.raises(ValueError):
            maximally_coherent(0)


class TestRandomDensity:
    @pytest.mark.parametrize("d,rank", [(2, 1), (2, 2), (4, 2), (4, 4), (5, 3)])
    def test_valid_state_of_exact_rank(self, d, rank, rng):
        rho = random_density(d, rank, rng(d, rank))
        validate_density(rho)
        assert rank_of(rho) == rank

    def test_rank_gate(self, rng):
        with pytest.raises(BadRankError):
            random_density(3, 0, rng(0))
        with pytest.raises(BadRankError):
            random_density(3, 4, rng(0))


def test_random_pure_and_incoherent(rng):
    pure = random_pure(4, rng(10))
    validate_density(pure)
    assert rank_of(pure) == 1
    inc = random_incoherent(4, rng(11))
    validate_density(inc)
    assert np.max(np.abs(inc - np.diag(np.diag(inc)))) == 0.0


def test_haar_unitary_is_unitary(rng):
    u = haar_unitary(5, rng(12))
    np.testing.assert_allclose(u @ u.conj().T, np.eye(5), atol=1e-12)


class TestStreams:
    def test_substream_reproducible(self):
        a = substream(7, 3, 1).standard_normal(5)
        b = substream(7, 3, 1).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_substream_keys_independent_of_open_order(self):
        # opening other streams first must not shift an existing key's draws
        first = substream(7, 0, 4).standard_normal(3)
        for k in range(20):
            substream(7, k, 0).standard_normal(1)
        np.testing.assert_array_equal(substream(7, 0, 4).standard_normal(3), first)

    def test_distinct_keys_differ(self):
        a = substream(7, 1).standard_normal(4)
        b = substream(7, 2).standard_normal(4)
        assert np.any(a != b)

    def test_make_rng_master(self):
        np.testing.assert_array_equal(make_rng(3).standard_normal(4), make_rng(3).standard_normal(4))


def test_state_file_round_trip_exact(tmp_path, rng):
    rho = random_density(3, 2, rng(20))
    path = tmp_path / "state.json"
    save_state(path, rho)
    loaded = load_state(path)
    np.testing.assert_array_equal(loaded, rho)


def test_load_state_validates(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"dim": 2, "entries": [[0.7, 0.0], [0.0, 0.0], [0.0, 0.0], [0.7, 0.0]]}\n')
    with pytest.raises(ValueError, match="trace violated"):
        load_state(path)
    path.write_text('{"dim": 2, "entries": [[1.0, 0.0]]}\n')
    with pytest.raises(ValueError, match="expected 4 entries"):
        load_state(path)
    path.write_text('[1, 2]\n')
    with pytest.raises(ValueError, match="state file needs"):
        load_state(path)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=0, max_value=10_000),
    st.integers(min_value=1, max_value=6),
    st.data(),
)
def test_random_density_always_validates(seed, d, data):
    rank = data.draw(st.integers(min_value=1, max_value=d))
    rho = random_density(d, rank, np.random.default_rng(seed))
    validate_density(rho)
    assert abs(np.trace(rho) - 1.0) < 1e-12
