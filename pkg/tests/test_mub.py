import numpy as np
import pytest

from hdqkd.mub import MODE_LABELS, ModeLabel, mub_coefficients, parse_label


def test_matrix_is_unitary():
    m = mub_coefficients()
    assert np.abs(m.conj().T @ m - np.eye(3)).max() < 1e-12
    assert np.abs(m @ m.conj().T - np.eye(3)).max() < 1e-12


def test_every_entry_has_squared_modulus_one_third():
    m = mub_coefficients()
    assert np.abs(np.abs(m) ** 2 - 1.0 / 3.0).max() < 1e-12


def test_columns_are_orthogonal():
    m = mub_coefficients()
    for j in range(3):
        for k in range(j + 1, 3):
            assert abs(np.vdot(m[:, j], m[:, k])) < 1e-12


def test_exact_table_columns():
    z = np.exp(2j * np.pi / 3.0)
    m = mub_coefficients() * np.sqrt(3.0)
    np.testing.assert_allclose(m[:, 0], [1, 1, z**2], atol=1e-14)
    np.testing.assert_allclose(m[:, 1], [1, z, z], atol=1e-14)
    np.testing.assert_allclose(m[:, 2], [1, z**2, 1], atol=1e-14)


def test_mode_label_names_and_order():
    assert [lab.name for lab in MODE_LABELS] == [
        "a", "b", "c", "alpha", "beta", "gamma",
    ]
    assert ModeLabel(1, 0).oam == -1
    assert ModeLabel(1, 1).oam == 0
    assert ModeLabel(1, 2).oam == 1


def test_parse_label_round_trips():
    for lab in MODE_LABELS:
        assert parse_label(lab.name) == lab
    with pytest.raises(ValueError):
        parse_label("delta")


def test_label_validation():
    with pytest.raises(ValueError):
        ModeLabel(3, 0)
    with pytest.raises(ValueError):
        ModeLabel(1, 5)
    with pytest.raises(ValueError):
        ModeLabel(2, 1).oam
