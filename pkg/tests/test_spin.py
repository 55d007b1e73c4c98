import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridqoc.pauli import PauliString, to_matrix
from hybridqoc.spin import ConfigError, SpinSystem, build_controls, build_drift, load_system

from conftest import I2, X, Y, Z


def test_nmr_single_offset_gives_pauli_z():
    H = build_drift(SpinSystem.from_nmr([2 / (2 * np.pi)], [[0.0]]))
    np.testing.assert_allclose(H, Z, atol=1e-15)


def test_nmr_coupling_only():
    H = build_drift(SpinSystem.from_nmr([0, 0], [[0, 1], [1, 0]]))
    np.testing.assert_allclose(H, (np.pi / 2) * np.kron(Z, Z), atol=1e-14)


def test_term_list_drift():
    H = build_drift(SpinSystem.from_terms(2, [(0.5, "XX"), (0.5, "YY")]))
    np.testing.assert_allclose(H, 0.5 * np.kron(X, X) + 0.5 * np.kron(Y, Y), atol=1e-15)


def test_locality_bound_enforced():
    with pytest.raises(ConfigError, match="locality"):
        SpinSystem.from_terms(3, [(1.0, "XYZ")])
    SpinSystem.from_terms(3, [(1.0, "XYZ")], locality=3)


def test_nmr_validation():
    with pytest.raises(ConfigError, match="asymmetric"):
        SpinSystem.from_nmr([0, 0], [[0, 1], [2, 0]])
    with pytest.raises(ConfigError, match="diagonal"):
        SpinSystem.from_nmr([0, 0], [[1, 0], [0, 0]])
    with pytest.raises(ConfigError, match="offsets_hz"):
        SpinSystem(3, nmr=SpinSystem.from_nmr([0, 0], [[0, 0], [0, 0]]).nmr)


def test_collective_control_spectrum():
    g = build_controls(3)
    np.testing.assert_allclose(np.linalg.eigvalsh(g.gx), [-3, -1, -1, -1, 1, 1, 1, 3], atol=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(g.gy), [-3, -1, -1, -1, 1, 1, 1, 3], atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_control_commutator(n):
    g = build_controls(n)
    zsum = sum(to_matrix(PauliString("I" * k + "Z" + "I" * (n - k - 1))) for k in range(n))
    np.testing.assert_allclose(g.gx @ g.gy - g.gy @ g.gx, 2j * zsum, atol=1e-12)


def _nmr_diag_by_enumeration(offsets, J):
    """Independent oracle: energy of each computational basis state, spin 1 = most significant bit."""
    n = len(offsets)
    out = []
    for bits in itertools.product([0, 1], repeat=n):
        s = [1 - 2 * b for b in bits]
        e = sum(np.pi * offsets[k] * s[k] for k in range(n))
        e += sum(np.pi * J[k][j] * s[k] * s[j] / 2 for k in range(n) for j in range(k + 1, n))
        out.append(e)
    return np.array(out)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_nmr_drift_matches_enumeration(n, seed):
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-500, 500, size=n)
    J = rng.uniform(-50, 50, size=(n, n))
    J = np.triu(J, 1) + np.triu(J, 1).T
    H = build_drift(SpinSystem.from_nmr(offsets, J))
    np.testing.assert_allclose(np.diag(H).real, _nmr_diag_by_enumeration(offsets, J), rtol=1e-12, atol=1e-9)
    np.testing.assert_array_equal(H - np.diag(np.diag(H)), 0)


def test_nmr_drift_equals_term_form():
    offsets, J = [100.0, -30.0, 7.0], [[0, 12.0, 0], [12.0, 0, -4.0], [0, -4.0, 0]]
    a = build_drift(SpinSystem.from_nmr(offsets, J))
    terms = [(np.pi * offsets[k], "".join("Z" if i == k else "I" for i in range(3))) for k in range(3)]
    terms += [(np.pi * 12.0 / 2, "ZZI"), (np.pi * -4.0 / 2, "IZZ")]
    b = build_drift(SpinSystem.from_terms(3, terms))
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_drift_hermitian_and_dimension():
    H = build_drift(SpinSystem.from_terms(2, [(0.3, "XY"), (-1.0, "ZI")]))
    assert H.shape == (4, 4)
    np.testing.assert_allclose(H, H.conj().T)
    assert np.allclose(build_drift(SpinSystem.from_terms(1, [(0.0, "Z")])), 0 * I2)


def test_load_system_examples():
    a = load_system({"n": 2, "nmr": {"couplings_hz": [[0, 1], [1, 0]]}})
    np.testing.assert_allclose(build_drift(a), (np.pi / 2) * np.kron(Z, Z), atol=1e-14)
    with pytest.raises(ConfigError) as exc:
        load_system({"n": 2, "terms": [{"coeff": 1.0, "pauli": "ZB"}]})
    assert exc.value.path == "terms[0].pauli"


@pytest.mark.parametrize(
    "doc, path",
    [
        ([], "$"),
        ({}, "n"),
        ({"n": 0, "terms": []}, "n"),
        ({"n": 13, "terms": []}, "n"),
        ({"n": 2}, "$"),
        ({"n": 2, "terms": [{"pauli": "ZZ"}]}, "terms[0].coeff"),
        ({"n": 2, "terms": [{"coeff": "a", "pauli": "ZZ"}]}, "terms[0].coeff"),
        ({"n": 2, "nmr": {"offsets_hz": [1.0]}}, "nmr.offsets_hz"),
        ({"n": 2, "nmr": {"couplings_hz": [[0, 1], [0]]}}, "nmr.couplings_hz"),
    ],
)
def test_load_system_error_paths(doc, path):
    with pytest.raises(ConfigError) as exc:
        load_system(doc)
    assert exc.value.path == path


def test_dimension_cap():
    with pytest.raises(ValueError):
        build_controls(13)
    with pytest.raises(ConfigError):
        load_system({"n": 4, "terms": []}, cap=3)
