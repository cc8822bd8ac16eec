import warnings

import numpy as np
import pytest

from fermiwick import edengine as ed
from fermiwick.errors import AmbiguousLabelError, CapacityError, InvalidArgumentError
from fermiwick.spectra import spectrum_to_mode_energies
from fermiwick.wick import report

# direct natural-orbital W at L=8, M=4, V=2, cut=4; reproduced with dense
# full-chain Jordan-Wigner operators independent of the sector code
W_L8_V2 = 0.033882029318657525


def jordan_wigner(length):
    """Dense c_i on the full 2**L Fock space, bit i = site i."""
    dim = 1 << length
    ops = []
    for i in range(length):
        c = np.zeros((dim, dim))
        for s in range(dim):
            if (s >> i) & 1:
                c[s ^ (1 << i), s] = (-1) ** bin(s & ((1 << i) - 1)).count("1")
        ops.append(c)
    return ops


def dense_hamiltonian(model):
    c = jordan_wigner(model.length)
    n = [ci.T @ ci for ci in c]
    h = sum(model.chemical_potential * ni for ni in n)
    for i, j in model.bonds():
        h = h - model.hopping * (c[i].T @ c[j] + c[j].T @ c[i]) + model.interaction * n[i] @ n[j]
    return h


def pipeline_parts(model, cut):
    ham = ed.build_hamiltonian(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ed.DegenerateGroundStateWarning)
        gs = ed.ground_state(ham)
    rs = ed.reduced_density_matrix(gs.vector, ham.basis, model.length, cut)
    return ham, gs, rs, ed.natural_orbitals(rs)


@pytest.mark.parametrize("boundary", ["open", "periodic"])
def test_hamiltonian_matches_full_fock_space(boundary):
    model = ed.LatticeModel(6, hopping=0.8, interaction=1.3, chemical_potential=0.2, boundary=boundary)
    ham = ed.build_hamiltonian(model)
    full = dense_hamiltonian(model)
    idx = ham.basis
    np.testing.assert_allclose(ham.matrix, full[np.ix_(idx, idx)], atol=1e-14)


def test_two_site_spectrum():
    ham = ed.build_hamiltonian(ed.LatticeModel(2, hopping=1.5, filling=1))
    np.testing.assert_allclose(np.linalg.eigvalsh(ham.matrix), [-1.5, 1.5])


def test_free_ground_energy():
    length, filling = 10, 5
    gs = ed.ground_state(ed.build_hamiltonian(ed.LatticeModel(length)))
    k = np.arange(1, length + 1)
    single = np.sort(-2 * np.cos(np.pi * k / (length + 1)))
    assert gs.energy == pytest.approx(single[:filling].sum(), abs=1e-12)


def test_degenerate_ground_state_warns():
    with pytest.warns(ed.DegenerateGroundStateWarning):
        gs = ed.ground_state(ed.build_hamiltonian(ed.LatticeModel(4, boundary="periodic")))
    assert gs.degenerate


def test_ground_state_input_checks():
    with pytest.raises(InvalidArgumentError):
        ed.ground_state(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InvalidArgumentError):
        ed.ground_state(np.zeros((2, 3)))


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        ed.LatticeModel(1)
    with pytest.raises(InvalidArgumentError):
        ed.LatticeModel(4, boundary="twisted")
    with pytest.raises(InvalidArgumentError):
        ed.LatticeModel(4, filling=5)
    with pytest.raises(CapacityError):
        ed.build_hamiltonian(ed.LatticeModel(22))


def test_ground_state_phase_is_deterministic():
    model = ed.LatticeModel(8, interaction=1.0)
    a = ed.ground_state(ed.build_hamiltonian(model)).vector
    b = ed.ground_state(ed.build_hamiltonian(model)).vector
    assert np.array_equal(a, b)
    assert a[np.flatnonzero(np.abs(a) > 1e-8)[0]] > 0


def test_reduced_density_matrix_against_dense_partial_trace():
    model = ed.LatticeModel(8, interaction=0.7)
    ham, gs, rs, _ = pipeline_parts(model, 3)
    full = np.zeros(1 << 8)
    full[ham.basis] = gs.vector
    psi = full.reshape(1 << 5, 1 << 3)  # row index = B bits, column index = A bits
    rho = psi.T @ psi
    np.testing.assert_allclose(rs.rho_a, rho, atol=1e-14)
    np.testing.assert_allclose(np.sort(rs.eigvals), np.linalg.eigvalsh(rho), atol=1e-14)
    assert np.trace(rs.rho_a) == pytest.approx(1.0, abs=1e-13)
    assert rs.eigvals.min() >= 0
    assert ed.number_commutator_norm(rs) < 1e-14


def test_reduced_eigenvectors_diagonalize_rho():
    _, _, rs, _ = pipeline_parts(ed.LatticeModel(8, interaction=1.0), 4)
    d = rs.eigvecs.T @ rs.rho_a @ rs.eigvecs
    np.testing.assert_allclose(d, np.diag(rs.eigvals), atol=1e-13)


def test_cut_range():
    ham = ed.build_hamiltonian(ed.LatticeModel(4))
    gs = ed.ground_state(ham)
    with pytest.raises(InvalidArgumentError):
        ed.reduced_density_matrix(gs.vector, ham.basis, 4, 4)


def test_free_natural_orbitals_match_single_particle_correlations():
    length, cut = 10, 5
    _, _, rs, nob = pipeline_parts(ed.LatticeModel(length), cut)
    h1 = -(np.eye(length, k=1) + np.eye(length, k=-1))
    _, phi = np.linalg.eigh(h1)
    corr = phi[:cut, : length // 2] @ phi[:cut, : length // 2].T
    np.testing.assert_allclose(nob.corr, corr, atol=1e-13)
    np.testing.assert_allclose(nob.occupations, np.sort(np.linalg.eigvalsh(corr))[::-1], atol=1e-13)


def test_free_spectrum_is_gaussian():
    _, _, rs, nob = pipeline_parts(ed.LatticeModel(8), 4)
    s = ed.label_spectrum(rs, nob)
    nu = nob.occupations
    eps = np.log((1 - nu) / nu)
    m = spectrum_to_mode_energies(s)
    resolved = np.exp(-s.energies) > 1e-8
    assert resolved.sum() >= 8
    np.testing.assert_allclose(m.single, eps, atol=1e-6)
    assert ed.additivity_defect(s) < 1e-10
    assert max(abs(v) for v in ed.reference_pair_energies(s).values()) < 1e-10


def test_free_chain_satisfies_wick():
    _, _, rs, nob = pipeline_parts(ed.LatticeModel(8), 4)
    assert ed.direct_wick_violation(rs, nob).w_max < 1e-12
    for i in range(4):
        for j in range(4):
            assert ed.verify_full_wick(rs, i, j) < 1e-12
    assert ed.max_anomalous_correlator(rs, nob) < 1e-14


def test_interacting_chain_breaks_wick():
    _, _, rs, nob = pipeline_parts(ed.LatticeModel(8, interaction=2.0), 4)
    assert ed.direct_wick_violation(rs, nob).w_max == pytest.approx(W_L8_V2, abs=1e-10)
    assert max(ed.verify_full_wick(rs, i, j) for i in range(4) for j in range(4)) > 1e-3
    with pytest.raises(InvalidArgumentError):
        ed.verify_full_wick(rs, 0, 4)


def test_direct_w_against_dense_operators():
    model = ed.LatticeModel(6, interaction=1.5)
    _, _, rs, nob = pipeline_parts(model, 3)
    c = jordan_wigner(3)
    a = [sum(nob.orbitals[j, k] * c[j] for j in range(3)) for k in range(3)]
    n = [ak.T @ ak for ak in a]
    occ = [np.trace(rs.rho_a @ nk) for nk in n]
    rep = ed.direct_wick_violation(rs, nob)
    for (k, l), w in rep.pairwise.items():
        assert w == pytest.approx(abs(np.trace(rs.rho_a @ n[k] @ n[l]) - occ[k] * occ[l]), abs=1e-14)


def test_labels_agree_with_direct_correlators_off_half_cut():
    # an odd cut of an even chain keeps the free spectrum non-degenerate
    _, _, rs, nob = pipeline_parts(ed.LatticeModel(8, interaction=0.5), 3)
    s = ed.label_spectrum(rs, nob)
    exact = report(spectrum_to_mode_energies(s)).w_max
    direct = ed.direct_wick_violation(rs, nob).w_max
    assert abs(exact - direct) <= 5e-3


def test_half_cut_labeling_is_ambiguous_when_interacting():
    # particle-hole partner levels of the free spectrum are degenerate and mix
    _, _, rs, nob = pipeline_parts(ed.LatticeModel(8, interaction=0.5), 4)
    with pytest.raises(AmbiguousLabelError):
        ed.label_spectrum(rs, nob)


def test_unlabeled_spectrum_floor():
    _, _, rs, _ = pipeline_parts(ed.LatticeModel(8), 4)
    s = ed.entanglement_spectrum(rs, floor=1e-6)
    assert s.flagged.any()
    assert np.all(np.isfinite(s.energies))
    assert s.energies.max() == pytest.approx(-np.log(1e-6))
    assert not s.normalized
    assert ed.entanglement_spectrum(rs).normalized


def test_operator_site_limit():
    rs = ed.ReducedState(11, np.eye(1), np.ones(1), np.eye(1), np.zeros(1))
    nob = ed.NaturalOrbitalBasis(np.eye(11), np.zeros(11), np.eye(11))
    with pytest.raises(CapacityError):
        ed.direct_wick_violation(rs, nob)


def test_pipeline_records_labeling_failure():
    res = ed.run_pipeline(ed.LatticeModel(8, interaction=1.0), 4)
    assert not res.labeled and "Ambiguous" in res.labeling_error
    assert res.spectrum.labels is None
    assert res.fit.d_f > 0


def test_pipeline_is_deterministic():
    a = ed.run_pipeline(ed.LatticeModel(8, interaction=0.5), 3)
    b = ed.run_pipeline(ed.LatticeModel(8, interaction=0.5), 3)
    assert a.wick.w_max == b.wick.w_max and a.fit.d_f == b.fit.d_f
    assert np.array_equal(a.spectrum.energies, b.spectrum.energies)
