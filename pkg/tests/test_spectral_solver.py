import math
import warnings

import numpy as np
import pytest

from qsdlab.model_measure import lambda0_lower_bound, polynomial_sigma, tabulated_sigma
from qsdlab.spectral_solver import (SpectralError, TruncationWarning, build_grid, conditioned_masses, decay_table,
                                    ground_state_residual, hs_bound, interpolate_mode, law_bin_masses,
                                    law_quantile_edges, parity_defect, qed, qsd, qsd_exit_law, refine_and_compare,
                                    semigroup_survival, solve, survival_scaled, uniform_decay_rate,
                                    write_decay_csv, write_qsd_csv, write_spectrum_csv, yaglom_rate)

OMEGA_15 = 1.59576912160573071
# independent Nystrom solve (x = tan(pi u/2), plain Gauss-Legendre, n = 400, 800, 1600 per side),
# Aitken-extrapolated in n
LAMBDA0_REF = 2.0916914
LAMBDA1_REF = 6.4017650


def test_trace_equals_green_diagonal_integral(dec400):
    # sum of Green eigenvalues = int G(x, x) mu(dx) = omega_alpha * I
    trace = float(np.sum(1.0 / dec400.eigenvalues))
    assert trace == pytest.approx(OMEGA_15 * math.pi / 4, rel=2e-6)


def test_eigenvalues_against_independent_nystrom(dec400):
    assert dec400.lambda0 == pytest.approx(LAMBDA0_REF, rel=1e-3)
    assert dec400.eigenvalues[1] == pytest.approx(LAMBDA1_REF, rel=3e-3)


def test_refinement_moves_towards_reference(poly, dec400):
    rep = refine_and_compare(poly, 400)
    assert abs(rep.eigenvalues_fine[0] - LAMBDA0_REF) < abs(rep.eigenvalues_coarse[0] - LAMBDA0_REF)
    assert rep.relative_change[0] < 1e-3
    # higher modes oscillate more and resolve more slowly
    assert np.all(np.diff(rep.relative_change) > 0)
    assert rep.psi0_change < 1e-3


def test_lower_bound_and_hs(poly, dec400):
    assert dec400.lambda0 >= lambda0_lower_bound(poly)
    assert dec400.hs_norm <= hs_bound(poly)
    # a positive operator has HS norm <= trace and >= its top eigenvalue
    assert 1 / dec400.lambda0 <= dec400.hs_norm <= float(np.sum(1 / dec400.eigenvalues))


def test_orthonormal_in_l2_mu(dec400):
    psi = dec400.eigenvectors[:, :20]
    gram = psi.T @ (dec400.grid.weights[:, None] * psi)
    assert np.max(np.abs(gram - np.eye(20))) < 1e-10


def test_residual_and_interpolation(dec400):
    assert ground_state_residual(dec400) < 1e-8
    on_nodes = interpolate_mode(dec400, 0, dec400.grid.nodes)
    assert np.max(np.abs(on_nodes - dec400.psi0)) < 1e-9 * np.max(dec400.psi0)


def test_ground_state_positive_even_and_laws(dec400):
    assert np.all(dec400.psi0 > 0)
    assert parity_defect(dec400, 0) < 1e-6
    assert parity_defect(dec400, 1, odd=True) < 1e-6
    nu = qsd(dec400).masses(dec400.grid)
    m = qed(dec400).masses(dec400.grid)
    assert nu.sum() == pytest.approx(1.0, abs=1e-12)
    assert m.sum() == pytest.approx(1.0, abs=1e-10)


def test_full_expansion_is_complete(dec400):
    # with every mode kept, sum_n <1, psi_n> psi_n = 1 on the grid
    assert np.max(np.abs(survival_scaled(dec400, [0.0])[0] - 1.0)) < 1e-8


def test_qsd_exit_law_is_exponential(dec400):
    t = np.array([0.0, 0.5, 2.0, 5.0])
    assert np.allclose(qsd_exit_law(dec400, t), np.exp(-dec400.lambda0 * t), rtol=1e-10)


def test_survival_decreasing_and_uniform_rate(dec400):
    x = dec400.grid.nearest(1.0)
    s = [semigroup_survival(dec400, t, x) for t in (0.1, 0.5, 1.0, 3.0)]
    assert all(a > b for a, b in zip(s, s[1:]))
    assert uniform_decay_rate(dec400, 10.0) == pytest.approx(dec400.lambda0, rel=0.02)
    assert abs(uniform_decay_rate(dec400, 20.0) - dec400.lambda0) < abs(uniform_decay_rate(dec400, 5.0) - dec400.lambda0)
    with pytest.raises(ValueError):
        uniform_decay_rate(dec400, 0.0)


def test_conditioned_law_converges_at_the_gap(dec400):
    x = dec400.grid.nearest(1.0)
    nu = qsd(dec400).masses(dec400.grid)
    far = conditioned_masses(dec400, x, 10.0)
    assert 0.5 * np.abs(far - nu).sum() < 1e-6
    assert yaglom_rate(dec400, x) == pytest.approx(-dec400.gap, rel=0.05)


def test_truncated_expansion_warns(dec400):
    with pytest.warns(TruncationWarning):
        survival_scaled(dec400, [0.01], modes=3)
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationWarning)
        survival_scaled(dec400, [5.0], modes=60)


def test_bin_masses_match_quantiles(dec400, poly):
    edges = law_quantile_edges(dec400, 10)
    assert np.all(np.diff(edges) > 0) and edges[0] == -np.inf and edges[-1] == np.inf
    assert np.allclose(edges[1:-1], -edges[1:-1][::-1], atol=1e-9)
    masses = law_bin_masses(dec400, poly, edges)
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(masses, 0.1, atol=2e-3)
    m = law_bin_masses(dec400, poly, law_quantile_edges(dec400, 4, "qed"), "qed")
    assert np.allclose(m, 0.25, atol=2e-3)


def test_divergent_entrance_refused():
    with pytest.raises(SpectralError) as info:
        solve(polynomial_sigma(1.5, 1.0), 64)
    assert info.value.code == "DIVERGENT_ENTRANCE"


@pytest.mark.parametrize("n,L", [(15, "auto"), (17, "auto"), (64, "big"), (64, 1e-9)])
def test_bad_grid_arguments(poly, n, L):
    with pytest.raises(ValueError):
        build_grid(poly, n, L)


def test_grid_symmetry_and_tail(poly):
    g = build_grid(poly, 400)
    assert np.array_equal(g.nodes, -g.nodes[::-1])
    assert np.all(g.nodes != 0.0) and g.tail_error < 1e-8
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-6)
    assert abs(build_grid(poly, 800, g.L).weights.sum() - 1) < abs(g.weights.sum() - 1)


def test_tabulated_even_profile_solves():
    x = np.concatenate([-np.logspace(3, -2, 81), [0.0], np.logspace(-2, 3, 81)])
    tab = tabulated_sigma(1.5, x, (1 + np.abs(x)) ** 2)
    dec = solve(tab, 200)
    assert dec.lambda0 == pytest.approx(LAMBDA0_REF, rel=5e-3)
    assert parity_defect(dec, 0) < 1e-6


def test_writers(tmp_path, dec400):
    write_spectrum_csv(tmp_path / "s.csv", dec400, 10)
    write_qsd_csv(tmp_path / "q.csv", dec400)
    write_decay_csv(tmp_path / "d.csv", dec400, 1.0, [0.0, 1.0, 2.0])
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "n,lambda_n" and len(lines) == 11
    assert (tmp_path / "q.csv").read_text().splitlines()[0] == "x,weight,psi0,qsd_density,qed_density"
    rows = decay_table(dec400, 1.0, [0.0, 1.0])
    assert math.isnan(rows[0][2]) and rows[0][1] == pytest.approx(1.0, abs=1e-8)
