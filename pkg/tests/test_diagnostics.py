"""Diagnostics tests: pointwise functionals, sharp constants, inequality
probes, duality refinement, and the ensemble growth fit.

Frozen values use fields whose norms are dyadic-exact at cell centers
(uniform directors, unit boxes) so the expected numbers are closed-form.
"""

from __future__ import annotations

import dataclasses
from types import SimpleNamespace

import numpy as np
import pytest

from slcsim.config import SimConfig
from slcsim.errors import ConfigError, DomainError
from slcsim.fields import State, l2_norm, spectral_summary
from slcsim.grid import build_grid, cosine_transform, inverse_cosine_transform
from slcsim.integrators import run_trajectory
from slcsim.operators import b2, leray_project, m_term
from slcsim.diagnostics import (
    EnergyRecord,
    contraction_slopes,
    duality_gap,
    duality_gap_mixed,
    energy_q,
    energy_records,
    ensemble_energy_bound,
    gn_l4_ratio,
    gn_linf_ratio,
    lipschitz_probe_F,
    max_principle_gap,
    penalty_energy,
    phi_increment,
    phi_rate,
    probe_suite,
    psi_functional,
    random_probe_state,
    random_smooth_scalar,
    random_smooth_vector,
    remark_ratio,
    richardson_order,
    young_constant,
)

G16 = build_grid(2, (16, 16), (1.0, 1.0))
G32 = build_grid(2, (32, 32), (1.0, 1.0))
G64 = build_grid(2, (64, 64), (1.0, 1.0))


def _uniform_director(grid, components) -> np.ndarray:
    d = np.zeros((3, *grid.cells))
    for i, c in enumerate(components):
        d[i] = c
    return d


# ---------------------------------------------------------------------------
# pointwise functionals with closed-form values
# ---------------------------------------------------------------------------

def test_max_principle_gap_frozen_values():
    # |d|^2 = 1 + 1/4 exactly in binary; excess^2 * volume = 1/16
    d = _uniform_director(G16, (1.0, 0.5, 0.0))
    assert max_principle_gap(G16, d) == 0.0625
    assert max_principle_gap(G16, _uniform_director(G16, (0.0, 0.0, 1.0))) == 0.0
    assert max_principle_gap(G16, _uniform_director(G16, (0.3, 0.0, 0.0))) == 0.0


def test_penalty_energy_frozen_values_and_domain():
    d = _uniform_director(G16, (0.5, 0.5, 0.5))      # |d|^2 = 3/4, deficit -1/4
    assert penalty_energy(G16, d, 1.0) == 0.015625   # (1/16)/4
    assert penalty_energy(G16, d, 0.5) == 0.0625     # deficit^2 / (4 eps^2)
    assert penalty_energy(G16, _uniform_director(G16, (1.0, 0.0, 0.0)), 1.0) == 0.0
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            penalty_energy(G16, d, bad)


def test_energy_q_frozen_values_and_domain():
    state = State(G16, np.zeros((2, 16, 16)), _uniform_director(G16, (0.0, 0.0, 0.5)), 0.0)
    assert energy_q(state, 2.0) == pytest.approx(0.25, rel=1e-13)
    assert energy_q(state, 4.0) == pytest.approx(0.0625, rel=1e-13)
    with pytest.raises(DomainError):
        energy_q(state, 1.5)


def test_energy_q_matches_spectral_summary_composition():
    state = random_probe_state(G32, seed=9)
    summ = spectral_summary(state)
    expected = summ["l2_v"] ** 2 + summ["l2_d"] ** 2 + summ["grad_d"] ** 2
    assert energy_q(state, 2.0) == pytest.approx(expected, rel=1e-12)


def test_psi_functional_frozen_values():
    """Uniform directors have zero spectral Laplacian, so the residual is the
    penalty drift alone: |f|^2 = ((1-c^2) c / eps^2)^2 * volume."""
    half = _uniform_director(G16, (0.0, 0.0, 0.5))
    assert psi_functional(G16, half, 1.0) == pytest.approx(0.140625, rel=1e-12)
    unit = _uniform_director(G16, (0.0, 0.0, 1.0))
    assert psi_functional(G16, unit, 1.0) == 0.0     # penalty inactive at |d| = 1


# ---------------------------------------------------------------------------
# sharp Young constant and the weight exponents
# ---------------------------------------------------------------------------

def test_young_constant_frozen_values():
    assert young_constant(1.0, 2.0, 2.0) == 0.25
    assert young_constant(1.0, 4.0 / 3.0, 4.0) == pytest.approx(
        0.75 * 4.0 ** (-1.0 / 3.0), rel=1e-13
    )


@pytest.mark.parametrize("alpha,p,q", [(1.0, 4.0 / 3.0, 4.0), (2.0, 3.0, 1.5), (0.5, 2.0, 2.0)])
def test_young_constant_is_sharp(alpha, p, q):
    """The returned C satisfies ab <= C a^p + alpha b^q everywhere AND attains
    equality at the analytic optimizer a* = (pC)^(-1/(p-1)), b = 1 — so it is
    neither too small (inequality) nor too large (tightness)."""
    c = young_constant(alpha, p, q)
    rng = np.random.default_rng(0)
    a = rng.uniform(1e-3, 5.0, size=500)
    b = rng.uniform(1e-3, 5.0, size=500)
    assert np.all(a * b <= c * a**p + alpha * b**q + 1e-12)
    a_star = (p * c) ** (-1.0 / (p - 1.0))
    residual = c * a_star**p + alpha - a_star
    assert abs(residual) <= 1e-10


@pytest.mark.parametrize(
    "alpha,p,q",
    [(0.0, 2.0, 2.0), (-1.0, 2.0, 2.0), (1.0, 1.0, 2.0), (1.0, 3.0, 3.0)],
)
def test_young_constant_rejects_bad_exponents(alpha, p, q):
    with pytest.raises(DomainError):
        young_constant(alpha, p, q)


def test_phi_rate_two_dimensional_closed_form():
    # n = 2: exponents (4/3, 4), velocity power 2n/(4-n) = 2
    expected = 0.75 * 4.0 ** (-1.0 / 3.0) * 2.0**2 * 3.0**2
    assert phi_rate(2.0, 3.0, 2) == pytest.approx(expected, rel=1e-13)
    assert phi_rate(0.0, 3.0, 2) == 0.0


def test_phi_rate_singular_dimension_and_negative_dt():
    with pytest.raises(DomainError):
        phi_rate(1.0, 1.0, 4)
    state = random_probe_state(G16, seed=2)
    with pytest.raises(DomainError):
        phi_increment(state, -1e-3)


def test_phi_increment_is_rate_times_dt():
    state = random_probe_state(G16, seed=2)
    summ = spectral_summary(state)
    rate = phi_rate(summ["l2_v"], summ["a_half_v"], 2)
    assert phi_increment(state, 1e-3) == pytest.approx(rate * 1e-3, rel=1e-12)
    assert phi_increment(state, 0.0) == 0.0


# ---------------------------------------------------------------------------
# inequality probes
# ---------------------------------------------------------------------------

def test_lipschitz_probe_is_positive_finite_and_rejects_identical_states():
    y1 = random_probe_state(G32, seed=4)
    y2 = random_probe_state(G32, seed=104)
    ratio = lipschitz_probe_F(y1, y2)
    assert np.isfinite(ratio) and ratio > 0.0
    with pytest.raises(DomainError):
        lipschitz_probe_F(y1, y1)


def test_remark_ratio_positive_and_stable_under_refinement():
    vals = []
    for g in (G16, G64):
        batch = [
            remark_ratio(g, random_smooth_vector(g, 77 * k, 3, bc_kind="neumann"))
            for k in range(10)
        ]
        assert all(np.isfinite(r) and r > 0.0 for r in batch)
        vals.append(max(batch))
    assert max(vals) / min(vals) <= 2.0


@pytest.mark.parametrize("ratio_fn", [gn_l4_ratio, gn_linf_ratio])
def test_interpolation_ratios_positive_and_degenerate_input_rejected(ratio_fn):
    u = random_smooth_scalar(G32, seed=5)
    r = ratio_fn(G32, u)
    assert np.isfinite(r) and 0.0 < r < 2.0
    with pytest.raises(DomainError):
        ratio_fn(G32, np.zeros(G32.cells))


# ---------------------------------------------------------------------------
# random smooth fields
# ---------------------------------------------------------------------------

def test_random_smooth_scalar_is_deterministic_and_peak_normalized():
    u = random_smooth_scalar(G32, seed=3, amplitude=1.7)
    again = random_smooth_scalar(G32, seed=3, amplitude=1.7)
    assert np.array_equal(u, again)
    assert float(np.max(np.abs(u))) == pytest.approx(1.7, rel=1e-14)


def test_random_smooth_scalar_samples_one_continuum_function():
    # same seed on finer grids must sample the same function: the cell-center
    # quadrature of its L2 norm converges, it does not wander
    for seed in (0, 3):
        coarse = l2_norm(G16, random_smooth_scalar(G16, seed))
        fine = l2_norm(G64, random_smooth_scalar(G64, seed))
        assert abs(coarse - fine) / fine <= 0.05


def test_random_probe_state_is_solenoidal_with_anchored_director():
    from slcsim.grid import divergence

    state = random_probe_state(G32, seed=8)
    assert float(np.max(np.abs(divergence(G32, state.v, "dirichlet")))) <= 1e-10
    mag = np.sqrt(np.sum(state.d**2, axis=0))
    assert 0.2 <= float(np.min(mag)) and float(np.max(mag)) <= 2.5


# ---------------------------------------------------------------------------
# duality refinement
# ---------------------------------------------------------------------------

def test_duality_gap_shrinks_at_second_order():
    gaps, spacings = [], []
    for g in (G16, G32, G64):
        gaps.append(float(np.mean([duality_gap(g, k) for k in range(4)])))
        spacings.append(g.spacings[0])
    assert gaps[0] > gaps[1] > gaps[2]
    assert 1.6 <= richardson_order(gaps, spacings) <= 2.4


def test_mixed_duality_needs_the_symmetrized_pairing():
    """With two distinct directors only the polarized combination is a
    continuum identity.  The one-sided pairing carries an O(1) antisymmetric
    residual that refinement cannot remove — checking it would be checking a
    false statement, so the probe must symmetrize."""

    def one_sided(g, seed):
        v = leray_project(g, random_smooth_vector(g, seed, 2, bc_kind="dirichlet"))
        d1 = random_smooth_vector(g, seed + 101, 3, bc_kind="neumann")
        d2 = random_smooth_vector(g, seed + 202, 3, bc_kind="neumann")
        lam = g.spectrum().neumann_eigenvalues
        lap1 = inverse_cosine_transform(g, -lam * cosine_transform(g, d1))
        lhs = float(np.sum(b2(g, v, d2) * lap1) * g.cell_volume)
        rhs = float(np.sum(m_term(g, d1, d2) * v) * g.cell_volume)
        return abs(lhs - rhs)

    sym, lop = [], []
    for g in (G16, G32, G64):
        sym.append(float(np.mean([duality_gap_mixed(g, k) for k in range(4)])))
        lop.append(float(np.mean([one_sided(g, k) for k in range(4)])))
    assert sym[0] / sym[1] >= 3.0 and sym[1] / sym[2] >= 3.0
    assert all(v > 1.0 for v in lop)                      # stuck at O(1)
    assert max(lop) / min(lop) <= 1.3                     # ... and stable there


def test_richardson_order_recovers_exact_power_laws():
    h = np.array([1 / 16, 1 / 32, 1 / 64])
    assert richardson_order(h**2, h) == pytest.approx(2.0, abs=1e-12)
    assert richardson_order(3.0 * h**1.5, h) == pytest.approx(1.5, abs=1e-12)


# ---------------------------------------------------------------------------
# energy records and the ensemble fit
# ---------------------------------------------------------------------------

def test_energy_record_validation():
    row = EnergyRecord(t=0.0, e_q=1.0, psi=0.1, phi_weight=1.0,
                       max_gap=0.0, a_half_v=0.5, grad_d=0.2, lap_d=0.3)
    with pytest.raises(dataclasses.FrozenInstanceError):
        row.e_q = 2.0  # type: ignore[misc]
    for bad in (
        dict(e_q=-1.0),
        dict(phi_weight=0.0),
        dict(phi_weight=1.5),
        dict(psi=float("nan")),
    ):
        kwargs = dict(t=0.0, e_q=1.0, psi=0.1, phi_weight=1.0,
                      max_gap=0.0, a_half_v=0.5, grad_d=0.2, lap_d=0.3)
        kwargs.update(bad)
        with pytest.raises(ValueError):
            EnergyRecord(**kwargs)


def test_energy_records_expand_a_trajectory():
    cfg = SimConfig(n_dim=2, cells=(16, 16), lengths=(1.0, 1.0),
                    dt=1e-3, horizon=5e-3, mode_count=8)
    rec = run_trajectory(cfg)
    rows = energy_records(rec)
    assert len(rows) == len(rec.times) == 6
    assert rows[0].t == 0.0 and rows[0].phi_weight == 1.0
    assert all(r.e_q > 0.0 for r in rows)


def _fake_record(times, energy):
    return SimpleNamespace(times=np.asarray(times), series={"energy_q": np.asarray(energy)})


def test_ensemble_fit_recovers_exact_exponential_growth():
    t = np.linspace(0.0, 1.0, 11)
    fit = ensemble_energy_bound([_fake_record(t, 2.0 * np.exp(0.7 * t))])
    assert fit.c_growth == pytest.approx(0.7, abs=1e-10)
    assert fit.violation_count == 0
    assert fit.e0 == 2.0


def test_ensemble_fit_reports_zero_growth_for_decaying_energy():
    t = np.linspace(0.0, 1.0, 11)
    fit = ensemble_energy_bound([_fake_record(t, np.exp(-t))])
    assert fit.c_growth == 0.0
    assert fit.violation_count == 0
    assert np.all(fit.mean_energy <= fit.e0)


def test_ensemble_fit_truncates_to_common_length_and_averages():
    t_long = np.linspace(0.0, 1.0, 9)
    fit = ensemble_energy_bound([
        _fake_record(t_long, np.full(9, 2.0)),
        _fake_record(t_long[:5], np.full(5, 4.0)),
    ])
    assert fit.n_trajectories == 2
    assert len(fit.times) == 5
    assert fit.e0 == 3.0                 # mean of the two initial energies


def test_ensemble_fit_rejects_empty_or_zero_energy_input():
    with pytest.raises(ConfigError):
        ensemble_energy_bound([])
    t = np.linspace(0.0, 1.0, 5)
    with pytest.raises(ConfigError):
        ensemble_energy_bound([_fake_record(t, np.zeros(5))])


# ---------------------------------------------------------------------------
# contraction and the probe suite
# ---------------------------------------------------------------------------

def test_contraction_ratios_shrink_with_the_window():
    cfg = SimConfig(n_dim=2, cells=(16, 16), lengths=(1.0, 1.0),
                    dt=1e-3, horizon=0.02, mode_count=8, scheme="picard")
    slope, ratios = contraction_slopes(cfg, (0.004, 0.008))
    assert all(0.0 < r < 1.0 for r in ratios)
    assert ratios[0] < ratios[1]         # shorter window contracts harder
    assert 0.0 < slope < 1.5


def test_probe_suite_passes_and_carries_bounds():
    results = probe_suite(seed=0)
    failed = [r for r in results if not r.passed]
    assert not failed, [f"{r.name}: {r.value} not in [{r.low}, {r.high}] {r.detail}" for r in failed]
    names = {r.name for r in results}
    assert {"b1_skew_symmetry", "duality_order", "lipschitz_amplitude_stability"} <= names
    for r in results:
        assert r.low <= r.high and np.isfinite(r.value)


def test_probe_suite_contraction_needs_a_config():
    with pytest.raises(ConfigError):
        probe_suite(seed=0, include_contraction=True, cfg=None)
