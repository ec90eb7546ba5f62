"""Numerically checkable structure: energy records, inequality probes, fits.

Everything here is post-hoc analysis on states or trajectory records.  The
probes estimate the constants of interpolation/Lipschitz inequalities on
batches of random smooth fields; tests assert stability of those estimates
(across refinement, amplitude) rather than specific values, because the
underlying constants are existence-level and the discrete norms carry
mesh-dependent equivalence factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .fields import (
    State,
    e_norm,
    h_norm,
    grad_seminorm,
    l2_norm,
    l4_norm,
    linf_norm,
    spectral_summary,
    v_norm,
)
from .grid import Grid, build_grid, centered_gradient, cosine_transform
from .grid import inverse_cosine_transform
from .operators import b1, b2, ericksen_divergence, f_penalty, leray_project, m_term

__all__ = [
    "EnergyRecord",
    "EnsembleFit",
    "ProbeResult",
    "energy_records",
    "max_principle_gap",
    "penalty_energy",
    "energy_q",
    "psi_functional",
    "young_constant",
    "phi_rate",
    "phi_increment",
    "lipschitz_probe_F",
    "remark_ratio",
    "gn_l4_ratio",
    "gn_linf_ratio",
    "random_smooth_scalar",
    "random_smooth_vector",
    "random_probe_state",
    "duality_gap",
    "duality_gap_mixed",
    "richardson_order",
    "ensemble_energy_bound",
    "contraction_slopes",
    "probe_suite",
]


# ---------------------------------------------------------------------------
# per-time energy record
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyRecord:
    """One row of the monitored energy/diagnostic quantities.

    All entries are finite and nonnegative; phi_weight lies in (0, 1].
    The last three columns are the dissipation channels of the balance law.
    """

    t: float
    e_q: float
    psi: float
    phi_weight: float
    max_gap: float
    a_half_v: float
    grad_d: float
    lap_d: float

    def __post_init__(self) -> None:
        vals = (self.t, self.e_q, self.psi, self.phi_weight, self.max_gap,
                self.a_half_v, self.grad_d, self.lap_d)
        if not all(np.isfinite(v) and v >= 0.0 for v in vals):
            raise ValueError("energy record entries must be finite and nonnegative")
        if not 0.0 < self.phi_weight <= 1.0:
            raise ValueError("phi_weight must lie in (0, 1]")


def energy_records(traj) -> list[EnergyRecord]:
    """Expand a trajectory record's series into typed rows."""
    s = traj.series
    return [
        EnergyRecord(
            t=float(traj.times[i]),
            e_q=float(s["energy_q"][i]),
            psi=float(s["psi"][i]),
            phi_weight=float(s["phi_weight"][i]),
            max_gap=float(s["max_gap"][i]),
            a_half_v=float(s["a_half_v"][i]),
            grad_d=float(s["grad_d"][i]),
            lap_d=float(s["lap_d"][i]),
        )
        for i in range(len(traj.times))
    ]


# ---------------------------------------------------------------------------
# pointwise functionals
# ---------------------------------------------------------------------------

def max_principle_gap(grid: Grid, d: np.ndarray) -> float:
    """Cell sum of ((|d|^2 - 1)_+)^2; zero iff |d| <= 1 everywhere."""
    excess = np.maximum(np.sum(d * d, axis=0) - 1.0, 0.0)
    return float(np.sum(excess * excess) * grid.cell_volume)


def penalty_energy(grid: Grid, d: np.ndarray, eps: float) -> float:
    """Potential of the penalization drift: (1/4eps^2) sum ((|d|^2-1)_-)^2."""
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    deficit = np.minimum(np.sum(d * d, axis=0) - 1.0, 0.0)
    return float(np.sum(deficit * deficit) * grid.cell_volume / (4.0 * eps * eps))


def energy_q(state: State, q: float) -> float:
    """|v|^q + |d|^q + |grad d|^q in L2-based norms."""
    if q < 2.0:
        raise DomainError("energy exponent q must be >= 2")
    return (
        l2_norm(state.grid, state.v) ** q
        + l2_norm(state.grid, state.d) ** q
        + grad_seminorm(state.grid, state.d, "neumann") ** q
    )


def psi_functional(grid: Grid, d: np.ndarray, eps: float) -> float:
    """Squared residual |Delta d - f(d)|^2 with the Laplacian taken spectrally."""
    lam = grid.spectrum().neumann_eigenvalues
    lap = inverse_cosine_transform(grid, -lam * cosine_transform(grid, d))
    resid = lap - f_penalty(d, eps)
    return l2_norm(grid, resid) ** 2


# ---------------------------------------------------------------------------
# the weight Phi and its Young constant
# ---------------------------------------------------------------------------

def young_constant(alpha: float, p: float, q: float) -> float:
    """C in a*b <= C*a^p + alpha*b^q for conjugate exponents 1/p + 1/q = 1."""
    if alpha <= 0.0 or p <= 1.0 or q <= 1.0:
        raise DomainError("need alpha > 0 and p, q > 1")
    if abs(1.0 / p + 1.0 / q - 1.0) > 1e-12:
        raise DomainError("exponents are not conjugate")
    return (alpha * q) ** (-p / q) / p


def _phi_exponents(n_dim: int) -> tuple[float, float]:
    if n_dim == 4:
        raise DomainError("exponent 2n/(4-n) is singular at n = 4")
    return 8.0 / (n_dim + 4.0), 8.0 / (4.0 - n_dim)


def phi_rate(v_l2: float, a_half_v: float, n_dim: int, c_phi: float | None = None) -> float:
    """Instantaneous rate C_phi * |v|^2 * |A^{1/2}v|^{2n/(4-n)}."""
    p, q = _phi_exponents(n_dim)
    if c_phi is None:
        c_phi = young_constant(1.0, p, q)
    return c_phi * v_l2**2 * a_half_v ** (2.0 * n_dim / (4.0 - n_dim))


def phi_increment(state: State, dt: float, c_phi: float | None = None) -> float:
    """One left-endpoint quadrature cell of the integral defining the weight."""
    if dt < 0.0:
        raise DomainError("dt must be nonnegative")
    summ = spectral_summary(state)
    return phi_rate(summ["l2_v"], summ["a_half_v"], state.grid.n_dim, c_phi) * dt


# ---------------------------------------------------------------------------
# inequality probes
# ---------------------------------------------------------------------------

def _full_drift(state: State, eps: float) -> tuple[np.ndarray, np.ndarray]:
    grid = state.grid
    fv = leray_project(
        grid, b1(grid, state.v, state.v) + ericksen_divergence(grid, state.d, state.d)
    )
    fd = b2(grid, state.v, state.d) + f_penalty(state.d, eps)
    return fv, fd


def lipschitz_probe_F(y1: State, y2: State, eps: float = 1.0) -> float:
    """Ratio of |F(y1)-F(y2)|_H to the two-term bracket with exponent n/4.

    The bracket is |y1-y2|_V * ( |y1|_V^{1-a} |y1|_E^a
    + |y1-y2|_E^a |y1-y2|_V^{-a} |y2|_V + 1 ); its trailing +1 keeps the
    ratio defined whenever the states differ at all.
    """
    grid = y1.grid
    a = grid.n_dim / 4.0
    diff = State(grid, y1.v - y2.v, y1.d - y2.d, y1.t)
    dv = v_norm(diff)
    if dv == 0.0 and l2_norm(grid, diff.d) == 0.0:
        raise DomainError("identical states give an undefined ratio")
    fv1, fd1 = _full_drift(y1, eps)
    fv2, fd2 = _full_drift(y2, eps)
    num = np.sqrt(
        l2_norm(grid, fv1 - fv2) ** 2 + h_norm(grid, fd1 - fd2, 1, "neumann") ** 2
    )
    bracket = (
        v_norm(y1) ** (1.0 - a) * e_norm(y1) ** a
        + e_norm(diff) ** a * dv ** (-a) * v_norm(y2)
        + 1.0
    )
    return float(num / (dv * bracket))


def remark_ratio(grid: Grid, d: np.ndarray, eps: float = 1.0, c_tilde: float = 2.0) -> float:
    """|d|_{H2}^2 against the residual bound psi + 2*c_tilde*|d|^2."""
    denom = psi_functional(grid, d, eps) + 2.0 * c_tilde * l2_norm(grid, d) ** 2
    return h_norm(grid, d, 2, "neumann") ** 2 / denom


def _component_gradients(grid: Grid, u: np.ndarray, bc_kind: str) -> np.ndarray:
    comps = u.reshape(-1, *grid.cells)
    return np.concatenate([centered_gradient(grid, c, bc_kind) for c in comps])


def gn_l4_ratio(grid: Grid, u: np.ndarray, bc_kind: str = "dirichlet") -> float:
    """|u|_{L4} over |u|^{1-a} |grad u|^a with a = n/4."""
    a = grid.n_dim / 4.0
    grad = _component_gradients(grid, u, bc_kind)
    denom = l2_norm(grid, u) ** (1.0 - a) * l2_norm(grid, grad) ** a
    if denom == 0.0:
        raise DomainError("degenerate field for the interpolation probe")
    return l4_norm(grid, u) / denom


def gn_linf_ratio(grid: Grid, u: np.ndarray, bc_kind: str = "dirichlet") -> float:
    """|u|_inf over |u|_{L4}^{1-a} |grad u|_{L4}^a with a = n/4."""
    a = grid.n_dim / 4.0
    grad = _component_gradients(grid, u, bc_kind)
    denom = l4_norm(grid, u) ** (1.0 - a) * l4_norm(grid, grad) ** a
    if denom == 0.0:
        raise DomainError("degenerate field for the interpolation probe")
    return linf_norm(grid, u) / denom


# ---------------------------------------------------------------------------
# random smooth fields (grid-independent continuum functions)
# ---------------------------------------------------------------------------

def random_smooth_scalar(
    grid: Grid,
    seed: int,
    n_modes: int = 6,
    decay: float = 2.0,
    bc_kind: str = "dirichlet",
    amplitude: float = 1.0,
) -> np.ndarray:
    """Low-mode random series sampled at cell centers.

    The coefficients depend only on the seed, so refining the grid samples
    the *same* continuum function — exactly what refinement probes need.
    """
    rng = np.random.default_rng(seed)
    coords = grid.meshgrid()
    wave = np.sin if bc_kind == "dirichlet" else np.cos
    out = np.zeros(grid.cells)
    for idx in np.ndindex(*(n_modes,) * grid.n_dim):
        k = np.asarray(idx) + 1
        c = rng.standard_normal() / float(np.sum(k.astype(float) ** 2)) ** (decay / 2.0)
        term = c
        for ax in range(grid.n_dim):
            term = term * wave(k[ax] * np.pi * coords[ax] / grid.lengths[ax])
        out = out + term
    peak = float(np.max(np.abs(out)))
    return amplitude * out / peak if peak > 0 else out


def random_smooth_vector(
    grid: Grid,
    seed: int,
    components: int,
    n_modes: int = 6,
    decay: float = 2.0,
    bc_kind: str = "dirichlet",
    amplitude: float = 1.0,
) -> np.ndarray:
    return np.stack(
        [
            random_smooth_scalar(grid, seed * 977 + c, n_modes, decay, bc_kind, amplitude)
            for c in range(components)
        ]
    )


def random_probe_state(grid: Grid, seed: int, amplitude: float = 1.0) -> State:
    """Solenoidal random velocity plus a near-unit random director."""
    v = leray_project(
        grid, random_smooth_vector(grid, seed, grid.n_dim, bc_kind="dirichlet", amplitude=amplitude)
    )
    d = random_smooth_vector(grid, seed + 1, 3, bc_kind="neumann", amplitude=0.5 * amplitude)
    d[2] += 1.0  # anchor away from zero so |d| is O(1)
    return State(grid=grid, v=v, d=d, t=0.0)


# ---------------------------------------------------------------------------
# duality gap and Richardson order
# ---------------------------------------------------------------------------

def _spectral_laplacian(grid: Grid, d: np.ndarray) -> np.ndarray:
    lam = grid.spectrum().neumann_eigenvalues
    return inverse_cosine_transform(grid, -lam * cosine_transform(grid, d))


def duality_gap(grid: Grid, seed: int = 0, amplitude: float = 1.0) -> float:
    """|<B2(v,d), Delta d> - <m(d,d), v>| on one random smooth pair.

    With one director argument the continuum identity is exact; the discrete
    gap is pure discretization error, so refining the grid must shrink it at
    second order.
    """
    v = leray_project(
        grid, random_smooth_vector(grid, seed, grid.n_dim, bc_kind="dirichlet", amplitude=amplitude)
    )
    d = random_smooth_vector(grid, seed + 101, 3, bc_kind="neumann", amplitude=amplitude)
    lhs = float(np.sum(b2(grid, v, d) * _spectral_laplacian(grid, d)) * grid.cell_volume)
    rhs = float(np.sum(m_term(grid, d, d) * v) * grid.cell_volume)
    return abs(lhs - rhs)


def duality_gap_mixed(grid: Grid, seed: int = 0, amplitude: float = 1.0) -> float:
    """Polarized two-director version of the duality gap.

    For distinct director arguments only the symmetrized combination is an
    exact continuum identity (the one-sided pairing differs by a term that
    is antisymmetric under swapping the directors), so that is the
    combination whose discrete gap must vanish at second order.
    """
    v = leray_project(
        grid, random_smooth_vector(grid, seed, grid.n_dim, bc_kind="dirichlet", amplitude=amplitude)
    )
    d1 = random_smooth_vector(grid, seed + 101, 3, bc_kind="neumann", amplitude=amplitude)
    d2 = random_smooth_vector(grid, seed + 202, 3, bc_kind="neumann", amplitude=amplitude)
    lhs = float(np.sum(b2(grid, v, d2) * _spectral_laplacian(grid, d1)) * grid.cell_volume)
    lhs += float(np.sum(b2(grid, v, d1) * _spectral_laplacian(grid, d2)) * grid.cell_volume)
    rhs = float(
        np.sum((m_term(grid, d1, d2) + m_term(grid, d2, d1)) * v) * grid.cell_volume
    )
    return abs(lhs - rhs)


def richardson_order(values, spacings) -> float:
    """Least-squares slope of log(value) against log(h)."""
    x = np.log(np.asarray(spacings, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# ensemble growth fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleFit:
    c_growth: float
    violation_count: int
    e0: float
    n_trajectories: int
    times: np.ndarray
    mean_energy: np.ndarray


def ensemble_energy_bound(records, q: float | None = None) -> EnsembleFit:
    """Smallest C with mean energy_q(t) <= E(0) * exp(C t) over the horizon.

    Trajectories that halted early are truncated to the common time range.
    Statistically meaningful fits need a few dozen trajectories; the fit
    itself is defined for any nonempty ensemble (size 1 reduces to a single
    trajectory).  q is accepted for signature symmetry; the series were
    already produced with the configured exponent.
    """
    if not records:
        raise ConfigError("ensemble fit needs at least one trajectory record")
    n = min(len(r.times) for r in records)
    times = records[0].times[:n]
    mean = np.mean([r.series["energy_q"][:n] for r in records], axis=0)
    e0 = float(mean[0])
    if e0 <= 0.0:
        raise ConfigError("initial ensemble energy must be positive for a growth fit")
    with np.errstate(divide="ignore"):
        slopes = np.log(mean[1:] / e0) / times[1:]
    c_fit = max(0.0, float(np.max(slopes))) if n > 1 else 0.0
    bound = e0 * np.exp(c_fit * times)
    violations = int(np.sum(mean > bound * (1.0 + 1e-9)))
    return EnsembleFit(
        c_growth=c_fit,
        violation_count=violations,
        e0=e0,
        n_trajectories=len(records),
        times=times,
        mean_energy=mean,
    )


# ---------------------------------------------------------------------------
# contraction-slope probe
# ---------------------------------------------------------------------------

def contraction_slopes(cfg, windows) -> tuple[float, list[float]]:
    """Picard contraction factor versus window length, on the first window.

    Returns the log-log slope of the per-window mean contraction ratio
    against the window length, together with the measured ratios.  The
    step size is refined so even the shortest window holds >= 64 steps;
    otherwise quadrature error masks the continuum scaling of the factor.
    """
    from .integrators import initial_state, picard_solve
    from .noise import sample_path
    from .operators import OperatorCache

    grid = cfg.grid()
    cache = OperatorCache(grid, cfg.noise_spec(), cfg.magnetic_spec(), cfg.eps)
    y0 = initial_state(cfg, grid)
    dt = min(cfg.dt, min(windows) / 64.0)
    ratios = []
    for w in windows:
        n_win = max(2, int(round(w / dt)))
        path = sample_path(cfg.seed, 0, dt, n_win, cfg.mode_count)
        _, stats = picard_solve(cache, cfg, y0, path, 0, n_win)
        usable = [r for r, dist in zip(stats.ratios, stats.distances[1:]) if dist > 1e-13]
        if not usable:
            raise DomainError("window converged too fast to measure a contraction ratio")
        ratios.append(float(np.exp(np.mean(np.log(usable)))))
    slope = richardson_order(ratios, windows)
    return slope, ratios


# ---------------------------------------------------------------------------
# probe suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    name: str
    value: float
    low: float
    high: float
    passed: bool
    detail: str = ""


def _bounded(name: str, value: float, low: float, high: float, detail: str = "") -> ProbeResult:
    return ProbeResult(name, float(value), low, high, bool(low <= value <= high), detail)


def probe_suite(seed: int = 0, include_contraction: bool = False, cfg=None) -> list[ProbeResult]:
    """The mechanical inequality checks, sized for seconds not minutes."""
    results: list[ProbeResult] = []
    g32 = build_grid(2, (32, 32), (1.0, 1.0))

    # bilinear-form cancellations on a batch of random smooth fields
    worst_b1 = 0.0
    worst_b2 = 0.0
    for k in range(100):
        u = leray_project(g32, random_smooth_vector(g32, seed + 3 * k, 2))
        w = random_smooth_vector(g32, seed + 3 * k + 1, 2)
        d = random_smooth_vector(g32, seed + 3 * k + 2, 3, bc_kind="neumann")
        scale_1 = (
            l2_norm(g32, u) * grad_seminorm(g32, w, "dirichlet") * l2_norm(g32, w) + 1e-300
        )
        pairing = abs(float(np.sum(b1(g32, u, w) * w) * g32.cell_volume))
        worst_b1 = max(worst_b1, pairing / scale_1)
        scale_2 = (
            l2_norm(g32, u) * grad_seminorm(g32, d, "neumann") * l2_norm(g32, d) + 1e-300
        )
        pairing = abs(float(np.sum(b2(g32, u, d) * d) * g32.cell_volume))
        worst_b2 = max(worst_b2, pairing / scale_2)
    results.append(_bounded("b1_skew_symmetry", worst_b1, 0.0, 1e-11))
    results.append(_bounded("b2_skew_symmetry", worst_b2, 0.0, 1e-11))

    # projection identities
    worst_idem = 0.0
    worst_grad = 0.0
    for k in range(20):
        F = random_smooth_vector(g32, seed + 1000 + k, 2)
        once = leray_project(g32, F)
        twice = leray_project(g32, once)
        scale = l2_norm(g32, F) + 1e-300
        worst_idem = max(worst_idem, l2_norm(g32, twice - once) / scale)
        p = random_smooth_scalar(g32, seed + 2000 + k, bc_kind="neumann")
        gp = centered_gradient(g32, p, "neumann")
        worst_grad = max(worst_grad, l2_norm(g32, leray_project(g32, gp)) / (l2_norm(g32, gp) + 1e-300))
    results.append(_bounded("leray_idempotence", worst_idem, 0.0, 1e-10))
    results.append(_bounded("leray_gradient_annihilation", worst_grad, 0.0, 1e-10))

    # duality gap Richardson order across 16/32/64.  A single field pair sits
    # too close to the pre-asymptotic regime at 16^2 for a clean slope, so the
    # gap is averaged over a small seed batch before fitting.
    gaps = []
    spacings = []
    for cells in (16, 32, 64):
        g = build_grid(2, (cells, cells), (1.0, 1.0))
        gaps.append(float(np.mean([duality_gap(g, seed + k) for k in range(8)])))
        spacings.append(g.spacings[0])
    results.append(
        _bounded("duality_order", richardson_order(gaps, spacings), 1.7, 2.3,
                 detail=f"gaps={gaps}")
    )

    # interpolation-constant stability across refinement
    for label, fn in (("gn_l4", gn_l4_ratio), ("gn_linf", gn_linf_ratio)):
        per_grid = []
        for cells in (16, 64):
            g = build_grid(2, (cells, cells), (1.0, 1.0))
            batch = [
                fn(g, random_smooth_scalar(g, seed + 31 * k)) for k in range(20)
            ]
            per_grid.append(max(batch))
        results.append(
            _bounded(f"{label}_refinement_stability", max(per_grid) / min(per_grid), 1.0, 2.0,
                     detail=f"maxima={per_grid}")
        )

    per_grid = []
    for cells in (16, 64):
        g = build_grid(2, (cells, cells), (1.0, 1.0))
        batch = [
            remark_ratio(g, random_smooth_vector(g, seed + 77 * k, 3, bc_kind="neumann"))
            for k in range(20)
        ]
        per_grid.append(max(batch))
    results.append(
        _bounded("remark_bound_stability", max(per_grid) / min(per_grid), 1.0, 2.0,
                 detail=f"maxima={per_grid}")
    )

    # Lipschitz constant estimate across an amplitude sweep
    estimates = []
    for amp in (0.5, 1.0, 2.0):
        worst = 0.0
        for k in range(100):
            y1 = random_probe_state(g32, seed + 5 * k, amplitude=amp)
            y2 = random_probe_state(g32, seed + 5 * k + 50000, amplitude=amp)
            worst = max(worst, lipschitz_probe_F(y1, y2))
        estimates.append(worst)
    results.append(
        _bounded("lipschitz_amplitude_stability", max(estimates) / min(estimates), 1.0, 3.0,
                 detail=f"estimates={estimates}")
    )

    if include_contraction:
        if cfg is None:
            raise ConfigError("contraction probe needs a config")
        windows = (0.015625, 0.03125, 0.0625)
        slope, ratios = contraction_slopes(cfg, windows)
        results.append(
            _bounded("contraction_slope", slope, 0.15, 0.35, detail=f"ratios={ratios}")
        )
    return results
