"""1D boundary-layer model: frozen oracle values, identities, invariants.

Expected values were computed by tools/oracle1d.py (dense-grid damped
Newton with Simpson phase quadrature, cross-checked against
scipy.integrate.solve_bvp and a spectral projected-gradient minimization)
before the library was written, and frozen here.
"""

import numpy as np
import pytest
from scipy.integrate import simpson

import cornergl as cg
from cornergl.effective1d import (Grid1D, _el_residual, find_threshold_b,
                                  phase_integral)
from cornergl.errors import DegenerateMinimizer, InvalidParams

ELL = 10.0
N = 2048

# oracle values, n = 2048, ell = 10 (same scheme, independent code path)
ORACLE_2048 = {
    1.1: dict(alpha0=-0.844710701898, e1d=-1.003384613636e-01,
              f00=0.655911776760, ecorr=5.8649780838e-02),
    1.3: dict(alpha0=-0.810123133804, e1d=-3.663583615001e-02,
              f00=0.541868300423, ecorr=6.8194213276e-02),
    1.5: dict(alpha0=-0.785772678298, e1d=-7.607767012055e-03,
              f00=0.384296603815, ecorr=4.3249984440e-02),
    1.65: dict(alpha0=-0.771805945906, e1d=-3.603192867321e-04,
               f00=0.185044372456, ecorr=1.1135710025e-02),
}
# oracle values, n = 16384 (dense grid)
ORACLE_DENSE_15 = dict(alpha0=-0.785773871863, e1d=-7.607204828909e-03)
# fixed alpha = -0.5, b = 1.5 energies
E_HALF_DENSE = -1.096204379803e-03
E_HALF_2048 = -1.096381180951e-03

B_GRID = sorted(ORACLE_2048)


@pytest.fixture(scope="module")
def solutions():
    grid = Grid1D(ELL, N)
    return {b: cg.minimize_1d(ELL, b, grid) for b in B_GRID}


def test_grid_invariants():
    g = Grid1D(7.5, 128)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 7.5
    assert np.allclose(np.diff(g.nodes), g.h)
    with pytest.raises(InvalidParams):
        Grid1D(7.5, 32)
    with pytest.raises(InvalidParams):
        Grid1D(-1.0, 128)


def test_zero_profile_outside_regime():
    # b = 0.5 is outside the supported window; the zero branch is returned
    with pytest.warns(UserWarning):
        p = cg.solve_profile(0.0, ELL, 0.5, Grid1D(ELL, N))
    assert np.all(p.values == 0.0)
    assert cg.energy_1d(p, 0.0, 0.5) == 0.0


def test_energy_zero_profile():
    g = Grid1D(ELL, N)
    p = cg.Profile1D(g, np.zeros(N))
    assert cg.energy_1d(p, 0.3, 1.5) == 0.0


def test_energy_constant_profile_closed_form():
    # f == 1, alpha = 0, b = 1, ell = 1: int_0^1 (t^2 - 1/2) dt = -1/6
    g = Grid1D(1.0, N)
    p = cg.Profile1D(g, np.ones(N))
    assert abs(cg.energy_1d(p, 0.0, 1.0) - (-1.0 / 6.0)) < 1e-7


@pytest.mark.parametrize("b", B_GRID)
def test_minimizer_matches_oracle(solutions, b):
    sol = solutions[b]
    ref = ORACLE_2048[b]
    assert not sol.degenerate
    assert sol.alpha0 == pytest.approx(ref["alpha0"], abs=1e-9)
    assert sol.e1d == pytest.approx(ref["e1d"], rel=1e-9)
    assert sol.f0_at_0 == pytest.approx(ref["f00"], abs=1e-9)
    assert sol.ecorr_algebraic == pytest.approx(ref["ecorr"], rel=1e-7)
    assert sol.e1d < 0


def test_dense_grid_consistency(solutions):
    # O(h^2) energy bias vs the n = 16384 oracle: ~7.4e-5 relative; the
    # spec's 1e-6 figure is below the attainable floor for a second-order
    # scheme at n = 2048 (see the decisions ledger)
    sol = solutions[1.5]
    assert sol.alpha0 == pytest.approx(ORACLE_DENSE_15["alpha0"], abs=1e-5)
    assert sol.e1d == pytest.approx(ORACLE_DENSE_15["e1d"], rel=2e-4)


def test_fixed_alpha_profile_energy():
    # nontrivial branch at a non-optimal phase
    grid = Grid1D(ELL, N)
    p = cg.solve_profile(-0.5, ELL, 1.5, grid)
    e = cg.energy_1d(p, -0.5, 1.5)
    assert e == pytest.approx(E_HALF_2048, rel=1e-9)
    assert e == pytest.approx(E_HALF_DENSE, rel=3e-4)
    assert np.all(p.values >= 0.0) and np.all(p.values <= 1.0)


@pytest.mark.parametrize("b", B_GRID)
def test_alpha_optimality(solutions, b):
    sol = solutions[b]
    assert abs(phase_integral(sol.f0, sol.alpha0)) <= 1e-8


@pytest.mark.parametrize("b", B_GRID)
def test_neumann_residuals(solutions, b):
    d0, dl, *_ = cg.neumann_residuals(solutions[b].f0)
    assert abs(d0) <= 1e-6
    assert abs(dl) <= 1e-6


@pytest.mark.parametrize("b", B_GRID)
def test_energy_quartic_identity(solutions, b):
    # E1D = -(1/2b) int f0^4, exact for the discrete minimizer
    sol = solutions[b]
    quart = np.trapezoid(sol.f0.values**4, sol.grid.nodes)
    assert abs(sol.e1d + quart / (2 * b)) <= 1e-6 * abs(sol.e1d)


@pytest.mark.parametrize("b", B_GRID)
def test_maximum_location(solutions, b):
    sol = solutions[b]
    assert 0.0 < sol.t_max <= abs(sol.alpha0) + 1.0 / np.sqrt(b)


@pytest.mark.parametrize("b", B_GRID)
def test_el_equation_residual(solutions, b):
    sol = solutions[b]
    r = _el_residual(sol.f0.values, sol.grid.nodes, sol.alpha0, b, sol.grid.h)
    assert np.max(np.abs(r)) < 1e-9


def test_degenerate_above_regime():
    sol = cg.minimize_1d(ELL, 1.72, Grid1D(ELL, N))
    assert sol.degenerate
    assert abs(sol.e1d) < 1e-6
    with pytest.raises(DegenerateMinimizer):
        cg.compute_ecorr(sol)


def test_ell_insensitivity():
    # matched spacing so the O(h^2) bias cancels in the difference
    e10 = cg.minimize_1d(10.0, 1.5, Grid1D(10.0, 2048)).e1d
    e14 = cg.minimize_1d(14.0, 1.5, Grid1D(14.0, 2867)).e1d
    assert abs(e10 - e14) < 1e-8


@pytest.mark.parametrize("b", B_GRID)
def test_gaussian_decay_envelope(solutions, b):
    # f0 <= C exp(-(t+alpha0)^2/2) beyond t0 + 2, C fitted on [t0, t0+1].
    # The true decay carries a slowly growing prefactor ~ (t+a)^(1/2b)
    # (strongest at small b, ratio up to 1.29 at b = 1.1), so the check
    # allows the documented subexponential headroom factor 1.5.
    sol = solutions[b]
    t, f = sol.grid.nodes, sol.f0.values
    gauss = np.exp(-0.5 * (t + sol.alpha0) ** 2)
    win = (t >= sol.t_max) & (t <= sol.t_max + 1.0)
    C = np.max(f[win] / gauss[win])
    tail = t >= sol.t_max + 2.0
    assert np.all(f[tail] <= 1.5 * C * gauss[tail])


@pytest.mark.parametrize("b", B_GRID)
def test_monotone_beyond_maximum(solutions, b):
    sol = solutions[b]
    i = int(np.argmax(sol.f0.values))
    assert np.all(np.diff(sol.f0.values[i:]) <= 1e-18)
    assert np.all(sol.f0.values >= 0.0)


@pytest.mark.parametrize("b", B_GRID)
def test_derivative_decay(solutions, b):
    # |f0'| <= C exp(-t^2/4) with C fitted on the head region t <= 5
    sol = solutions[b]
    t = sol.grid.nodes
    fp = sol.f0.derivative_nodal()
    env = np.exp(-t**2 / 4.0)
    head = t <= min(5.0, sol.ell / 2)
    C = np.max(np.abs(fp[head]) / env[head])
    assert np.all(np.abs(fp) <= C * env * (1 + 1e-9))


def test_grid_convergence_second_order():
    es = [cg.minimize_1d(ELL, 1.5, Grid1D(ELL, n)).e1d for n in (512, 1024, 2048)]
    r1 = abs(es[1] - es[0])
    r2 = abs(es[2] - es[1])
    order = np.log2(r1 / r2)
    assert 1.7 <= order <= 2.3


@pytest.mark.parametrize("b", B_GRID)
def test_ecorr_dual_forms(solutions, b):
    sol = solutions[b]
    assert sol.ecorr_discrepancy <= 1e-4
    assert sol.ecorr > 0.0
    assert sol.ecorr_algebraic > 0.0


def test_threshold_location():
    lo, hi = find_threshold_b()
    assert 1.67 <= lo <= hi <= 1.72


def test_halfline_approximation():
    # ell = 16 half-line values agree with ell = 10 to truncation error
    sol16 = cg.halfline_solution(1.5)
    sol10 = cg.minimize_1d(10.0, 1.5, Grid1D(10.0, int(round(205 * 10)) + 1))
    assert sol16.alpha0 == pytest.approx(sol10.alpha0, abs=1e-8)
    assert sol16.e1d == pytest.approx(sol10.e1d, rel=1e-6)


def test_oracle_equivalence_projected_gradient():
    """Nested root-find equals a joint SPG minimization over (f, alpha).

    Spectral projected gradient (BB step + projection onto 0 <= f <= 1 +
    nonmonotone Armijo) on the same discrete energy; n = 512 keeps the
    iteration count moderate.
    """
    n = 512
    grid = Grid1D(ELL, n)
    sol = cg.minimize_1d(ELL, 1.5, grid)
    t, h, b = grid.nodes, grid.h, 1.5

    def energy(x):
        return cg.energy_1d(cg.Profile1D(grid, x[:-1]), x[-1], b)

    def grad(x):
        f, a = x[:-1], x[-1]
        gf = 2.0 * h * _el_residual(f, t, a, b, h)
        gf[0] *= 0.5
        gf[-1] *= 0.5
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        ga = (2.0 * np.sum(w * (t + a) * f**2)
              + (2 * h**2 / 3.0) * (f[0] ** 2 - f[-1] ** 2))
        return np.concatenate([gf, [ga]])

    def proj(x):
        y = x.copy()
        y[:-1] = np.clip(y[:-1], 0.0, 1.0)
        return y

    x = proj(np.concatenate([np.clip(sol.f0.values * 0.9 + 0.01, 0, 1),
                             [sol.alpha0 - 0.03]]))
    g = grad(x)
    sigma = 1.0 / max(np.abs(g).max(), 1e-8)
    hist = [energy(x)]
    for _ in range(120000):
        dd = proj(x - sigma * g) - x
        gd = float(g @ dd)
        if np.linalg.norm(dd) < 1e-15:
            break
        lam = 1.0
        emax = max(hist[-10:])
        while True:
            xn = x + lam * dd
            en = energy(xn)
            if en <= emax + 1e-4 * lam * gd or lam < 1e-12:
                break
            lam *= 0.5
        gn = grad(xn)
        s, y = xn - x, gn - g
        sy = float(s @ y)
        sigma = min(max(float(s @ s) / sy, 1e-10), 1e10) if sy > 0 else 1.0
        x, g = xn, gn
        hist.append(en)
    e_spg = energy(x)
    assert abs(e_spg - sol.e1d) <= 1e-6 * abs(sol.e1d)


def test_solution_serialization(solutions):
    d = cg.effective1d.solution_to_dict(solutions[1.5])
    assert set(d) >= {"b", "ell", "n", "alpha0", "e1d", "ecorr", "f0"}
    assert len(d["f0"]) == N


def test_grid_mismatch_raises():
    with pytest.raises(InvalidParams):
        cg.solve_profile(-0.5, 8.0, 1.5, Grid1D(10.0, 256))
