"""Cost function K0 and potential F0 built from a 1D solution.

    F0(t) = 2 int_0^t (eta + alpha0) f0^2(eta) deta
          = -2 int_t^ell (...)                       (phase optimality)
    K0(t) = (1 - d_ell) f0^2(t) + F0(t),   d_ell = ell^-4

K0 >= 0 on I_lbar = [0, lbar], lbar = sup{t : f0(t) >= ell^3 f0(ell)},
drives the lower-bound argument; |F0| <= f0^2 on I_lbar is a by-product.

Both cumulative representations are computed with composite Simpson: in
the Gaussian tail the trapezoid bias (~ h^2 (2t)^2 / 12 relative) is
larger than the 1 - |F0|/f0^2 margin, so trapezoid falsifies the F0 bound
at the largest ell of the test grid.  The forward representation is exact
at 0 but carries absolute rounding noise ~1e-16 in the tail, so tail-
sensitive ratios (the F0 bound, the complement constant) are evaluated on
the backward representation, which is relatively accurate there.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .effective1d import Effective1DSolution
from .errors import DegenerateMinimizer

D_ELL_COEFF = 1.0          # d_ell = D_ELL_COEFF * ell^-4
POSITIVITY_SLACK = -1e-10  # quadrature slack for min K0 on I_lbar


@dataclass
class CostFunctionData:
    sol: Effective1DSolution
    F0: np.ndarray                 # forward representation, F0(0) = 0
    F0_backward: np.ndarray        # tail-accurate representation
    K0: np.ndarray
    d_ell: float
    ell_bar: float

    @property
    def grid(self):
        return self.sol.grid

    def inner_mask(self):
        return self.grid.nodes <= self.ell_bar


@dataclass
class PositivityReport:
    min_K0: float
    argmin_t: float
    ell_bar: float
    passed: bool
    threshold: float = POSITIVITY_SLACK


@dataclass
class BoundReport:
    max_ratio_inner: float      # max |F0|/f0^2 on I_lbar
    argmax_t_inner: float
    C_complement: float         # smallest C with |F0| <= C ell f0^2 outside
    passed_inner: bool
    details: dict = field(default_factory=dict)


def build_cost_function(sol: Effective1DSolution, d_ell=None) -> CostFunctionData:
    """Sample F0 (both representations), K0, and locate ell_bar."""
    if sol.degenerate or sol.f0.values.max() <= 0:
        raise DegenerateMinimizer("cost function undefined on the zero profile")
    t = sol.grid.nodes
    fv = sol.f0.values
    ell = sol.ell
    g = (t + sol.alpha0) * fv**2
    F0 = 2.0 * cumulative_simpson(g, x=t, initial=0.0)
    F0b = -2.0 * cumulative_simpson(g[::-1], x=-t[::-1], initial=0.0)[::-1]
    if d_ell is None:
        d_ell = D_ELL_COEFF * ell**-4
    K0 = (1.0 - d_ell) * fv**2 + F0
    # scan from the right for the last node still above the tail threshold
    thresh = ell**3 * fv[-1]
    above = np.nonzero(fv >= thresh)[0]
    ell_bar = float(t[above[-1]]) if above.size else float(t[0])
    return CostFunctionData(sol=sol, F0=F0, F0_backward=F0b, K0=K0,
                            d_ell=d_ell, ell_bar=ell_bar)


def verify_positivity(data: CostFunctionData) -> PositivityReport:
    """Pointwise min of K0 over the nodes of I_lbar."""
    t = data.grid.nodes
    inner = data.inner_mask()
    k = data.K0[inner]
    i = int(np.argmin(k))
    return PositivityReport(
        min_K0=float(k[i]),
        argmin_t=float(t[inner][i]),
        ell_bar=data.ell_bar,
        passed=bool(k[i] >= POSITIVITY_SLACK),
    )


def verify_F0_bound(data: CostFunctionData) -> BoundReport:
    """Check |F0| <= f0^2 on I_lbar; smallest C with |F0| <= C ell f0^2 outside.

    Evaluated on the backward representation (see module docstring).
    """
    t = data.grid.nodes
    fv = data.sol.f0.values
    ell = data.sol.ell
    inner = data.inner_mask()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(data.F0_backward) / fv**2
    ri = ratio[inner]
    i = int(np.nanargmax(ri))
    comp = ~inner
    if comp.any():
        C = float(np.nanmax(np.abs(data.F0_backward[comp]) / (ell * fv[comp] ** 2)))
    else:
        C = 0.0
    return BoundReport(
        max_ratio_inner=float(ri[i]),
        argmax_t_inner=float(t[inner][i]),
        C_complement=C,
        passed_inner=bool(ri[i] <= 1.0),
        details={"d_ell": data.d_ell, "ell_bar": data.ell_bar},
    )


def cost_report_dict(data: CostFunctionData) -> dict:
    """JSON-ready report {min_K0, argmin, ell_bar, C_complement, d_ell}."""
    pos = verify_positivity(data)
    bound = verify_F0_bound(data)
    return {
        "min_K0": pos.min_K0,
        "argmin": pos.argmin_t,
        "ell_bar": data.ell_bar,
        "C_complement": bound.C_complement,
        "max_F0_ratio_inner": bound.max_ratio_inner,
        "d_ell": data.d_ell,
        "positivity_passed": pos.passed,
        "bound_passed": bound.passed_inner,
    }
