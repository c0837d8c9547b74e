"""DC circuit: N series resistors and a diode fed by a fixed-power source.

Unknowns [i, v_d, v, v_1 .. v_N]; only the first three affect the Jacobian
(the diode current law is exponential in v_d and the source power law is
bilinear in v and i), so the resistor voltages are pure z-variables and can
start from zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParamsError
from ..linops import Vec
from ..model import HessianTriplets, SystemModel
from . import ProblemCase

# w0 columns #1..#5 of the benchmark table; z0 is always zero.
PRESETS_W = {
    "#1": [0.99999, 0.699993, 10.699893],
    "#2": [0.99, 0.693, 10.593],
    "#3": [0.9, 0.63, 9.63],
    "#4": [0.8, 0.56, 8.56],
    "#5": [0.25, 0.693, 2.675],
}


@dataclass
class DcCircuitParams:
    i_s: float = 6.9144e-13
    v_t: float = 25e-3
    P: float = 10.7
    R: float = 1.0
    N: int = 10

    def __post_init__(self) -> None:
        if self.N < 1:
            raise InvalidParamsError("N must be >= 1")
        for name in ("i_s", "v_t", "P", "R"):
            if getattr(self, name) <= 0:
                raise InvalidParamsError(f"{name} must be positive")


def dc_circuit(params: DcCircuitParams | None = None) -> ProblemCase:
    p = params or DcCircuitParams()
    n = p.N
    m = n + 3

    # Diode law in Shockley form i = i_s (exp(v_d/v_t) - 1); the exponential
    # is allowed to overflow to inf, which the evaluation layer reports as a
    # non-finite residual.
    def residual(x: Vec) -> Vec:
        i, vd, v = x[0], x[1], x[2]
        vj = x[3:]
        with np.errstate(over="ignore"):
            e = np.exp(vd / p.v_t)
        r = np.empty(m)
        r[0] = i - p.i_s * (e - 1.0)
        r[1] = v * i - p.P
        r[2] = v - vj.sum() - vd
        r[3:] = vj - p.R * i
        return r

    def jacobian(x: Vec) -> np.ndarray:
        vd = x[1]
        with np.errstate(over="ignore"):
            e = np.exp(vd / p.v_t)
        jac = np.zeros((m, m))
        jac[0, 0] = 1.0
        jac[0, 1] = -p.i_s * e / p.v_t
        jac[1, 0] = x[2]
        jac[1, 2] = x[0]
        jac[2, 1] = -1.0
        jac[2, 2] = 1.0
        jac[2, 3:] = -1.0
        jac[np.arange(3, m), 0] = -p.R
        jac[np.arange(3, m), np.arange(3, m)] = 1.0
        return jac

    def hessian(i_eq: int, x: Vec) -> HessianTriplets:
        if i_eq == 0:
            with np.errstate(over="ignore"):
                e = np.exp(x[1] / p.v_t)
            return [(1, 1, -p.i_s * e / p.v_t**2)]
        if i_eq == 1:
            return [(0, 2, 1.0), (2, 0, 1.0)]
        return []

    model = SystemModel(
        m=m,
        residual=residual,
        jacobian=jacobian,
        hessian=hessian,
        w_indices=np.array([0, 1, 2]),
        z_indices=np.arange(3, m),
        nonlinear_eqs=np.array([0, 1]),
        var_names=["i", "v_d", "v"] + [f"v_{j}" for j in range(1, n + 1)],
        eq_names=["diode_law", "source_power", "voltage_loop"] + [f"resistor_{j}" for j in range(1, n + 1)],
    )
    presets = {name: np.array(w0 + [0.0] * n) for name, w0 in PRESETS_W.items()}
    exact = np.array([1.0, 0.7, 10.7] + [1.0] * n)
    return ProblemCase(
        name="dc",
        model=model,
        presets=presets,
        default_preset="#1",
        _exact=exact,
    )
