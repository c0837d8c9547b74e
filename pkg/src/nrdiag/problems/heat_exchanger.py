"""Heat exchanger between a pressure source and a discharge valve.

Six equations in six unknowns [f, k_v, T_o, gamma, p_o, p_i]: two square-root
pressure-loss laws, a quadratic friction loss, two heat balances and a
power-law heat-transfer correlation.  Every variable affects the Jacobian,
so w covers all six unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParamsError, NonEvaluableError
from ..linops import Vec
from ..model import HessianTriplets, SystemModel
from . import ProblemCase

VAR_NAMES = ["f", "k_v", "T_o", "gamma", "p_o", "p_i"]
EQ_NAMES = ["valve_in", "hx_friction", "valve_out", "heat_balance", "heat_transfer", "transfer_law"]

# Initial-guess columns #1..#6 of the benchmark table.
PRESETS = {
    "#1": [0.99999, 0.99999, 3.99996, 0.99999, 1.99998, 2.19998],
    "#2": [0.999, 0.999, 3.996, 0.999, 1.998, 2.198],
    "#3": [0.99, 0.99, 3.96, 0.99, 1.98, 2.178],
    "#4": [0.9, 0.9, 3.6, 0.9, 1.8, 1.98],
    "#5": [0.9, 0.9, 3.6, 0.9, 1.8, 2.151],
    "#6": [3.00, 0.999, 3.996, 0.999, 1.998, 2.198],
}


@dataclass
class HeatExchangerParams:
    p_s: float = 2.201
    p_d: float = 1.0
    k_p: float = float(np.sqrt(1000.0))
    k_h: float = 0.2
    c: float = 1.0
    f_0: float = 1.0
    gamma_0: float = 1.0
    nu: float = 0.8
    T_s: float = 0.0
    T_a: float = 6.0
    Q: float = 4.0
    A: float = 1.0

    def __post_init__(self) -> None:
        if self.p_s <= self.p_d:
            raise InvalidParamsError("p_s must exceed p_d")
        for name in ("k_p", "k_h", "c", "A", "f_0", "gamma_0", "Q"):
            if getattr(self, name) <= 0:
                raise InvalidParamsError(f"{name} must be positive")


def heat_exchanger(params: HeatExchangerParams | None = None) -> ProblemCase:
    p = params or HeatExchangerParams()
    # One scale per residual, sized like the dominant term of each equation
    # (flow, friction pressure drop, flow, heat duty, heat duty, transfer
    # coefficient) so the residuals are comparable dimensionless numbers.
    scales = np.array([p.f_0, p.k_h * p.f_0**2, p.f_0, p.Q, p.Q, p.gamma_0])

    def residual(x: Vec) -> Vec:
        f, kv, to, g, po, pi = x
        if p.p_s - pi < 0.0:
            raise NonEvaluableError(reason="domain-violation", equation=0, variable=5,
                                    message="negative sqrt argument p_s - p_i")
        if po - p.p_d < 0.0:
            raise NonEvaluableError(reason="domain-violation", equation=2, variable=4,
                                    message="negative sqrt argument p_o - p_d")
        if f < 0.0:
            raise NonEvaluableError(reason="domain-violation", equation=5, variable=0,
                                    message="negative flow in power law")
        return np.array([
            f - p.k_p * np.sqrt(p.p_s - pi),
            pi - po - p.k_h * f * f,
            f - kv * np.sqrt(po - p.p_d),
            p.Q - f * p.c * (to - p.T_s),
            p.Q - g * p.A * (p.T_a - (p.T_s + to) / 2.0),
            g - p.gamma_0 * (f / p.f_0) ** p.nu,
        ]) / scales

    def jacobian(x: Vec) -> np.ndarray:
        f, kv, to, g, po, pi = x
        s1 = np.sqrt(p.p_s - pi)
        s3 = np.sqrt(po - p.p_d)
        jac = np.zeros((6, 6))
        jac[0, 0] = 1.0
        jac[0, 5] = p.k_p / (2.0 * s1)
        jac[1, 0] = -2.0 * p.k_h * f
        jac[1, 4] = -1.0
        jac[1, 5] = 1.0
        jac[2, 0] = 1.0
        jac[2, 1] = -s3
        jac[2, 4] = -kv / (2.0 * s3)
        jac[3, 0] = -p.c * (to - p.T_s)
        jac[3, 2] = -f * p.c
        jac[4, 2] = g * p.A / 2.0
        jac[4, 3] = -p.A * (p.T_a - (p.T_s + to) / 2.0)
        jac[5, 0] = -p.gamma_0 * p.nu * (f / p.f_0) ** (p.nu - 1.0) / p.f_0
        jac[5, 3] = 1.0
        return jac / scales[:, None]

    def hessian(i: int, x: Vec) -> HessianTriplets:
        f, kv, to, g, po, pi = x
        if i == 0:
            v = p.k_p / (4.0 * (p.p_s - pi) ** 1.5)
            return [(5, 5, v / scales[0])]
        if i == 1:
            return [(0, 0, -2.0 * p.k_h / scales[1])]
        if i == 2:
            s3 = np.sqrt(po - p.p_d)
            mixed = -1.0 / (2.0 * s3) / scales[2]
            diag = kv / (4.0 * s3**3) / scales[2]
            return [(1, 4, mixed), (4, 1, mixed), (4, 4, diag)]
        if i == 3:
            v = -p.c / scales[3]
            return [(0, 2, v), (2, 0, v)]
        if i == 4:
            v = p.A / 2.0 / scales[4]
            return [(2, 3, v), (3, 2, v)]
        if i == 5:
            v = -p.gamma_0 * p.nu * (p.nu - 1.0) * (f / p.f_0) ** (p.nu - 2.0) / p.f_0**2
            return [(0, 0, v / scales[5])]
        return []

    model = SystemModel(
        m=6,
        residual=residual,
        jacobian=jacobian,
        hessian=hessian,
        w_indices=np.arange(6),
        z_indices=np.empty(0, dtype=int),
        nonlinear_eqs=np.arange(6),
        var_names=list(VAR_NAMES),
        eq_names=list(EQ_NAMES),
        residual_scales=scales,
    )
    exact = np.array([1.0, 1.0, 4.0, 1.0, 2.0, 2.2])
    return ProblemCase(
        name="hex",
        model=model,
        presets={k: np.array(v) for k, v in PRESETS.items()},
        default_preset="#1",
        _exact=exact,
    )
