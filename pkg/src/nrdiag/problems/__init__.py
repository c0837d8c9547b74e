"""Benchmark systems with analytic derivatives, presets and known solutions."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import InvalidParamsError, UnknownVariableError
from ..linops import Vec
from ..model import SystemModel


@dataclass
class ProblemCase:
    """A named benchmark instance: model + presets + known solution.

    ``presets`` maps preset names to guess vectors; entries may be callables
    for guesses that depend on the solved exact solution (materialized once).
    ``exact_solution`` may likewise be a vector or a provider.
    """

    name: str
    model: SystemModel
    presets: dict[str, Vec | Callable[["ProblemCase"], Vec]] = field(default_factory=dict)
    default_preset: str = ""
    _exact: Vec | None = None
    _exact_provider: Callable[["ProblemCase"], Vec] | None = None

    @property
    def exact_solution(self) -> Vec | None:
        if self._exact is None and self._exact_provider is not None:
            self._exact = np.asarray(self._exact_provider(self), dtype=float)
        return self._exact

    def preset_names(self) -> list[str]:
        return list(self.presets)

    def preset(self, name: str) -> Vec:
        if name not in self.presets:
            raise UnknownVariableError(
                f"case {self.name!r} has no preset {name!r}; available: {', '.join(self.presets)}")
        entry = self.presets[name]
        if callable(entry):
            entry = np.asarray(entry(self), dtype=float)
            self.presets[name] = entry
        return np.asarray(entry, dtype=float).copy()

    def var_index(self, name: str) -> int:
        try:
            return self.model.var_names.index(name)
        except ValueError:
            raise UnknownVariableError(f"unknown variable {name!r} in case {self.name!r}") from None

    def complex_components(self, base: str) -> list[int]:
        """Indices of the scalar components spelled ``base`` or ``base_re/_im``."""
        names = self.model.var_names
        if base in names:
            return [names.index(base)]
        pair = [f"{base}_re", f"{base}_im"]
        if all(n in names for n in pair):
            return [names.index(n) for n in pair]
        raise UnknownVariableError(f"unknown variable {base!r} in case {self.name!r}")


def perturb_preset(case: ProblemCase, overrides: dict[str, float] | None = None,
                   scale: dict[str, float] | None = None,
                   preset: str | None = None) -> Vec:
    """Build a guess from a preset with named entries replaced or rescaled.

    ``overrides`` sets absolute values on scalar variables.  ``scale``
    multiplies the exact-solution entry by a factor; a bare complex name
    scales both of its components together.
    """
    x = case.preset(preset or case.default_preset)
    for name, value in (overrides or {}).items():
        x[case.var_index(name)] = float(value)
    if scale:
        exact = case.exact_solution
        if exact is None:
            raise InvalidParamsError(f"case {case.name!r} has no exact solution to scale against")
        for name, factor in scale.items():
            for j in case.complex_components(name):
                x[j] = float(factor) * exact[j]
    return x


_CASE_CACHE: dict[tuple, ProblemCase] = {}


def get_case(name: str, **params) -> ProblemCase:
    """Construct (and cache) a benchmark case by short name: hex, dc or ac."""
    from .ac_grid import AcGridParams, ac_grid
    from .dc_circuit import DcCircuitParams, dc_circuit
    from .heat_exchanger import HeatExchangerParams, heat_exchanger

    if name == "hex":
        key = ("hex",)
        if key not in _CASE_CACHE:
            _CASE_CACHE[key] = heat_exchanger(HeatExchangerParams(**params))
        return _CASE_CACHE[key]
    if name == "dc":
        key = ("dc",)
        if key not in _CASE_CACHE:
            _CASE_CACHE[key] = dc_circuit(DcCircuitParams(**params))
        return _CASE_CACHE[key]
    if name == "ac":
        p = AcGridParams(**params)
        key = ("ac", p.n, p.x)
        if key not in _CASE_CACHE:
            _CASE_CACHE[key] = ac_grid(p)
        return _CASE_CACHE[key]
    raise InvalidParamsError(f"unknown case {name!r}; expected hex, dc or ac")


_SPEC_RE = re.compile(r"^(?P<case>hex|dc|ac)"
                      r"(?:\((?P<n>\d+)\s*,\s*(?P<x>[0-9.eE+-]+)\))?"
                      r"(?:#(?P<hash>[\w.]+)|-(?P<dash>[\w.]+))?$")


def resolve_case_spec(spec: str) -> tuple[ProblemCase, str]:
    """Parse a CLI case spec like ``hex#3``, ``dc#1``, ``ac-test4`` or ``ac(8,0.5)``."""
    m = _SPEC_RE.match(spec.strip())
    if not m:
        raise InvalidParamsError(f"cannot parse case spec {spec!r}")
    params = {}
    if m.group("n"):
        params = {"n": int(m.group("n")), "x": float(m.group("x"))}
    case = get_case(m.group("case"), **params)
    preset = m.group("hash")
    if preset is not None:
        preset = f"#{preset}"
    else:
        preset = m.group("dash")
    return case, preset or case.default_preset


def case_catalog() -> list[dict]:
    """Summary rows for the list command: dimensions and preset names."""
    rows = []
    for name in ("hex", "dc", "ac"):
        case = get_case(name)
        model = case.model
        rows.append({
            "name": name,
            "m": model.m,
            "q": model.q,
            "p": model.p,
            "presets": case.preset_names(),
            "parametric": "ac(N,X)" if name == "ac" else None,
        })
    return rows
