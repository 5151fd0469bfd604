"""Device models A (one qubit), B (two weakly coupled qubits, local jumps) and
C (two strongly coupled qubits, global jumps), plus their closed-form currents.

Single-qubit basis is ``{|1>, |0>}``; two-qubit basis is
``{|11>, |10>, |01>, |00>}`` with the left qubit first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import thermal
from .errors import EquilibriumUndefined, InvalidParameter, NoAnalyticForm, NonPositiveEnergy
from .linalg import dag, is_hermitian
from .thermal import CouplingConfig, ThermalScenario

KINDS = ("A", "B", "C")
MAX_DETUNING = 0.2  # in units of epsilon
STRONG_COUPLING_RATIO = 10.0

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
_I2 = np.eye(2, dtype=complex)
SM_LEFT = np.kron(SIGMA_MINUS, _I2)
SM_RIGHT = np.kron(_I2, SIGMA_MINUS)


def number(op: np.ndarray) -> np.ndarray:
    return dag(op) @ op


_FLIP_FLOP = dag(SM_LEFT) @ SM_RIGHT + SM_LEFT @ dag(SM_RIGHT)


@dataclass(frozen=True)
class DeviceSpec:
    """Device parameters; ``delta`` is used by B only and ``g`` by B and C."""

    kind: str
    epsilon: float = 1.0
    delta: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        validate_device(self.kind, self.epsilon, self.delta, self.g)

    @classmethod
    def a(cls, epsilon: float = 1.0) -> "DeviceSpec":
        return cls("A", epsilon)

    @classmethod
    def b(cls, epsilon: float = 1.0, delta: float = 0.0, g: float = 0.0) -> "DeviceSpec":
        return cls("B", epsilon, delta, g)

    @classmethod
    def c(cls, epsilon: float = 1.0, g: float = 0.5) -> "DeviceSpec":
        return cls("C", epsilon, 0.0, g)


def validate_device(kind, epsilon, delta=0.0, g=0.0) -> None:
    """Raise if any (possibly array-valued) parameter leaves the device's domain."""
    if kind not in KINDS:
        raise InvalidParameter(f"unknown device {kind!r}; expected one of {KINDS}")
    eps = np.asarray(epsilon, dtype=float)
    delta = np.asarray(delta, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(~(eps > 0)):
        raise InvalidParameter("epsilon must be positive")
    if kind == "A" and (np.any(delta != 0) or np.any(g != 0)):
        raise InvalidParameter("device A has no detuning or inter-qubit coupling")
    if kind == "B":
        if np.any(delta < 0) or np.any(delta > MAX_DETUNING * eps):
            raise InvalidParameter(f"device B needs 0 <= delta <= {MAX_DETUNING} epsilon")
        if np.any(~(g >= 0)):
            raise InvalidParameter("device B needs g >= 0")
    if kind == "C":
        if np.any(delta != 0):
            raise InvalidParameter("device C qubits are degenerate (delta = 0)")
        if np.any(g >= eps):
            raise NonPositiveEnergy("device C needs g < epsilon so that epsilon - g > 0")
        if np.any(~(g > 0)):
            raise InvalidParameter("device C needs g > 0")


@dataclass(frozen=True)
class JumpChannel:
    operator: np.ndarray  # lowers the energy by ``energy``
    energy: float
    side: str


@dataclass(frozen=True)
class LindbladModel:
    hamiltonian: np.ndarray
    channels: tuple[JumpChannel, ...]
    epsilon: float = 1.0
    spec: DeviceSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        if not is_hermitian(self.hamiltonian):
            raise InvalidParameter("Hamiltonian is not Hermitian")
        for ch in self.channels:
            if ch.operator.shape != self.hamiltonian.shape:
                raise InvalidParameter("channel operator dimension does not match H")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def eigen_jump_operators(op: np.ndarray, basis: np.ndarray, energies, tol: float = 1e-9) -> dict:
    """Group the lowering transitions of ``op`` by Bohr frequency.

    Returns ``{omega: A(omega)}`` for every positive ``omega`` with
    ``A(omega) = sum_{E' - E = omega} |E><E| op |E'><E'|``; ``basis`` holds the
    eigenvectors as columns.
    """
    energies = np.asarray(energies, dtype=float)
    proj = [np.outer(basis[:, i], basis[:, i].conj()) for i in range(len(energies))]
    out: dict[float, np.ndarray] = {}
    for i, ei in enumerate(energies):
        for j, ej in enumerate(energies):
            w = ej - ei
            if w <= tol:
                continue
            term = proj[i] @ op @ proj[j]
            if np.max(np.abs(term)) < tol:
                continue
            key = next((k for k in out if abs(k - w) <= tol), w)
            out[key] = out.get(key, 0) + term
    return out


# eigenbasis of device C: |11>, |e+>, |e->, |00> (independent of g > 0)
_C_BASIS = np.array(
    [
        [1, 0, 0, 0],
        [0, 1 / np.sqrt(2), 1 / np.sqrt(2), 0],
        [0, 1 / np.sqrt(2), -1 / np.sqrt(2), 0],
        [0, 0, 0, 1],
    ],
    dtype=complex,
)


def _c_operators() -> dict:
    # representative g = eps/2 fixes the grouping: frequency 0.5 <-> eps - g
    energies = [2.0, 1.5, 0.5, 0.0]
    ops = {}
    for side, sm in (("L", SM_LEFT), ("R", SM_RIGHT)):
        groups = eigen_jump_operators(sm, _C_BASIS, energies)
        ops[side, "-"] = groups[0.5]
        ops[side, "+"] = groups[1.5]
    return ops


_C_OPS = _c_operators()

EnergyFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def channel_layout(kind: str) -> list[tuple[np.ndarray, str, EnergyFn]]:
    """Lowering operators, reservoir sides and transition-energy functions
    ``(epsilon, delta, g) -> E`` of a device."""
    if kind == "A":
        return [
            (SIGMA_MINUS, "L", lambda e, d, g: e),
            (SIGMA_MINUS, "R", lambda e, d, g: e),
        ]
    if kind == "B":
        return [
            (SM_LEFT, "L", lambda e, d, g: e),
            (SM_RIGHT, "R", lambda e, d, g: e + d),
        ]
    if kind == "C":
        return [
            (_C_OPS["L", "-"], "L", lambda e, d, g: e - g),
            (_C_OPS["L", "+"], "L", lambda e, d, g: e + g),
            (_C_OPS["R", "-"], "R", lambda e, d, g: e - g),
            (_C_OPS["R", "+"], "R", lambda e, d, g: e + g),
        ]
    raise InvalidParameter(f"unknown device {kind!r}")


def hamiltonian(kind: str, epsilon, delta=0.0, g=0.0) -> np.ndarray:
    """Hamiltonian(s); array parameters give a stack of shape (N, d, d)."""
    e = np.asarray(epsilon, dtype=float)[..., None, None]
    d = np.asarray(delta, dtype=float)[..., None, None]
    gg = np.asarray(g, dtype=float)[..., None, None]
    if kind == "A":
        return e * number(SIGMA_MINUS)
    n_l, n_r = number(SM_LEFT), number(SM_RIGHT)
    if kind == "B":
        return e * (n_l + n_r) + d * n_r + gg * _FLIP_FLOP
    if kind == "C":
        return e * (n_l + n_r) + gg * _FLIP_FLOP
    raise InvalidParameter(f"unknown device {kind!r}")


def build_model(spec: DeviceSpec, coupling: CouplingConfig, scenario: ThermalScenario):
    """Lindblad model of ``spec`` and the ``(rate, operator)`` pairs of its
    dissipator.

    Absorption at rate ``gamma_plus(E)`` drives ``D[A^+]`` and emission at
    ``gamma_minus(E)`` drives ``D[A]``, which makes the model relax to the
    Gibbs state when both reservoirs share one temperature.
    """
    channels = []
    for op, side, efn in channel_layout(spec.kind):
        energy = float(efn(spec.epsilon, spec.delta, spec.g))
        if not energy > 0:
            raise NonPositiveEnergy(f"channel energy {energy} is not positive")
        channels.append(JumpChannel(op, energy, side))
    h = hamiltonian(spec.kind, spec.epsilon, spec.delta, spec.g)
    model = LindbladModel(h, tuple(channels), spec.epsilon, spec)
    return model, rate_pairs(model, coupling, scenario)


def rate_pairs(model: LindbladModel, coupling: CouplingConfig, scenario: ThermalScenario, side: str | None = None):
    pairs = []
    for ch in model.channels:
        if side is not None and ch.side != side:
            continue
        up, down = thermal.rates(ch.energy, scenario.temperature(ch.side), coupling.side(ch.side))
        pairs.append((up, dag(ch.operator)))
        pairs.append((down, ch.operator))
    return pairs


def bias_functions(energy, scenario: ThermalScenario):
    """``(n_h - n_c, n_h + n_c)`` at ``energy``."""
    nh = thermal.bose_einstein(energy, scenario.T_h)
    nc = thermal.bose_einstein(energy, scenario.T_c)
    return nh - nc, nh + nc


def analytic_arrays(kind, epsilon, delta, g, chi, gamma, T_h, T_c):
    """Vectorized closed forms: ``(j_hc, j_ch, R)`` with currents in units of
    gamma*epsilon. ``R`` is NaN where there is no bias at any channel energy."""
    eps = np.asarray(epsilon, dtype=float)
    chi = np.asarray(chi, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if kind == "B" and np.any(np.asarray(delta) != 0):
        raise NoAnalyticForm("detuned device B has no closed form; use the numeric engine")

    def terms(energy):
        nh = thermal.bose_einstein(energy, T_h)
        nc = thermal.bose_einstein(energy, T_c)
        dlt, sig = nh - nc, nh + nc
        hc = dlt / (1 + sig - chi * dlt)
        ch = -dlt / (1 + sig + chi * dlt)
        den = (1 + sig) ** 2 - chi**2 * dlt**2
        return hc, ch, chi * dlt**2 / den, dlt * (1 + sig) / den, dlt, sig

    if kind in ("A", "B"):
        hc, ch, _, _, dlt, sig = terms(eps)
        j_hc = 2 * (1 - chi**2) * hc
        j_ch = 2 * (1 - chi**2) * ch
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(dlt != 0, np.abs(chi) * dlt / (1 + sig), np.nan)
        if kind == "B":
            gg = np.asarray(g, dtype=float)
            gl, gr = gamma * (1 - chi), gamma * (1 + chi)
            nh = thermal.bose_einstein(eps, T_h)
            nc = thermal.bose_einstein(eps, T_c)
            # the product Gamma_L Gamma_R is the same for both bias directions
            prod = gl * gr * (1 + 2 * nh) * (1 + 2 * nc)
            with np.errstate(invalid="ignore", divide="ignore"):
                factor = np.where(prod > 0, 4 * gg**2 / (4 * gg**2 + prod), 1.0)
            j_hc = j_hc * factor
            j_ch = j_ch * factor
        return j_hc, j_ch, r

    if kind == "C":
        gg = np.asarray(g, dtype=float)
        e_m, e_p = eps - gg, eps + gg
        hc_m, ch_m, p_m, q_m, d_m, _ = terms(e_m)
        hc_p, ch_p, p_p, q_p, d_p, _ = terms(e_p)
        j_hc = (1 - chi**2) * (e_m * hc_m + e_p * hc_p) / eps
        j_ch = (1 - chi**2) * (e_m * ch_m + e_p * ch_p) / eps
        num = e_m * p_m + e_p * p_p
        den = e_m * q_m + e_p * q_p
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where((d_m != 0) | (d_p != 0), np.abs(num / den), np.nan)
        return j_hc, j_ch, r

    raise InvalidParameter(f"unknown device {kind!r}")


def _scalar_args(spec: DeviceSpec, coupling: CouplingConfig, scenario: ThermalScenario):
    return (spec.kind, spec.epsilon, spec.delta, spec.g, coupling.chi, coupling.gamma, scenario.T_h, scenario.T_c)


def analytic_currents(spec: DeviceSpec, coupling: CouplingConfig, scenario: ThermalScenario) -> tuple[float, float]:
    """Closed-form ``(J_hc, J_ch)`` in units of gamma*epsilon."""
    j_hc, j_ch, _ = analytic_arrays(*_scalar_args(spec, coupling, scenario))
    return float(j_hc), float(j_ch)


def analytic_rectification(spec: DeviceSpec, coupling: CouplingConfig, scenario: ThermalScenario) -> float:
    _, _, r = analytic_arrays(*_scalar_args(spec, coupling, scenario))
    if np.isnan(r):
        raise EquilibriumUndefined("no thermal bias at any channel energy; R is 0/0")
    return float(r)


def regime_check(spec: DeviceSpec, coupling: CouplingConfig) -> list[str]:
    """Non-fatal warnings when a device leaves the coupling regime its master
    equation assumes."""
    out = []
    if spec.kind == "B" and spec.g > coupling.gamma:
        out.append(
            f"device B: g={spec.g:g} exceeds gamma={coupling.gamma:g}; "
            "the local master equation assumes g <= gamma"
        )
    if spec.kind == "C" and spec.g < STRONG_COUPLING_RATIO * coupling.gamma:
        out.append(
            f"device C: g={spec.g:g} is below {STRONG_COUPLING_RATIO:g} gamma; "
            "the global master equation assumes g >> gamma"
        )
    return out
