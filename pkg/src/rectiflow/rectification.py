"""Heat flows, bidirectional currents and the rectification figures of merit.

Currents in :class:`CurrentPair` and in the batched engine are expressed in
units of ``gamma * epsilon``. :func:`heat_flow` and :func:`current` return
plain power (energy per unit time with hbar = 1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import thermal
from .devices import DeviceSpec, LindbladModel, build_model, channel_layout, hamiltonian, rate_pairs, validate_device
from .errors import DegenerateSteadyState, InvalidParameter, NoThermalBias, NumericalFailure
from .linalg import DEGENERATE, OK, DensityMatrix, build_liouvillian, dag, liouvillian_stack, solve_steady_states, steady_state
from .thermal import CouplingConfig, Orientation, ThermalScenario

log = logging.getLogger(__name__)

# Ratio between the engine's J = Q_R - Q_L and the closed-form currents.
# Measured by calibrate_kappa(); identical for all three devices.
KAPPA = 0.5
ZERO_CURRENT = 1e-14  # units of gamma*epsilon


@dataclass(frozen=True)
class CurrentPair:
    j_hc: float
    j_ch: float


def solve_model(model: LindbladModel, coupling: CouplingConfig, scenario: ThermalScenario) -> DensityMatrix:
    pairs = rate_pairs(model, coupling, scenario)
    return steady_state(build_liouvillian(model.hamiltonian, pairs))


def heat_flow(model: LindbladModel, side: str, rho: DensityMatrix, scenario: ThermalScenario, coupling: CouplingConfig) -> float:
    """Heat current flowing into reservoir ``side`` ("L" or "R")."""
    pairs = rate_pairs(model, coupling, scenario, side=side)
    if not pairs:
        log.warning("no channels couple to side %s; heat flow is zero", side)
        return 0.0
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    h = model.hamiltonian
    # Tr{H D[X] rho} = Tr{(X^+ H X - {X^+ X, H}/2) rho}
    total = 0.0
    for rate, x in pairs:
        xd = dag(x)
        adj = xd @ h @ x - 0.5 * (xd @ x @ h + h @ xd @ x)
        total += rate * np.trace(adj @ r).real
    return -float(total)


def current(model: LindbladModel, scenario: ThermalScenario, coupling: CouplingConfig) -> float:
    """``Q_R - Q_L`` at the steady state of ``model``."""
    rho = solve_model(model, coupling, scenario)
    return heat_flow(model, "R", rho, scenario, coupling) - heat_flow(model, "L", rho, scenario, coupling)


def bidirectional(spec: DeviceSpec, scenario: ThermalScenario, coupling: CouplingConfig) -> CurrentPair:
    """Numeric currents with the hot reservoir on the left, then on the right.

    The orientation stored in ``scenario`` is ignored.
    """
    scale = coupling.gamma * spec.epsilon
    out = []
    for orient in (Orientation.HOT_LEFT, Orientation.HOT_RIGHT):
        sc = ThermalScenario(scenario.T_h, scenario.T_c, orient)
        model, _ = build_model(spec, coupling, sc)
        out.append(current(model, sc, coupling) / scale)
    return CurrentPair(*out)


def rectification_factor(c: CurrentPair) -> float:
    """``|(J_hc + J_ch) / (J_hc - J_ch)|``."""
    if abs(c.j_hc) < ZERO_CURRENT and abs(c.j_ch) < ZERO_CURRENT:
        raise NoThermalBias("both currents vanish; the rectification factor is 0/0")
    diff = c.j_hc - c.j_ch
    if abs(diff) <= ZERO_CURRENT:
        raise NoThermalBias("currents flow in the same direction with equal size")
    return abs((c.j_hc + c.j_ch) / diff)


def max_current(c: CurrentPair) -> float:
    return max(abs(c.j_hc), abs(c.j_ch))


def cop(r, j, alpha):
    """Coefficient of performance ``alpha R + (1 - alpha) J``."""
    a = np.asarray(alpha, dtype=float)
    if np.any(~((a >= 0) & (a <= 1))):
        raise InvalidParameter(f"alpha must lie in [0, 1], got {alpha}")
    out = a * r + (1 - a) * j
    return float(out) if np.ndim(out) == 0 else out


def rectification_arrays(j_hc, j_ch):
    """Vectorized :func:`rectification_factor`; NaN where it is undefined."""
    j_hc = np.asarray(j_hc, dtype=float)
    j_ch = np.asarray(j_ch, dtype=float)
    diff = j_hc - j_ch
    bad = ((np.abs(j_hc) < ZERO_CURRENT) & (np.abs(j_ch) < ZERO_CURRENT)) | ~(np.abs(diff) > ZERO_CURRENT)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.abs((j_hc + j_ch) / diff)
    return np.where(bad, np.nan, r)


@dataclass
class NumericBatch:
    """Batched engine output; currents in units of gamma*epsilon.

    ``status`` follows :mod:`rectiflow.linalg` (worst of the two bias
    directions). ``balance`` is ``|Q_L + Q_R|`` in units of gamma*epsilon,
    maximized over both directions. ``rho_hc``/``rho_ch`` are kept only on
    request.
    """

    j_hc: np.ndarray
    j_ch: np.ndarray
    status: np.ndarray
    balance: np.ndarray
    rho_hc: np.ndarray | None = None
    rho_ch: np.ndarray | None = None


def numeric_arrays(kind, epsilon, delta, g, chi, gamma, T_h, T_c, keep_states: bool = False) -> NumericBatch:
    """Solve the master equation for every parameter combination (broadcast)."""
    eps, delta, g, chi, gamma, T_h, T_c = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (epsilon, delta, g, chi, gamma, T_h, T_c))
    )
    validate_device(kind, eps, delta, g)
    if np.any(np.abs(chi) > 1) or np.any(~(gamma > 0)):
        raise InvalidParameter("need |chi| <= 1 and gamma > 0")
    layout = channel_layout(kind)
    h = hamiltonian(kind, eps, delta, g)
    ops = []
    for op, _, _ in layout:
        ops.extend([dag(op), op])
    ops = np.array(ops)
    energies = [efn(eps, delta, g) for _, _, efn in layout]
    gside = {"L": gamma * (1 - chi), "R": gamma * (1 + chi)}
    scale = gamma * eps

    results = {}
    for orient, (t_left, t_right) in (("hc", (T_h, T_c)), ("ch", (T_c, T_h))):
        temps = {"L": t_left, "R": t_right}
        rates = []
        for (_, side, _), energy in zip(layout, energies):
            up, down = thermal.rates(energy, temps[side], gside[side])
            rates.extend([up, down])
        rates = np.stack(rates, axis=-1)
        sol = solve_steady_states(liouvillian_stack(h, ops, rates))
        rho = sol.rho
        flows = {"L": 0.0, "R": 0.0}
        for k, x in enumerate(ops):
            side = layout[k // 2][1]
            xd = dag(x)
            adj = xd @ h @ x - 0.5 * (xd @ x @ h + h @ xd @ x)
            flows[side] = flows[side] - rates[:, k] * np.einsum("nij,nji->n", adj, rho).real
        results[orient] = (flows["R"] - flows["L"], np.abs(flows["R"] + flows["L"]), sol.status, rho)

    j_hc, bal_hc, st_hc, rho_hc = results["hc"]
    j_ch, bal_ch, st_ch, rho_ch = results["ch"]
    status = np.maximum(st_hc, st_ch)
    return NumericBatch(
        j_hc=j_hc / scale,
        j_ch=j_ch / scale,
        status=status,
        balance=np.maximum(bal_hc, bal_ch) / scale,
        rho_hc=rho_hc if keep_states else None,
        rho_ch=rho_ch if keep_states else None,
    )


def numeric_pair(spec: DeviceSpec, scenario: ThermalScenario, coupling: CouplingConfig) -> CurrentPair:
    """Batched-engine counterpart of :func:`bidirectional` for a single point."""
    b = numeric_arrays(spec.kind, spec.epsilon, spec.delta, spec.g, coupling.chi, coupling.gamma, scenario.T_h, scenario.T_c)
    st = int(b.status[0])
    if st == DEGENERATE:
        raise DegenerateSteadyState("Liouvillian null space has dimension > 1")
    if st != OK:
        raise NumericalFailure("steady-state solve failed")
    return CurrentPair(float(b.j_hc[0]), float(b.j_ch[0]))


def calibrate_kappa(epsilon=1.0, gamma=1e-3, chi=0.4, T_h=2.0, T_c=0.01) -> float:
    """Ratio numeric / closed-form current at the device-A reference point."""
    from .devices import analytic_currents

    spec = DeviceSpec.a(epsilon)
    coupling = CouplingConfig(gamma, chi)
    sc = ThermalScenario(T_h, T_c)
    return bidirectional(spec, sc, coupling).j_hc / analytic_currents(spec, coupling, sc)[0]
