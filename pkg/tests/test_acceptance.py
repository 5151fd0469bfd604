"""End-to-end acceptance checks.

Each test records one PASS/FAIL line (printed in the terminal summary) and then
asserts the same condition with the stated tolerance. Currents from the
numeric engine are in units of gamma*epsilon and carry the calibrated factor
``KAPPA`` relative to the closed forms.
"""

import time

import numpy as np
import pytest

from rectiflow import thermal
from rectiflow.devices import DeviceSpec, analytic_arrays
from rectiflow.errors import NoThermalBias
from rectiflow.linalg import OK
from rectiflow.optimize import (
    ParameterBox,
    default_alpha_grid,
    front_gap,
    nondominated_mask,
    pareto_front,
    region_compare,
    tradeoff_curve,
)
from rectiflow.rectification import KAPPA, bidirectional, numeric_arrays, rectification_arrays, rectification_factor
from rectiflow.thermal import CouplingConfig, ThermalScenario

T_C = 0.01
GAMMA = 1e-3
N = 200


def sample(kind, n, seed):
    """Random points inside the validity domain, T_h in [0.1, 6]."""
    rng = np.random.default_rng(seed)
    g = {"A": np.zeros(n), "B": rng.uniform(1e-3, 0.05, n), "C": rng.uniform(0.01, 0.95, n)}[kind]
    return dict(
        kind=kind,
        epsilon=1.0,
        delta=np.zeros(n),
        g=g,
        chi=rng.uniform(-0.99, 0.99, n),
        gamma=10 ** rng.uniform(-4, -2, n),
        T_h=rng.uniform(0.1, 6.0, n),
        T_c=T_C,
    )


def both_engines(p):
    args = (p["kind"], p["epsilon"], p["delta"], p["g"], p["chi"], p["gamma"], p["T_h"], p["T_c"])
    num = numeric_arrays(*args)
    a_hc, a_ch, a_r = analytic_arrays(*args)
    return num, rectification_arrays(num.j_hc, num.j_ch), a_hc, a_ch, a_r


@pytest.fixture(scope="module")
def oracle_runs():
    start = time.perf_counter()
    runs = {k: both_engines(sample(k, N, seed)) for seed, k in enumerate("ABC")}
    return runs, time.perf_counter() - start


def test_1_oracle_r(oracle_runs, acceptance):
    runs, elapsed = oracle_runs
    worst = {k: float(np.max(np.abs(r - a_r))) for k, (num, r, _, _, a_r) in runs.items()}
    statuses = all(np.all(num.status == OK) for num, *_ in runs.values())
    ok = statuses and max(worst.values()) < 1e-8 and elapsed < 10
    detail = ", ".join(f"{k} max|dR|={v:.2e}" for k, v in worst.items())
    acceptance(1, ok, f"{detail}; {3 * N} points in {elapsed:.2f} s")
    assert statuses
    assert max(worst.values()) < 1e-8
    assert elapsed < 10


def test_2_oracle_current_ratio(oracle_runs, acceptance):
    runs, _ = oracle_runs
    ratios = np.concatenate([np.concatenate([num.j_hc / a_hc, num.j_ch / a_ch]) for num, _, a_hc, a_ch, _ in runs.values()])
    kappa = float(np.mean(ratios))
    spread = float(np.ptp(ratios) / abs(kappa))
    acceptance(2, spread < 1e-8, f"kappa={kappa:.12g} (documented {KAPPA}), relative spread {spread:.2e}")
    assert spread < 1e-8
    assert kappa == pytest.approx(KAPPA, rel=1e-8)


def test_3_degenerate_b_relations(acceptance):
    p = sample("B", 100, seed=7)
    rest = (p["chi"], p["gamma"], p["T_h"], p["T_c"])
    b = numeric_arrays("B", p["epsilon"], p["delta"], p["g"], *rest)
    a = numeric_arrays("A", p["epsilon"], 0.0, 0.0, *rest)
    gl, gr = p["gamma"] * (1 - p["chi"]), p["gamma"] * (1 + p["chi"])
    nh, nc = thermal.bose_einstein(1.0, p["T_h"]), thermal.bose_einstein(1.0, T_C)
    worst_j = 0.0
    # total damping rates of each side; the product is the same in both bias directions
    factor = 1 + gl * (1 + 2 * nh) * gr * (1 + 2 * nc) / (4 * p["g"] ** 2)
    for jb, ja in ((b.j_hc, a.j_hc), (b.j_ch, a.j_ch)):
        worst_j = max(worst_j, float(np.max(np.abs(jb * factor - ja))))
    worst_r = float(np.max(np.abs(rectification_arrays(b.j_hc, b.j_ch) - rectification_arrays(a.j_hc, a.j_ch))))
    ok = worst_j < 1e-8 and worst_r < 1e-8
    acceptance(3, ok, f"max|J_B*(1+G_L G_R/4g^2) - J_A|={worst_j:.2e}, max|R_B - R_A|={worst_r:.2e} over 100 points")
    assert worst_j < 1e-8
    assert worst_r < 1e-8


def test_4_limits(acceptance):
    sc, results = ThermalScenario(2.0, T_C), {}

    # (a) no asymmetry: only the mirror-symmetric devices (B without detuning)
    sym = [DeviceSpec.a(), DeviceSpec.b(1.0, 0.0, 0.01), DeviceSpec.c(1.0, 0.4)]
    results["a"] = max(rectification_factor(bidirectional(s, sc, CouplingConfig(GAMMA, 0.0))) for s in sym)

    # (b) one side decoupled
    specs = sym + [DeviceSpec.b(1.0, 0.07, 0.01)]
    results["b"] = max(
        max(abs(c.j_hc), abs(c.j_ch))
        for s in specs
        for chi in (1.0, -1.0)
        for c in [bidirectional(s, sc, CouplingConfig(GAMMA, chi))]
    )

    # (c) vanishing splitting of device C
    worst_c = 0.0
    for chi in (-0.6, 0.0, 0.3, 0.8):
        ca = bidirectional(DeviceSpec.a(), sc, CouplingConfig(GAMMA, chi))
        cc = bidirectional(DeviceSpec.c(1.0, 1e-6), sc, CouplingConfig(GAMMA, chi))
        worst_c = max(worst_c, abs(cc.j_hc / ca.j_hc - 1), abs(cc.j_ch / ca.j_ch - 1))
    results["c"] = worst_c

    # (d) hot limit. The finite-temperature correction to both quantities is
    # about 1/(n_h (1 - chi)) with n_h ~ 99.5, so the 2% window holds for
    # |chi| up to about 0.5.
    hot, worst_r, worst_j = ThermalScenario(100.0, T_C), 0.0, 0.0
    for chi in (-0.45, -0.2, 0.2, 0.45):
        c = bidirectional(DeviceSpec.a(), hot, CouplingConfig(GAMMA, chi))
        worst_r = max(worst_r, abs(rectification_factor(c) / abs(chi) - 1))
        worst_j = max(worst_j, abs(c.j_hc / (2 * (1 + chi) * KAPPA) - 1))
    results["d"] = max(worst_r, worst_j)

    ok = results["a"] < 1e-10 and results["b"] < 1e-12 and results["c"] < 1e-4 and results["d"] < 0.02
    acceptance(
        4,
        ok,
        f"(a) max R={results['a']:.1e} (b) max|J|={results['b']:.1e} (c) rel={results['c']:.1e} "
        f"(d) R rel={worst_r:.4f}, J_hc rel={worst_j:.4f}",
    )
    assert results["a"] < 1e-10
    assert results["b"] < 1e-12
    assert results["c"] < 1e-4
    assert results["d"] < 0.02


def test_5_steady_state_validity(acceptance):
    rng = np.random.default_rng(5)
    n, worst = 300, {"trace": 0.0, "herm": 0.0, "eig": 0.0, "balance": 0.0}
    cases = {
        "A": (0.0, 0.0),
        "B": (rng.uniform(0, 0.2, n), rng.uniform(0, 0.1, n)),
        "C": (0.0, rng.uniform(0.01, 0.95, n)),
    }
    all_ok = True
    for kind, (delta, g) in cases.items():
        b = numeric_arrays(kind, 1.0, delta, g, rng.uniform(-1, 1, n), GAMMA, rng.uniform(0.02, 10, n), T_C, keep_states=True)
        all_ok &= bool(np.all(b.status == OK))
        for rho in (b.rho_hc, b.rho_ch):
            worst["trace"] = max(worst["trace"], float(np.max(np.abs(np.trace(rho, axis1=1, axis2=2) - 1))))
            worst["herm"] = max(worst["herm"], float(np.max(np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))))))
            worst["eig"] = min(worst["eig"], float(np.linalg.eigvalsh(rho).min()))
        worst["balance"] = max(worst["balance"], float(b.balance.max()))
    ok = (all_ok and worst["trace"] < 1e-12 and worst["herm"] < 1e-12
          and worst["eig"] >= -1e-10 and worst["balance"] < 1e-10)
    acceptance(5, ok, " ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f" over {3 * n} states x 2 directions")
    assert all_ok
    assert worst["trace"] < 1e-12 and worst["herm"] < 1e-12
    assert worst["eig"] >= -1e-10
    assert worst["balance"] < 1e-10


# optimization ranges of the two-temperature front comparison
BOXES = {
    "A": {"chi": (0.0, 1.0)},
    "B": {"chi": (0.0, 1.0), "delta": (0.0, 0.1), "g": (0.0, 0.05)},
    "C": {"chi": (0.0, 1.0), "g": (0.1, 0.95)},
}


def box(device, t_h, **fixed):
    free = {k: v for k, v in BOXES[device].items() if k not in fixed}
    return ParameterBox(device, free, {"epsilon": 1.0, "gamma": GAMMA, "T_h": t_h, "T_c": T_C, **fixed})


@pytest.fixture(scope="module")
def fronts():
    start = time.perf_counter()
    out = {(d, th): pareto_front(box(d, th), engine="numeric") for th in (0.4, 2.0) for d in "ABC"}
    return out, time.perf_counter() - start


def test_6_front_ordering(fronts, acceptance):
    out, elapsed = fronts
    parts, ok = [], elapsed < 120
    for th in (0.4, 2.0):
        for hi, lo in (("C", "B"), ("B", "A")):
            gap, at = front_gap(out[hi, th], out[lo, th])
            ok &= gap >= -1e-6
            parts.append(f"T_h={th} {hi}-{lo} min gap {gap:+.2e} at J={at:.3f}")
    acceptance(6, ok, "; ".join(parts) + f"; {elapsed:.0f} s")
    assert elapsed < 120
    for th in (0.4, 2.0):
        for hi, lo in (("C", "B"), ("B", "A")):
            assert front_gap(out[hi, th], out[lo, th])[0] >= -1e-6, f"T_h={th}: front {hi} below front {lo}"


def test_7_constrained_rectification(acceptance):
    t_hot = np.linspace(0.1, 6.0, 60)
    j_min = 1.0 * KAPPA
    boxes = {
        "A": box("A", 1.0),
        "B": box("B", 1.0, g=0.1),
        "C": box("C", 1.0, g=0.8),
    }
    curves = {}
    for d, b in boxes.items():
        r = np.full(t_hot.size, np.nan)
        for p in tradeoff_curve(b, t_hot, j_min=j_min, engine="numeric"):
            r[np.flatnonzero(t_hot == p.params["T_h"])[0]] = p.r
        curves[d] = r
    a, c = curves["A"], curves["C"]
    # C must be defined wherever A is and lie on or above it
    below = np.isnan(c[~np.isnan(a)]).any() or bool(np.any(c[~np.isnan(a)] < a[~np.isnan(a)]))
    end = [curves[d][-1] for d in "ABC"]
    spread = float(np.nanmax(end) - np.nanmin(end))
    worst = float(np.nanmin(c - a)) if np.any(~np.isnan(c - a)) else float("nan")
    ok = not below and spread < 0.02
    acceptance(
        7,
        ok,
        f"min(R_C - R_A)={worst:+.4f}, C feasible from T_h={t_hot[~np.isnan(c)][0]:.2f} vs A from "
        f"{t_hot[~np.isnan(a)][0]:.2f}; at T_h=6 R_A={end[0]:.4f} R_B={end[1]:.4f} R_C={end[2]:.4f} (spread {spread:.4f})",
    )
    assert not below, "device C's constrained rectification falls below device A's"
    assert spread < 0.02


def test_8_winners_nondominated(fronts, acceptance):
    out, _ = fronts
    alphas = default_alpha_grid()
    bad, checked = 0, 0
    for f in out.values():
        assert len(f.winners) == alphas.size == 101
        keep = nondominated_mask(f.cloud.j, f.cloud.r, 1e-9)
        live = ~np.isnan(f.cloud.r)
        for alpha, w in zip(alphas, f.winners):
            eta = alpha * f.cloud.r + (1 - alpha) * f.cloud.j
            hit = (f.cloud.j == w.j) & (f.cloud.r == w.r)
            checked += 1
            bad += not (keep[hit].any() and w.eta >= np.max(eta[live]))
    acceptance(8, bad == 0, f"{checked} winners (6 fronts x 101 alphas), {bad} dominated")
    assert bad == 0


def test_9_equilibrium(acceptance):
    sc = ThermalScenario(0.5, 0.5)
    with pytest.raises(NoThermalBias):
        rectification_factor(bidirectional(DeviceSpec.a(), sc, CouplingConfig(GAMMA, 0.4)))
    t_hot = [T_C, 1.0, 2.0]
    pts = tradeoff_curve(box("C", 1.0), t_hot, alpha=0.5, engine="numeric", points=16, rounds=2)
    m = region_compare("C", "A", t_hot, "g", [0.2, 0.5], {"epsilon": 1.0, "gamma": GAMMA, "T_c": T_C, "chi": 0.4})
    ok = [p.params["T_h"] for p in pts] == [1.0, 2.0] and np.all(m.labels[0] == "") and np.all(m.labels[1:] != "")
    acceptance(9, ok, "NoThermalBias raised at T_h=T_c; optimizer and region map skip the equilibrium cell")
    assert ok
