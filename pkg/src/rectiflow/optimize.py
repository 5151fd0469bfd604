"""Derivative-free maximization of the COP over device parameters, Pareto
fronts, trade-off curves and device-dominance region maps.

The search is a uniform grid over the free parameters followed by rounds of
local refinement: each round shrinks the box to a quarter of its width around
the incumbent and re-grids it. The incumbent is always kept, so extra rounds
never lower the best value found.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .devices import MAX_DETUNING, analytic_arrays
from .errors import AllInfeasible, Infeasible, InvalidParameter, NoAnalyticForm
from .linalg import OK
from .rectification import numeric_arrays, rectification_arrays

PARAM_ORDER = ("chi", "delta", "g")
DEVICE_PARAMS = {"A": ("chi",), "B": ("chi", "delta", "g"), "C": ("chi", "g")}
SCENARIO_KEYS = ("epsilon", "gamma", "T_h", "T_c")
ENGINES = ("analytic", "numeric")
DOMINANCE_TOL = 1e-9
DEFAULT_POINTS = 64
DEFAULT_REFINE_POINTS = 9
DEFAULT_ROUNDS = 6
SHRINK = 0.25
CHUNK = 4096


def default_alpha_grid(n: int = 101) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True)
class ParameterBox:
    """Free parameter intervals of one device plus fixed scenario values.

    ``free`` maps a device parameter to ``(lo, hi)``; ``fixed`` must hold
    ``epsilon``, ``gamma``, ``T_h``, ``T_c`` and every device parameter that
    is not free (``delta`` and ``g`` default to 0 for device B).
    """

    device: str
    free: dict
    fixed: dict

    def __post_init__(self):
        if self.device not in DEVICE_PARAMS:
            raise InvalidParameter(f"unknown device {self.device!r}")
        allowed = DEVICE_PARAMS[self.device]
        fixed = dict(self.fixed)
        if self.device == "B":
            for k in ("delta", "g"):
                if k not in self.free:
                    fixed.setdefault(k, 0.0)
        for k in self.free:
            if k not in allowed:
                raise InvalidParameter(f"device {self.device} has no parameter {k!r}")
            if k in fixed:
                raise InvalidParameter(f"parameter {k!r} is both free and fixed")
        for k in SCENARIO_KEYS + tuple(p for p in allowed if p not in self.free):
            if k not in fixed:
                raise InvalidParameter(f"missing fixed value for {k!r}")
        extra = set(fixed) - set(SCENARIO_KEYS) - set(allowed)
        if extra:
            raise InvalidParameter(f"device {self.device} does not use {sorted(extra)}")
        eps = fixed["epsilon"]
        if not (eps > 0 and fixed["gamma"] > 0 and fixed["T_h"] > 0 and fixed["T_c"] > 0):
            raise InvalidParameter("epsilon, gamma and temperatures must be positive")
        domain = {
            "chi": (-1.0, 1.0),
            "delta": (0.0, MAX_DETUNING * eps),
            "g": (0.0, eps if self.device == "C" else np.inf),
        }
        for k, (lo, hi) in self.free.items():
            dlo, dhi = domain[k]
            if not (dlo <= lo <= hi <= dhi):
                raise InvalidParameter(f"interval {k}=[{lo}, {hi}] must satisfy {dlo} <= lo <= hi <= {dhi}")
        object.__setattr__(self, "free", {k: (float(self.free[k][0]), float(self.free[k][1])) for k in PARAM_ORDER if k in self.free})
        object.__setattr__(self, "fixed", {k: float(v) for k, v in fixed.items()})

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.free)

    def with_fixed(self, **values) -> "ParameterBox":
        return ParameterBox(self.device, dict(self.free), {**self.fixed, **values})


@dataclass(frozen=True)
class PerformancePoint:
    device: str
    j: float
    r: float
    j_hc: float
    j_ch: float
    params: dict = field(default_factory=dict)
    eta: float | None = None
    alpha: float | None = None


@dataclass
class Cloud:
    """Every point evaluated during a search, in evaluation order."""

    names: tuple
    x: np.ndarray
    j_hc: np.ndarray
    j_ch: np.ndarray
    j: np.ndarray
    r: np.ndarray
    ok: np.ndarray

    @classmethod
    def empty(cls, names) -> "Cloud":
        z = np.empty(0)
        return cls(tuple(names), np.empty((0, len(names))), z, z, z, z, np.empty(0, dtype=bool))

    def extend(self, other: "Cloud") -> "Cloud":
        return Cloud(
            self.names,
            np.concatenate([self.x, other.x]),
            *(np.concatenate([getattr(self, a), getattr(other, a)]) for a in ("j_hc", "j_ch", "j", "r", "ok")),
        )

    def __len__(self) -> int:
        return len(self.j)

    @property
    def n_infeasible(self) -> int:
        return int(np.count_nonzero(~self.ok))


def _check_engine(box: ParameterBox, engine: str) -> None:
    if engine not in ENGINES:
        raise InvalidParameter(f"engine must be one of {ENGINES}, got {engine!r}")
    if engine == "analytic" and box.device == "B":
        if "delta" in box.free or box.fixed.get("delta", 0.0) != 0.0:
            raise NoAnalyticForm("detuned device B has no closed form; use the numeric engine")


def _valid_mask(device: str, p: dict) -> np.ndarray:
    eps = p["epsilon"]
    ok = np.abs(p["chi"]) <= 1
    if device == "B":
        ok &= (p["delta"] >= 0) & (p["delta"] <= MAX_DETUNING * eps) & (p["g"] >= 0)
    if device == "C":
        ok &= (p["g"] > 0) & (p["g"] < eps)
    return ok


def _eval_chunk(device: str, p: dict, engine: str):
    args = (device, p["epsilon"], p.get("delta", 0.0), p.get("g", 0.0), p["chi"], p["gamma"], p["T_h"], p["T_c"])
    if engine == "analytic":
        j_hc, j_ch, r = analytic_arrays(*args)
        j_hc, j_ch, r = (np.broadcast_to(v, p["chi"].shape).astype(float) for v in (j_hc, j_ch, r))
    else:
        b = numeric_arrays(*args)
        j_hc = np.where(b.status == OK, b.j_hc, np.nan)
        j_ch = np.where(b.status == OK, b.j_ch, np.nan)
        r = rectification_arrays(j_hc, j_ch)
    return j_hc, j_ch, r


def evaluate_arrays(device: str, p: dict, engine: str, workers: int = 1):
    """``(j_hc, j_ch, R)`` for 1-D parameter arrays in ``p``; NaN where a point
    is outside the device domain, at equilibrium, or degenerate."""
    n = np.broadcast(*p.values()).shape[0]
    p = {k: np.broadcast_to(np.asarray(v, dtype=float), (n,)) for k, v in p.items()}
    p.setdefault("delta", np.zeros(n))
    p.setdefault("g", np.zeros(n))
    idx = np.flatnonzero(_valid_mask(device, p))
    j_hc = np.full(n, np.nan)
    j_ch = np.full(n, np.nan)
    r = np.full(n, np.nan)
    chunks = [idx[i : i + CHUNK] for i in range(0, idx.size, CHUNK)]

    def run(sel):
        return _eval_chunk(device, {k: v[sel] for k, v in p.items()}, engine)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(sel) for sel in chunks]
    for sel, (a, b, c) in zip(chunks, results):
        j_hc[sel], j_ch[sel], r[sel] = a, b, c
    return j_hc, j_ch, r


def _cloud(names, x, j_hc, j_ch, r) -> Cloud:
    j = np.maximum(np.abs(j_hc), np.abs(j_ch))
    return Cloud(tuple(names), x, j_hc, j_ch, j, r, np.isfinite(j) & np.isfinite(r))


def evaluate(box: ParameterBox, x: np.ndarray, engine: str = "analytic", workers: int = 1) -> Cloud:
    """(J, R) at parameter rows ``x`` (columns ordered as ``box.names``)."""
    _check_engine(box, engine)
    x = np.asarray(x, dtype=float).reshape(-1, len(box.names))
    n = x.shape[0]
    p = {k: np.full(n, v) for k, v in box.fixed.items()}
    for i, k in enumerate(box.names):
        p[k] = x[:, i]
    return _cloud(box.names, x, *evaluate_arrays(box.device, p, engine, workers))


def _grid(intervals: list[tuple[float, float]], points: int) -> np.ndarray:
    axes = [np.array([lo]) if hi <= lo else np.linspace(lo, hi, points) for lo, hi in intervals]
    if not axes:
        return np.empty((1, 0))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _argmax_lex(score: np.ndarray, x: np.ndarray) -> int:
    """Index of the largest score; ties go to the lexicographically smallest row."""
    best = np.max(score)
    cand = np.flatnonzero(score == best)
    if cand.size == 1 or x.shape[1] == 0:
        return int(cand[0])
    order = np.lexsort(x[cand].T[::-1])
    return int(cand[order[0]])


def _search(box, score_fn, engine, points, refine_points, rounds, workers, coarse: Cloud | None = None):
    """Grid search plus local refinement maximizing ``score_fn(cloud)``.

    Returns ``(best_index, cloud)``; ``best_index`` is None when no evaluated
    point has a finite score.
    """
    base = [box.free[k] for k in box.names]
    cloud = coarse if coarse is not None else evaluate(box, _grid(base, points), engine, workers)
    score = score_fn(cloud)
    if not np.any(np.isfinite(score)):
        return None, cloud
    best = _argmax_lex(np.where(np.isfinite(score), score, -np.inf), cloud.x)
    widths = np.array([hi - lo for lo, hi in base])
    for _ in range(rounds):
        widths = widths * SHRINK
        if not np.any(widths > 0):
            break
        centre = cloud.x[best]
        local = [
            (max(lo, c - w / 2), min(hi, c + w / 2)) for (lo, hi), c, w in zip(base, centre, widths)
        ]
        new = evaluate(box, _grid(local, refine_points), engine, workers)
        cloud = cloud.extend(new)
        score = np.concatenate([score, score_fn(new)])
        best = _argmax_lex(np.where(np.isfinite(score), score, -np.inf), cloud.x)
    return best, cloud


def _point(box: ParameterBox, cloud: Cloud, i: int, eta=None, alpha=None) -> PerformancePoint:
    params = dict(box.fixed)
    params.update({k: float(cloud.x[i, n]) for n, k in enumerate(box.names)})
    return PerformancePoint(
        device=box.device,
        j=float(cloud.j[i]),
        r=float(cloud.r[i]),
        j_hc=float(cloud.j_hc[i]),
        j_ch=float(cloud.j_ch[i]),
        params=params,
        eta=None if eta is None else float(eta),
        alpha=alpha,
    )


def _cop_score(alpha: float):
    if not 0 <= alpha <= 1:
        raise InvalidParameter(f"alpha must lie in [0, 1], got {alpha}")
    return lambda c: np.where(c.ok, alpha * c.r + (1 - alpha) * c.j, np.nan)


@dataclass
class CopResult:
    point: PerformancePoint
    cloud: Cloud

    @property
    def n_infeasible(self) -> int:
        return self.cloud.n_infeasible


def maximize_cop(
    box: ParameterBox,
    alpha: float,
    engine: str = "analytic",
    points: int = DEFAULT_POINTS,
    refine_points: int = DEFAULT_REFINE_POINTS,
    rounds: int = DEFAULT_ROUNDS,
    workers: int = 1,
) -> CopResult:
    """Best ``alpha R + (1 - alpha) J`` over ``box``.

    Raises
    ------
    AllInfeasible
        if no grid point could be evaluated.
    """
    score = _cop_score(alpha)
    best, cloud = _search(box, score, engine, points, refine_points, rounds, workers)
    if best is None:
        raise AllInfeasible(f"all {len(cloud)} grid points of device {box.device} are infeasible")
    return CopResult(_point(box, cloud, best, eta=score(cloud)[best], alpha=alpha), cloud)


def nondominated_mask(j, r, tol: float = DOMINANCE_TOL) -> np.ndarray:
    """True for points that no other point beats by more than ``tol`` in both
    J and R. NaN entries are never kept."""
    j = np.asarray(j, dtype=float)
    r = np.asarray(r, dtype=float)
    finite = np.isfinite(j) & np.isfinite(r)
    keep = np.zeros(j.shape, dtype=bool)
    idx = np.flatnonzero(finite)
    if idx.size == 0:
        return keep
    order = idx[np.argsort(j[idx], kind="stable")]
    js, rs = j[order], r[order]
    suffix = np.maximum.accumulate(rs[::-1])[::-1]
    k = np.searchsorted(js, js + tol, side="left")
    dominated = np.zeros(order.size, dtype=bool)
    has = k < order.size
    dominated[has] = suffix[k[has]] >= rs[has] + tol
    keep[order[~dominated]] = True
    return keep


def nondominated_filter(points: list[PerformancePoint], tol: float = DOMINANCE_TOL) -> list[PerformancePoint]:
    """Non-dominated subset of ``points`` in ascending J (stable)."""
    if not points:
        return []
    j = np.array([p.j for p in points])
    r = np.array([p.r for p in points])
    keep = nondominated_mask(j, r, tol)
    order = np.lexsort((r, j))
    return [points[i] for i in order if keep[i]]


@dataclass
class ParetoFront:
    device: str
    points: list[PerformancePoint]  # ascending J; ``alpha`` = smallest winning alpha, if any
    winners: list[PerformancePoint]  # eta-optimal point per alpha
    cloud: Cloud
    box: ParameterBox

    @property
    def n_infeasible(self) -> int:
        return self.cloud.n_infeasible

    @property
    def j(self) -> np.ndarray:
        return np.array([p.j for p in self.points])

    @property
    def r(self) -> np.ndarray:
        return np.array([p.r for p in self.points])

    def eta_table(self) -> list[tuple[float, float]]:
        return [(w.alpha, w.eta) for w in self.winners]

    def attainable_r(self, j_min) -> np.ndarray:
        """Largest R on the front among points with J >= j_min (NaN beyond the front)."""
        js, rs = self.j, self.r
        suffix = np.maximum.accumulate(rs[::-1])[::-1]
        k = np.searchsorted(js, np.asarray(j_min, dtype=float), side="left")
        out = np.full(np.shape(k), np.nan)
        has = k < js.size
        out[has] = suffix[k[has]]
        return out

    def interpolated_r(self, j) -> np.ndarray:
        """R along the front drawn as a piecewise-linear curve; NaN outside its J range."""
        return np.interp(np.asarray(j, dtype=float), self.j, self.r, left=np.nan, right=np.nan)


def front_gap(upper: ParetoFront, lower: ParetoFront, samples: int = 20001) -> tuple[float, float]:
    """Smallest ``R_upper(J) - R_lower(J)`` over the J range both fronts cover.

    Fronts are compared as piecewise-linear curves. Returns ``(gap, J)`` at
    the worst sample, or ``(nan, nan)`` if the ranges do not overlap.
    """
    lo = max(upper.j[0], lower.j[0])
    hi = min(upper.j[-1], lower.j[-1])
    if not hi >= lo:
        return float("nan"), float("nan")
    j = np.linspace(lo, hi, samples)
    d = upper.interpolated_r(j) - lower.interpolated_r(j)
    i = int(np.nanargmin(d))
    return float(d[i]), float(j[i])


def pareto_front(
    box: ParameterBox,
    alpha_grid=None,
    engine: str = "analytic",
    points: int = DEFAULT_POINTS,
    refine_points: int = DEFAULT_REFINE_POINTS,
    rounds: int = DEFAULT_ROUNDS,
    workers: int = 1,
) -> ParetoFront:
    """Front from maximizing the COP at every alpha of ``alpha_grid``.

    The coarse grid is shared by all alphas. The front is the non-dominated
    subset of every point evaluated; each alpha's winner is re-selected over
    that whole cloud so it is guaranteed to lie on the front.
    """
    alphas = default_alpha_grid() if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    if alphas.size == 0:
        raise InvalidParameter("alpha grid is empty")
    for a in alphas:
        _cop_score(a)
    _check_engine(box, engine)
    coarse = evaluate(box, _grid([box.free[k] for k in box.names], points), engine, workers)
    if not np.any(coarse.ok):
        raise AllInfeasible(f"all {len(coarse)} grid points of device {box.device} are infeasible")
    cloud = coarse
    for a in alphas:
        _, local = _search(box, _cop_score(a), engine, points, refine_points, rounds, workers, coarse=coarse)
        cloud = cloud.extend(
            Cloud(local.names, *(getattr(local, f)[len(coarse):] for f in ("x", "j_hc", "j_ch", "j", "r", "ok")))
        )

    winners = []
    win_idx = {}
    for a in alphas:
        s = _cop_score(a)(cloud)
        i = _argmax_lex(np.where(np.isfinite(s), s, -np.inf), cloud.x)
        winners.append(_point(box, cloud, i, eta=s[i], alpha=float(a)))
        win_idx.setdefault(i, float(a))

    keep = np.flatnonzero(nondominated_mask(cloud.j, cloud.r))
    order = keep[np.lexsort((cloud.r[keep], cloud.j[keep]))]
    # the same parameter point can be evaluated by several refinements
    seen, front = set(), []
    for i in order:
        key = tuple(cloud.x[i])
        if key in seen and i not in win_idx:
            continue
        seen.add(key)
        front.append(_point(box, cloud, i, alpha=win_idx.get(i)))
    return ParetoFront(box.device, front, winners, cloud, box)


def max_r_given_j(
    box: ParameterBox,
    j_min: float,
    engine: str = "analytic",
    points: int = DEFAULT_POINTS,
    refine_points: int = DEFAULT_REFINE_POINTS,
    rounds: int = DEFAULT_ROUNDS,
    workers: int = 1,
) -> PerformancePoint:
    """Largest R over ``box`` subject to ``J >= j_min``.

    Raises
    ------
    Infeasible
        if no evaluated point reaches ``j_min``.
    """
    if not j_min >= 0:
        raise InvalidParameter("j_min must be nonnegative")

    def score(c):
        return np.where(c.ok & (c.j >= j_min), c.r, np.nan)

    best, cloud = _search(box, score, engine, points, refine_points, rounds, workers)
    if best is None:
        raise Infeasible(f"no point of device {box.device} reaches J >= {j_min:g}")
    return _point(box, cloud, best, eta=score(cloud)[best])


def tradeoff_curve(
    box: ParameterBox,
    t_hot,
    alpha: float | None = None,
    j_min: float | None = None,
    engine: str = "analytic",
    **kwargs,
) -> list[PerformancePoint]:
    """Optimal operating point at each hot temperature.

    With ``alpha`` the COP is maximized; with ``j_min`` instead, R is
    maximized under ``J >= j_min``. Temperatures where nothing is feasible
    are skipped.
    """
    if (alpha is None) == (j_min is None):
        raise InvalidParameter("give exactly one of alpha or j_min")
    out = []
    for th in np.atleast_1d(np.asarray(t_hot, dtype=float)):
        b = box.with_fixed(T_h=float(th))
        try:
            if alpha is not None:
                out.append(maximize_cop(b, alpha, engine, **kwargs).point)
            else:
                out.append(max_r_given_j(b, j_min, engine, **kwargs))
        except (AllInfeasible, Infeasible):
            continue
    return out


FIRST, SECOND, ALPHA = "FIRST", "SECOND", "ALPHA"


@dataclass
class RegionMap:
    t_hot: np.ndarray
    axis: str
    values: np.ndarray
    labels: np.ndarray  # (len(t_hot), len(values)); "" where either device is infeasible
    first: Cloud
    second: Cloud

    def counts(self) -> dict:
        return {lab: int(np.count_nonzero(self.labels == lab)) for lab in (FIRST, SECOND, ALPHA)}


def classify(j1, r1, j2, r2, tol: float = DOMINANCE_TOL) -> np.ndarray:
    j1, r1, j2, r2 = (np.asarray(v, dtype=float) for v in (j1, r1, j2, r2))
    lab = np.full(j1.shape, ALPHA, dtype=object)
    lab[(j1 > j2 + tol) & (r1 > r2 + tol)] = FIRST
    lab[(j2 > j1 + tol) & (r2 > r1 + tol)] = SECOND
    bad = ~(np.isfinite(j1) & np.isfinite(r1) & np.isfinite(j2) & np.isfinite(r2))
    lab[bad] = ""
    return lab


def region_compare(
    first: str,
    second: str,
    t_hot,
    axis: str,
    values,
    fixed: dict,
    engine: str = "numeric",
    workers: int = 1,
) -> RegionMap:
    """Label each (T_h, axis) cell by which device wins in both J and R.

    ``fixed`` holds epsilon, gamma, T_c, chi and any device parameter not on
    the axis; a device that does not use ``axis`` ignores it.
    """
    if axis not in ("delta", "g"):
        raise InvalidParameter("region axis must be 'delta' or 'g'")
    for dev in (first, second):
        if dev not in DEVICE_PARAMS:
            raise InvalidParameter(f"unknown device {dev!r}")
    if engine not in ENGINES:
        raise InvalidParameter(f"engine must be one of {ENGINES}, got {engine!r}")
    missing = {"epsilon", "gamma", "T_c", "chi"} - set(fixed)
    if missing:
        raise InvalidParameter(f"missing fixed values {sorted(missing)}")
    if not all(fixed[k] > 0 for k in ("epsilon", "gamma", "T_c")) or np.any(np.asarray(t_hot) <= 0):
        raise InvalidParameter("epsilon, gamma and temperatures must be positive")
    t_hot = np.asarray(t_hot, dtype=float)
    values = np.asarray(values, dtype=float)
    th, v = (m.ravel() for m in np.meshgrid(t_hot, values, indexing="ij"))
    x = np.stack([th, v], axis=1)
    clouds = []
    for dev in (first, second):
        p = {k: val for k, val in fixed.items() if k in SCENARIO_KEYS or k in DEVICE_PARAMS[dev]}
        p["T_h"] = th
        if axis in DEVICE_PARAMS[dev]:
            p[axis] = v
        if engine == "analytic" and dev == "B" and (axis == "delta" or fixed.get("delta", 0.0) != 0.0):
            raise NoAnalyticForm("detuned device B has no closed form; use the numeric engine")
        clouds.append(_cloud(("T_h", axis), x, *evaluate_arrays(dev, p, engine, workers)))
    labels = classify(clouds[0].j, clouds[0].r, clouds[1].j, clouds[1].r).reshape(t_hot.size, values.size)
    return RegionMap(t_hot, axis, values, labels, clouds[0], clouds[1])
