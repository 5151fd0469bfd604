"""Command-line front end: ``rectiflow {point,tradeoff,pareto,regions} CONFIG``.

A run is described by one JSON document. A handful of flags override config
fields. Output is CSV (``#`` metadata lines, header row, 12 significant
digits) or JSON, byte-identical for identical configs.

Exit codes: 0 success, 1 configuration error, 2 domain error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .devices import DeviceSpec, analytic_arrays, build_model, regime_check
from .errors import AllInfeasible, DomainError, EquilibriumUndefined, Infeasible, NumericalFailure, RectiflowError
from .optimize import (
    DEVICE_PARAMS,
    ParameterBox,
    default_alpha_grid,
    maximize_cop,
    max_r_given_j,
    pareto_front,
    region_compare,
)
from .rectification import bidirectional, rectification_factor, solve_model
from .thermal import CouplingConfig, Orientation, ThermalScenario

log = logging.getLogger("rectiflow")

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3
PRESETS = ("tradeoff_a", "regions_b_vs_a", "regions_c_vs_a", "fronts", "tradeoff_abc", "max_r_abc")


class ConfigError(Exception):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Sweep(_Strict):
    """``num`` evenly spaced values from ``start`` to ``stop`` inclusive."""

    start: float
    stop: float
    num: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop < self.start:
            raise ValueError("empty sweep: stop < start")
        if self.num > 1 and self.stop == self.start:
            raise ValueError("empty sweep: start == stop with num > 1")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


Scalar = float
Interval = tuple[float, float]
Values = Union[Sweep, list[float], float]


def _values(v) -> np.ndarray:
    if isinstance(v, Sweep):
        return v.values()
    out = np.atleast_1d(np.asarray(v, dtype=float))
    if out.size == 0:
        raise ValueError("empty value list")
    return out


class Params(_Strict):
    """Device parameters: a number fixes a value, ``[lo, hi]`` frees it."""

    chi: Union[Scalar, Interval, None] = None
    delta: Union[Scalar, Interval, None] = None
    g: Union[Scalar, Interval, None] = None

    @field_validator("chi", "delta", "g")
    @classmethod
    def _interval(cls, v):
        if isinstance(v, tuple) and v[1] < v[0]:
            raise ValueError(f"empty interval [{v[0]}, {v[1]}]")
        return v


class GridConfig(_Strict):
    points: int = Field(64, ge=1)
    refine_points: int = Field(9, ge=2)
    rounds: int = Field(6, ge=0)


class RegionsConfig(_Strict):
    first: Literal["A", "B", "C"]
    second: Literal["A", "B", "C"]
    axis: Literal["delta", "g"]
    values: Union[Sweep, list[float]]


class ExperimentConfig(_Strict):
    device: Union[Literal["A", "B", "C"], list[Literal["A", "B", "C"]]] = "A"
    engine: Literal["analytic", "numeric", "both"] = "analytic"
    epsilon: float = Field(1.0, gt=0)
    gamma: float = Field(1e-3, gt=0)
    T_c: float = Field(0.01, gt=0)
    T_h: Values = 2.0
    params: Params = Params()
    device_params: dict[Literal["A", "B", "C"], Params] = {}
    alpha_grid: Union[Sweep, list[float], None] = None
    objective: Literal["cop", "max_r"] = "cop"
    j_min: float | None = Field(None, ge=0)
    regions: RegionsConfig | None = None
    grid: GridConfig = GridConfig()
    out: str | None = None
    format: Literal["csv", "json"] = "csv"
    threads: int | None = Field(None, ge=1)

    @field_validator("T_h")
    @classmethod
    def _nonempty(cls, v):
        _values(v)
        return v

    @field_validator("alpha_grid")
    @classmethod
    def _alphas(cls, v):
        if v is None:
            return v
        a = _values(v)
        if np.any((a < 0) | (a > 1)):
            raise ValueError("alpha values must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def _objective(self):
        if self.objective == "max_r" and self.j_min is None:
            raise ValueError("objective 'max_r' needs j_min")
        return self

    @property
    def devices(self) -> list[str]:
        return [self.device] if isinstance(self.device, str) else list(self.device)

    def alphas(self) -> np.ndarray:
        return default_alpha_grid() if self.alpha_grid is None else _values(self.alpha_grid)

    def t_hot(self) -> np.ndarray:
        return _values(self.T_h)

    def params_for(self, device: str) -> dict:
        merged = self.params.model_dump()
        if device in self.device_params:
            merged.update({k: v for k, v in self.device_params[device].model_dump().items() if v is not None})
        return {k: v for k, v in merged.items() if v is not None and k in DEVICE_PARAMS[device]}

    def digest(self) -> str:
        body = self.model_dump(mode="json", exclude={"out", "threads"})
        return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if np.isnan(x):
        return "nan"
    return format(x, ".12g")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return None if not np.isfinite(x) else float(_fmt(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


class Table:
    def __init__(self, columns: list[str]):
        self.columns = columns
        self.rows: list[list] = []
        self.meta: dict = {}

    def add(self, **row):
        self.rows.append([row.get(c) for c in self.columns])

    def to_csv(self, header: dict) -> str:
        buf = io.StringIO()
        for k, v in {**header, **self.meta}.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


def _box(cfg: ExperimentConfig, device: str, t_h: float) -> ParameterBox:
    free, fixed = {}, {"epsilon": cfg.epsilon, "gamma": cfg.gamma, "T_h": float(t_h), "T_c": cfg.T_c}
    for k, v in cfg.params_for(device).items():
        if isinstance(v, tuple):
            free[k] = v
        else:
            fixed[k] = float(v)
    if "chi" not in free and "chi" not in fixed:
        raise ConfigError(f"device {device}: chi must be given")
    if device == "C" and "g" not in free and "g" not in fixed:
        raise ConfigError("device C: g must be given")
    return ParameterBox(device, free, fixed)


def _opt_engine(cfg: ExperimentConfig) -> str:
    return "analytic" if cfg.engine == "both" else cfg.engine


def _grid_kwargs(cfg: ExperimentConfig, workers: int) -> dict:
    return {**cfg.grid.model_dump(), "workers": workers}


def _ratio(device: str, params: dict, j_hc: float) -> float:
    """Numeric over analytic ``J_hc`` at one point."""
    p = params
    spec = DeviceSpec(device, p["epsilon"], p.get("delta", 0.0), p.get("g", 0.0))
    num = bidirectional(spec, ThermalScenario(p["T_h"], p["T_c"]), CouplingConfig(p["gamma"], p["chi"]))
    return num.j_hc / j_hc if j_hc else float("nan")


def cmd_point(cfg: ExperimentConfig, workers: int = 1) -> Table:
    cols = ["device", "T_h", "chi", "delta", "g", "J_hc", "J_ch", "J", "R"]
    if cfg.engine == "both":
        cols += ["J_hc_analytic", "J_ch_analytic", "R_analytic", "ratio_numeric_analytic"]
    cols += ["alpha", "eta"]
    t = Table(cols)
    th = cfg.t_hot()
    if th.size != 1:
        raise ConfigError("point: T_h must be a single value")
    alphas = cfg.alphas() if cfg.alpha_grid is not None else np.array([0.0, 0.5, 1.0])
    for dev in cfg.devices:
        p = cfg.params_for(dev)
        if any(isinstance(v, tuple) for v in p.values()):
            raise ConfigError("point: parameters must be single values, not intervals")
        if "chi" not in p:
            raise ConfigError(f"device {dev}: chi must be given")
        spec = DeviceSpec(dev, cfg.epsilon, p.get("delta", 0.0), p.get("g", 0.0))
        coupling = CouplingConfig(cfg.gamma, p["chi"])
        scen = ThermalScenario(float(th[0]), cfg.T_c)
        for w in regime_check(spec, coupling):
            log.warning(w)
        row = {"device": dev, "T_h": th[0], "chi": p["chi"], "delta": p.get("delta"), "g": p.get("g")}
        if cfg.engine in ("numeric", "both"):
            pair = bidirectional(spec, scen, coupling)
            j_hc, j_ch = pair.j_hc, pair.j_ch
            r = rectification_factor(pair)
            for orient in (Orientation.HOT_LEFT, Orientation.HOT_RIGHT):
                sc = ThermalScenario(scen.T_h, scen.T_c, orient)
                model, _ = build_model(spec, coupling, sc)
                diag = solve_model(model, coupling, sc).diagnostics()
                tag = "hc" if orient is Orientation.HOT_LEFT else "ch"
                t.meta[f"{dev}_steady_state_{tag}"] = " ".join(f"{k}={_fmt(v)}" for k, v in diag.items())
        if cfg.engine in ("analytic", "both"):
            a_hc, a_ch, a_r = (float(np.ravel(v)[0]) for v in analytic_arrays(
                dev, cfg.epsilon, p.get("delta", 0.0), p.get("g", 0.0), p["chi"], cfg.gamma, th[0], cfg.T_c))
            if cfg.engine == "analytic":
                j_hc, j_ch = a_hc, a_ch
                r = a_r
                if not np.isfinite(r):
                    raise EquilibriumUndefined("no thermal bias at any channel energy; R is undefined")
            else:
                row.update(J_hc_analytic=a_hc, J_ch_analytic=a_ch, R_analytic=a_r,
                           ratio_numeric_analytic=j_hc / a_hc if a_hc else float("nan"))
        j = max(abs(j_hc), abs(j_ch))
        row.update(J_hc=j_hc, J_ch=j_ch, J=j, R=r)
        for a in alphas:
            t.add(**row, alpha=a, eta=a * r + (1 - a) * j)
    return t


def cmd_tradeoff(cfg: ExperimentConfig, workers: int = 1) -> Table:
    cols = ["device", "T_h", "alpha", "chi_opt", "delta_opt", "g_opt", "J", "R", "eta"]
    if cfg.engine == "both":
        cols.append("ratio_numeric_analytic")
    t = Table(cols)
    engine = _opt_engine(cfg)
    kw = _grid_kwargs(cfg, workers)
    boxes = {(dev, th): _box(cfg, dev, th) for dev in cfg.devices for th in cfg.t_hot()}
    skipped = 0
    for (dev, th), box in boxes.items():
        runs = [(a, None) for a in cfg.alphas()] if cfg.objective == "cop" else [(None, cfg.j_min)]
        for a, jmin in runs:
            try:
                pt = maximize_cop(box, a, engine, **kw).point if jmin is None else max_r_given_j(box, jmin, engine, **kw)
            except (AllInfeasible, Infeasible):
                skipped += 1
                continue
            row = dict(device=dev, T_h=th, alpha=a, chi_opt=pt.params.get("chi"), delta_opt=pt.params.get("delta"),
                       g_opt=pt.params.get("g"), J=pt.j, R=pt.r, eta=pt.eta)
            if cfg.engine == "both":
                row["ratio_numeric_analytic"] = _ratio(dev, pt.params, pt.j_hc)
            t.add(**row)
    t.meta["skipped_infeasible"] = skipped
    return t


def cmd_pareto(cfg: ExperimentConfig, workers: int = 1) -> tuple[Table, dict]:
    extra = sorted({k for dev in cfg.devices for k in DEVICE_PARAMS[dev]}, key=("chi", "delta", "g").index)
    cols = ["device", "T_h", "J", "R", "alpha_winner"] + extra
    if cfg.engine == "both":
        cols.append("ratio_numeric_analytic")
    t = Table(cols)
    engine = _opt_engine(cfg)
    boxes = {(dev, th): _box(cfg, dev, th) for dev in cfg.devices for th in cfg.t_hot()}
    summary = {"alpha": [float(a) for a in cfg.alphas()], "fronts": []}
    for (dev, th), box in boxes.items():
        f = pareto_front(box, cfg.alphas(), engine, **_grid_kwargs(cfg, workers))
        for p in f.points:
            row = dict(device=dev, T_h=th, J=p.j, R=p.r, alpha_winner=p.alpha, **{k: p.params.get(k) for k in extra})
            if cfg.engine == "both":
                row["ratio_numeric_analytic"] = _ratio(dev, p.params, p.j_hc)
            t.add(**row)
        summary["fronts"].append({
            "device": dev,
            "T_h": float(th),
            "points": len(f.points),
            "evaluated": len(f.cloud),
            "infeasible": f.n_infeasible,
            "max_eta": [float(w.eta) for w in f.winners],
        })
        t.meta[f"{dev}_T_h={_fmt(th)}_infeasible"] = f.n_infeasible
    return t, _jsonable(summary)


def cmd_regions(cfg: ExperimentConfig, workers: int = 1) -> Table:
    rc = cfg.regions
    if rc is None:
        raise ConfigError("regions: missing 'regions' section")
    if cfg.engine == "both":
        raise ConfigError("regions: engine 'both' is not supported; choose analytic or numeric")
    fixed = {"epsilon": cfg.epsilon, "gamma": cfg.gamma, "T_c": cfg.T_c}
    for dev in (rc.first, rc.second):
        for k, v in cfg.params_for(dev).items():
            if isinstance(v, tuple):
                raise ConfigError("regions: parameters must be single values")
            if k != rc.axis:
                fixed[k] = float(v)
    if "chi" not in fixed:
        raise ConfigError("regions: chi must be given")
    m = region_compare(rc.first, rc.second, cfg.t_hot(), rc.axis, _values(rc.values), fixed, cfg.engine, workers)
    t = Table(["T_h", rc.axis, "label"])
    for i, th in enumerate(m.t_hot):
        for k, v in enumerate(m.values):
            if m.labels[i, k]:
                t.add(T_h=th, label=m.labels[i, k], **{rc.axis: v})
    t.meta["skipped_infeasible"] = int(np.count_nonzero(m.labels == ""))
    t.meta["counts"] = " ".join(f"{k}={v}" for k, v in m.counts().items())
    return t


COMMANDS = {"point": cmd_point, "tradeoff": cmd_tradeoff, "pareto": cmd_pareto, "regions": cmd_regions}


def load_config(path: str | None, preset: str | None, overrides: dict) -> ExperimentConfig:
    if path is not None and preset is not None:
        raise ConfigError("give either a config file or --preset, not both")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        text = resources.files("rectiflow.presets").joinpath(f"{preset}.json").read_text()
        source = f"preset {preset}"
    elif path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e.strerror}") from None
        source = path
    else:
        text, source = "{}", "defaults"
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        lines = [f"{source}: {'.'.join(str(x) for x in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]
        raise ConfigError("\n".join(lines)) from None


def _alpha_flag(text: str):
    """``0,0.5,1`` or ``start:stop:num``."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("--alpha-grid expects start:stop:num")
        return {"start": float(parts[0]), "stop": float(parts[1]), "num": int(parts[2])}
    return [float(x) for x in text.split(",") if x.strip()]


def _threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("RECTIFLOW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"RECTIFLOW_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("RECTIFLOW_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rectiflow", description="Steady-state heat rectification of qubit devices.")
    ap.add_argument("--version", action="version", version=f"rectiflow {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", help="JSON experiment file")
        p.add_argument("--preset", choices=PRESETS)
        p.add_argument("--device", help="A, B, C or a comma-separated list")
        p.add_argument("--engine", choices=("analytic", "numeric", "both"))
        p.add_argument("--alpha-grid", help="0,0.5,1 or start:stop:num")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--threads", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def render(cfg: ExperimentConfig, command: str, result) -> dict[str, str]:
    """Output documents keyed by destination suffix ("" is the main one)."""
    table, summary = result if isinstance(result, tuple) else (result, None)
    header = {"rectiflow": __version__, "command": command, "config_sha256": cfg.digest()}
    if cfg.format == "json":
        doc = {"meta": {**header, **table.meta}, "rows": table.records()}
        if summary is not None:
            doc["summary"] = summary
        return {"": json.dumps(_jsonable(doc), indent=1, sort_keys=False) + "\n"}
    out = {"": table.to_csv(header)}
    if summary is not None:
        out[".summary.json"] = json.dumps({"meta": header, **summary}, indent=1) + "\n"
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        overrides = {
            "device": (args.device.split(",") if args.device and "," in args.device else args.device),
            "engine": args.engine,
            "alpha_grid": _alpha_flag(args.alpha_grid) if args.alpha_grid else None,
            "out": args.out,
            "format": args.format,
            "threads": args.threads,
        }
        cfg = load_config(args.config, args.preset, overrides)
        workers = _threads(cfg.threads)
        result = COMMANDS[args.command](cfg, workers)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except (NumericalFailure, RectiflowError, np.linalg.LinAlgError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    docs = render(cfg, args.command, result)
    if cfg.out is None:
        sys.stdout.write(docs[""])
        for suffix, text in docs.items():
            if suffix:
                sys.stderr.write(text)
    else:
        base = Path(cfg.out)
        for suffix, text in docs.items():
            target = base if not suffix else base.with_name(base.stem + suffix)
            target.write_text(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
