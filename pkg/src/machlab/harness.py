"""Epsilon sweeps: paired compressible / incompressible runs, rates, reports.

For every eps the compressible state (with two passive scalars, one carried
by v and one by Pv) and the incompressible reference (with its own scalar)
are advanced in lockstep with the same dt, so all errors are taken at
shared time levels without interpolation.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import os
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from .compressible import (
    CompressibleModel,
    default_stream_modes,
    ill_prepared_init,
    well_prepared_init,
)
from .diagnostics import bilinear_coeffs, lin_op_coeffs, split_velocity
from .fieldio import write_snapshot
from .incompressible import IncompressibleModel
from .pressure import PressureLaw
from .spectral import Geometry, make_grid, spectral_norm
from .transport import default_theta0

__version__ = "0.1.0"

NORM_GUARD = 3.0

# documented CSV schema, one row per eps
CSV_COLUMNS = [
    "eps",                # Mach number
    "valid",              # row passed the solver and the H^3 norm guard
    "sup_pv_err",         # sup_t ||Pv - v~||_L2
    "sup_pv_err_h1",      # sup_t ||Pv - v~||_H1
    "pointwise_err",      # ||v - v~||_L2 at T
    "eps_pointwise_err",  # eps * ||v - v~||_L2 at T
    "int_err",            # ||int_0^T (v - v~)||_L2
    "sup_theta_err",      # sup_t ||theta - theta~||_L2, theta carried by v
    "sup_theta_p_err",    # sup_t ||theta_P - theta~||_L2, theta_P carried by Pv
    "avg_slow_fast",      # sup_T ||<B[vP, vQ]>(T)||_H1
    "avg_fast",           # ||<vQ>(T)||_H3
    "avg_fast_l2",        # ||<vQ>(T)||_L2
    "vq_pointwise",       # ||vQ(T)||_L2
    "e0",                 # ||(rho0, v0)||_H3
    "et0",                # ||d_t(rho0, v0)||_H2
    "sup_lin",            # sup_t ||L(rho, v)||_H2
    "sup_dt",             # sup_t ||d_t(rho, v)||_H2
    "max_h3",             # sup_t ||(rho, v)||_H3
    "steps",
    "dt",
    "runtime",            # wall seconds, excluded from determinism
    "error",              # solver failure message, empty when none
]

SLOPE_SERIES = ["sup_pv_err", "sup_pv_err_h1", "pointwise_err", "eps_pointwise_err", "int_err",
                "sup_theta_err", "sup_theta_p_err", "avg_slow_fast", "avg_fast", "avg_fast_l2",
                "vq_pointwise", "sup_lin"]

PLOT_SERIES = ["sup_pv_err", "pointwise_err", "int_err", "sup_theta_err", "sup_theta_p_err",
               "avg_slow_fast", "avg_fast"]

# name -> (series, lower, upper) on fitted slopes
RATE_CHECKS = {
    "rate_sup": ("sup_pv_err", 1.8, 2.3),
    "rate_pointwise": ("pointwise_err", 0.8, 1.3),
    "rate_integrated": ("int_err", 1.8, 2.3),
    "rate_theta": ("sup_theta_err", 1.8, 2.3),
    "rate_theta_p": ("sup_theta_p_err", 1.8, 2.3),
    "rate_avg_fast": ("avg_fast", 1.8, np.inf),
    "rate_vq_pointwise": ("vq_pointwise", 0.8, 1.3),
    "rate_sup_ill": ("sup_pv_err", 0.8, 1.3),
}
SPREAD_LIMIT = 2.0
OTHER_CHECKS = ("uniform_dt", "lin_over_eps", "monotone")
DEFAULT_CHECKS = {
    "well": ("rate_sup", "rate_pointwise", "rate_integrated", "rate_theta", "rate_theta_p",
             "rate_avg_fast", "rate_vq_pointwise", "uniform_dt", "lin_over_eps", "monotone"),
    "ill": ("rate_sup_ill",),
}


@dataclass(frozen=True)
class RunConfig:
    geometry: str = "torus"
    nx: int = 128
    ny: int = 128
    gamma: float = 1.4
    eps: tuple = (0.08, 0.04, 0.02, 0.01)
    t_final: Optional[float] = None      # default 0.5 / E0
    t_factor: float = 0.5
    prep: str = "well"
    amplitude: float = 0.005
    acoustic_amplitude: float = 1.0
    n_modes: int = 6
    perturbation: float = 0.6
    cadence: int = 8                     # time steps per eps, dt <= eps / cadence
    norms: tuple = ("l2", "h1")
    seed: int = 0
    checks: Optional[tuple] = None       # None -> defaults for the preparation

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "norms", tuple(self.norms))
        if self.checks is not None:
            object.__setattr__(self, "checks", tuple(self.checks))
        Geometry(self.geometry)
        if not eps:
            raise ValueError("empty eps list")
        if len(set(eps)) != len(eps):
            raise ValueError("eps values must be distinct")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps values must be descending")
        if any(not 0 < e <= 0.5 for e in eps):
            raise ValueError("eps values must lie in (0, 1/2]")
        if self.prep not in ("well", "ill"):
            raise ValueError(f"prep must be 'well' or 'ill', got {self.prep!r}")
        if self.cadence < 4:
            raise ValueError("cadence below 4 samples per eps cannot resolve acoustics")
        bad = set(self.norms) - {"l2", "h1"}
        if bad:
            raise ValueError(f"unknown norms {sorted(bad)}")
        for c in self.active_checks():
            if c not in RATE_CHECKS and c not in OTHER_CHECKS:
                raise ValueError(f"unknown check {c!r}")

    def active_checks(self) -> tuple:
        return DEFAULT_CHECKS[self.prep] if self.checks is None else self.checks

    def grid(self):
        return make_grid(self.geometry, self.nx, self.ny)

    def law(self) -> PressureLaw:
        return PressureLaw.gamma_law(self.gamma)

    def modes(self):
        return default_stream_modes(self.seed, self.perturbation, self.n_modes)

    def initial_state(self, eps: float):
        g, law = self.grid(), self.law()
        if self.prep == "well":
            return well_prepared_init(g, law, self.modes(), self.amplitude, eps)
        return ill_prepared_init(g, law, self.modes(), self.acoustic_amplitude, eps,
                                 amplitude=self.amplitude)

    def horizon(self) -> float:
        if self.t_final is not None:
            return float(self.t_final)
        y = self.initial_state(self.eps[0]).to_array()
        return self.t_factor / spectral_norm(self.grid(), y, 3)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps"] = list(self.eps)
        d["norms"] = list(self.norms)
        d["checks"] = None if self.checks is None else list(self.checks)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **kw) -> "RunConfig":
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig(**d)


def _parse_list(text: str, conv=str) -> tuple:
    return tuple(conv(x) for x in text.replace(",", " ").split())


def load_config(path) -> RunConfig:
    """Read ``key = value`` lines (an optional ``[run]`` header is allowed)."""
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    sec = cp["run"] if "run" in cp else cp[cp.sections()[0]]
    known = {f.name for f in fields(RunConfig)}
    unknown = set(sec) - known - {"resolution"}
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    kw = {}
    for key, raw in sec.items():
        if key == "resolution":
            nums = _parse_list(raw.replace("x", " "), int)
            kw["nx"], kw["ny"] = nums[0], nums[-1]
        elif key in ("eps",):
            kw[key] = _parse_list(raw, float)
        elif key in ("norms", "checks"):
            kw[key] = _parse_list(raw)
        elif key in ("nx", "ny", "seed", "cadence", "n_modes"):
            kw[key] = int(raw)
        elif key in ("gamma", "amplitude", "acoustic_amplitude", "perturbation", "t_factor"):
            kw[key] = float(raw)
        elif key == "t_final":
            kw[key] = None if raw.strip().lower() in ("", "auto", "none") else float(raw)
        else:
            kw[key] = raw.strip()
    return RunConfig(**kw)


def steps_for(T: float, eps: float, cadence: int) -> int:
    """Power-of-two step count with dt <= eps / cadence."""
    return int(2 ** np.ceil(np.log2(max(1.0, cadence * T / eps))))


def _checkpoint(directory: Path, g, eps: float, i: int, t: float, Y, Z) -> None:
    from .compressible import CompressibleState
    from .spectral import VectorField

    st = CompressibleState.from_array(g, Y[:3], eps, t)
    write_snapshot(directory / f"compressible_eps{eps:g}_{i:06d}.mlf", [st.rho, st.v], t, eps)
    write_snapshot(directory / f"incompressible_eps{eps:g}_{i:06d}.mlf",
                   [VectorField.from_arrays(g, Z[0], Z[1])], t)


def run_epsilon(config: RunConfig, eps: float, T: Optional[float] = None,
                checkpoint_dir=None, checkpoint_every: int = 0) -> dict:
    """One lockstep compressible / incompressible run; returns a report row.

    With ``checkpoint_dir`` set, snapshots of both velocities are written
    every ``checkpoint_every`` steps (0: final state only).
    """
    t_start = time.perf_counter()
    T = config.horizon() if T is None else T
    g, law = config.grid(), config.law()
    y0 = config.initial_state(eps).to_array()
    th0 = default_theta0(g).coefficients

    cm = CompressibleModel(g, law, eps, ("v", "pv"))
    cm0 = CompressibleModel(g, law, eps)
    im = IncompressibleModel(g, 1)
    Y = np.concatenate([y0, th0[None], th0[None]])
    vp0, _ = split_velocity(g, y0[1:3])
    Z = np.concatenate([vp0, th0[None]])

    n = steps_for(T, eps, config.cadence)
    while T / n > min(cm.cfl_dt(Y), im.cfl_dt(Z)):
        n *= 2
    dt = T / n

    e0 = spectral_norm(g, y0, 3)
    et0 = spectral_norm(g, cm0.rhs(y0), 2)
    h1 = "h1" in config.norms
    sup = {"sup_pv_err": 0.0, "sup_pv_err_h1": 0.0, "sup_theta_err": 0.0, "sup_theta_p_err": 0.0,
           "avg_slow_fast": 0.0, "sup_lin": 0.0, "sup_dt": 0.0, "max_h3": 0.0}
    int_err = np.zeros_like(Y[1:3])
    avg_q = np.zeros_like(Y[1:3])
    avg_b = np.zeros_like(Y[1:3])
    prev = None
    valid = True

    for i in range(n + 1):
        vp, vq = split_velocity(g, Y[1:3])
        diff = Y[1:3] - Z[:2]
        bpq = bilinear_coeffs(g, vp, vq)
        if prev is not None:
            int_err += 0.5 * dt * (diff + prev[0])
            avg_q += 0.5 * dt * (vq + prev[1])
            avg_b += 0.5 * dt * (bpq + prev[2])
        prev = (diff, vq, bpq)
        sup["sup_pv_err"] = max(sup["sup_pv_err"], spectral_norm(g, vp - Z[:2]))
        if h1:
            sup["sup_pv_err_h1"] = max(sup["sup_pv_err_h1"], spectral_norm(g, vp - Z[:2], 1))
        sup["sup_theta_err"] = max(sup["sup_theta_err"], spectral_norm(g, Y[3] - Z[2]))
        sup["sup_theta_p_err"] = max(sup["sup_theta_p_err"], spectral_norm(g, Y[4] - Z[2]))
        sup["avg_slow_fast"] = max(sup["avg_slow_fast"], spectral_norm(g, avg_b, 1))
        sup["sup_lin"] = max(sup["sup_lin"], spectral_norm(g, lin_op_coeffs(g, Y[:3]), 2))
        sup["sup_dt"] = max(sup["sup_dt"], spectral_norm(g, cm0.rhs(Y[:3]), 2))
        h3 = spectral_norm(g, Y[:3], 3)
        sup["max_h3"] = max(sup["max_h3"], h3)
        if h3 > NORM_GUARD * e0:
            valid = False
        if checkpoint_dir is not None and (
                i == n or (checkpoint_every > 0 and i % checkpoint_every == 0)):
            _checkpoint(Path(checkpoint_dir), g, eps, i, i * dt, Y, Z)
        if i < n:
            Y = cm.step(Y, dt)
            Z = im.step(Z, dt)

    _, vq = split_velocity(g, Y[1:3])
    pointwise = spectral_norm(g, Y[1:3] - Z[:2])
    row = {
        "eps": eps, "valid": valid, **sup,
        "pointwise_err": pointwise,
        "eps_pointwise_err": eps * pointwise,
        "int_err": spectral_norm(g, int_err),
        "avg_fast": spectral_norm(g, avg_q, 3),
        "avg_fast_l2": spectral_norm(g, avg_q),
        "vq_pointwise": spectral_norm(g, vq),
        "e0": e0, "et0": et0, "steps": n, "dt": dt,
        "runtime": time.perf_counter() - t_start, "error": "",
    }
    if not h1:
        row["sup_pv_err_h1"] = None
    if not valid:
        row["error"] = f"H^3 norm exceeded {NORM_GUARD:g} E0 before T"
    return row


def _safe_run(config: RunConfig, eps: float, T: float) -> dict:
    try:
        return run_epsilon(config, eps, T)
    except Exception as exc:  # recorded per eps, the sweep continues
        row = {c: None for c in CSV_COLUMNS}
        row.update(eps=eps, valid=False, error=f"{type(exc).__name__}: {exc}", runtime=0.0)
        return row


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("MACHLAB_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


def fit_rate(eps: Sequence[float], err: Sequence[float]) -> dict:
    """Least-squares fit of log(err) = slope log(eps) + intercept."""
    e = np.asarray(eps, dtype=float)
    r = np.asarray(err, dtype=float)
    if e.shape != r.shape or e.size < 3:
        raise ValueError("need at least three (eps, err) pairs")
    if np.any(~np.isfinite(e)) or np.any(~np.isfinite(r)) or np.any(e <= 0) or np.any(r <= 0):
        raise ValueError("eps and err must be finite and positive")
    x, z = np.log(e), np.log(r)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, z, rcond=None)
    resid = z - (slope * x + intercept)
    pairwise = [float((z[i + 1] - z[i]) / (x[i + 1] - x[i])) for i in range(x.size - 1)]
    return {"slope": float(slope), "intercept": float(intercept),
            "residual": float(np.sqrt(np.mean(resid ** 2))), "pairwise": pairwise}


@dataclass
class ConvergenceReport:
    config: dict
    rows: list
    slopes: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows, "slopes": self.slopes,
                "checks": self.checks, "warnings": self.warnings, "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        return cls(d["config"], d["rows"], d.get("slopes", {}), d.get("checks", {}),
                   d.get("warnings", []), d.get("metadata", {}))

    def column(self, name: str, valid_only: bool = True):
        rows = [r for r in self.rows if r.get("valid") or not valid_only]
        return [r["eps"] for r in rows], [r[name] for r in rows]


def _spread(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min()) if v.size and v.min() > 0 else float("inf")


def evaluate_checks(report: ConvergenceReport, names: Sequence[str]) -> dict:
    out = {}
    valid = [r for r in report.rows if r.get("valid")]
    for name in names:
        if name in RATE_CHECKS:
            series, lo, hi = RATE_CHECKS[name]
            fit = report.slopes.get(series)
            value = None if fit is None else fit["slope"]
            ok = value is not None and lo <= value <= hi
            out[name] = {"value": value, "lower": lo, "upper": None if np.isinf(hi) else hi,
                         "passed": bool(ok)}
        elif name == "uniform_dt":
            vals = [r["sup_dt"] / (r["et0"] + r["e0"] ** 2) for r in valid]
            s = _spread(vals) if len(vals) >= 2 else None
            out[name] = {"value": s, "upper": SPREAD_LIMIT,
                         "passed": s is not None and s < SPREAD_LIMIT}
        elif name == "lin_over_eps":
            vals = [r["sup_lin"] / r["eps"] for r in valid]
            s = _spread(vals) if len(vals) >= 2 else None
            out[name] = {"value": s, "upper": SPREAD_LIMIT,
                         "passed": s is not None and s < SPREAD_LIMIT}
        elif name == "monotone":
            errs = [r["sup_pv_err"] for r in valid]
            ok = len(errs) >= 2 and all(b < a for a, b in zip(errs, errs[1:]))
            out[name] = {"value": None, "passed": bool(ok)}
    return out


def run_convergence_sweep(config: RunConfig, workers: Optional[int] = None) -> ConvergenceReport:
    T = config.horizon()
    n_workers = workers or worker_count(len(config.eps))
    if n_workers == 1:
        rows = [_safe_run(config, e, T) for e in config.eps]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_safe_run, [config] * len(config.eps), config.eps,
                                 [T] * len(config.eps)))
    rows.sort(key=lambda r: -r["eps"])

    report = ConvergenceReport(config.to_dict(), rows)
    report.metadata = {
        "config_hash": config.hash(), "t_final": T, "machlab": __version__,
        "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version(),
    }
    for r in rows:
        if r["error"]:
            report.warnings.append(f"eps={r['eps']:g}: {r['error']}")
    valid = [r for r in rows if r.get("valid")]
    if len(valid) < 3:
        msg = f"only {len(valid)} valid eps point(s); rates need at least 3"
        report.warnings.append(msg)
        warnings.warn(msg)
    else:
        eps = [r["eps"] for r in valid]
        for name in SLOPE_SERIES:
            vals = [r[name] for r in valid]
            if all(v is not None and v > 0 for v in vals):
                report.slopes[name] = fit_rate(eps, vals)
    report.checks = evaluate_checks(report, config.active_checks())
    return report


# output

def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(report: ConvergenceReport, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([_csv_value(r.get(c)) for c in CSV_COLUMNS])
    return path


def write_json(report: ConvergenceReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return path


def read_json(path) -> ConvergenceReport:
    return ConvergenceReport.from_dict(json.loads(Path(path).read_text()))


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def write_svg(report: ConvergenceReport, path, series: Sequence[str] = PLOT_SERIES) -> Path:
    """Log-log plot: one polyline per error series plus dashed fitted lines."""
    W, H, pad = 640, 420, 60
    data = {}
    for name in series:
        pts = [(r["eps"], r.get(name)) for r in report.rows if r.get("valid")]
        pts = [(e, v) for e, v in pts if v is not None and v > 0]
        if pts:
            data[name] = pts
    allpts = [p for pts in data.values() for p in pts] or [(1.0, 1.0), (10.0, 10.0)]
    lx = np.log10([p[0] for p in allpts])
    ly = np.log10([p[1] for p in allpts])
    x0, x1 = lx.min() - 0.05, lx.max() + 0.05
    y0, y1 = ly.min() - 0.2, ly.max() + 0.2

    def px(e):
        return pad + (np.log10(e) - x0) / (x1 - x0 or 1) * (W - 2 * pad)

    def py(v):
        return H - pad - (np.log10(v) - y0) / (y1 - y0 or 1) * (H - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
           f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="13">eps (log)</text>',
           f'<text x="15" y="{H / 2}" font-size="13" transform="rotate(-90 15 {H / 2})" '
           f'text-anchor="middle">error (log)</text>']
    for k, (name, pts) in enumerate(data.items()):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{px(e):.2f},{py(v):.2f}" for e, v in pts)
        out.append(f'<polyline class="series" data-series="{name}" fill="none" '
                   f'stroke="{color}" stroke-width="2" points="{coords}"/>')
        fit = report.slopes.get(name)
        if fit is not None:
            ea, eb = pts[0][0], pts[-1][0]
            fa = np.exp(fit["intercept"]) * ea ** fit["slope"]
            fb = np.exp(fit["intercept"]) * eb ** fit["slope"]
            out.append(f'<line class="fit" x1="{px(ea):.2f}" y1="{py(fa):.2f}" x2="{px(eb):.2f}" '
                       f'y2="{py(fb):.2f}" stroke="{color}" stroke-dasharray="4 3"/>')
        label = name if fit is None else f"{name} (slope {fit['slope']:.2f})"
        out.append(f'<text x="{W - pad - 200}" y="{pad + 16 * k}" font-size="11" '
                   f'fill="{color}">{label}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def emit_report(report: ConvergenceReport, out_dir, formats: Sequence[str] = ("csv", "json")) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writers = {"csv": write_csv, "json": write_json, "svg": write_svg}
    paths = []
    for fmt in formats:
        if fmt not in writers:
            raise ValueError(f"unknown format {fmt!r}")
        paths.append(writers[fmt](report, out_dir / f"report.{fmt}"))
    return paths
