"""Acceptance checks comparing the matrix experiments with the closed-form theory.

Each ``check_*`` function returns a :class:`CheckResult`; :func:`run_verify`
runs the whole suite on one configuration and keeps the tables it produced
so that the caller can serialize them.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .config import ExperimentConfig
from .ensemble import (
    EnsembleResult,
    PseudoPoint,
    count_in_box,
    im_profile,
    pseudospectrum_grid,
    run_spectrum_ensemble,
    run_trial,
    tunneling_measurement,
)
from .matrix import assemble_operator, eigenvalues
from .symbol import FourierSymbol, action, boundary_distance, exp_minus_ix, turning_points
from .theory import (
    Box,
    ModelParams,
    Gamma_im,
    edge_scale,
    gamma_im,
    theory_profile,
    tunneling_overlap_prediction,
    weyl_count,
    y_levels,
)

log = logging.getLogger(__name__)

WEYL_ALPHA = 3.0
ZONE_BETA = 20.0
VOID_EPS = 0.05
GRID_RE = (-0.5, 0.5)
GRID_IM = (0.3, 0.7)  # |Im z - <Im g>| range, in units of the strip half-width
GRID_SHAPE = (20, 10)
TUNNEL_OFFSETS = (0.5, -0.5, 0.3, -0.3)
CURVE_ABSCISSAE = 5


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": bool(self.passed), "detail": self.detail, "values": self.values}


# --- oracles --------------------------------------------------------------


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12, depth: int = 50) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return rec(a, m, fa, flm, fm, left, tol / 2, depth - 1) + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)


def action_by_quadrature(symbol: FourierSymbol, y: float) -> float:
    """``Im int (z - g)`` between the turning points on the branch of the smaller integral."""
    tp = turning_points(symbol, complex(0.0, y))
    end = tp.x_minus if y <= symbol.mean_im else tp.x_minus - 2.0 * math.pi
    val = adaptive_simpson(lambda x: y - symbol.eval(x).imag, tp.x_plus, end)
    return abs(val)


def lu_log_abs_det(A: np.ndarray) -> float:
    lu, _ = sla.lu_factor(A)
    return float(np.sum(np.log(np.abs(np.diagonal(lu)))))


def companion(coeffs) -> np.ndarray:
    """Companion matrix of the monic polynomial ``z^n + c_{n-1} z^{n-1} + ... + c_0``."""
    c = np.asarray(coeffs, dtype=complex)
    n = c.size
    C = np.zeros((n, n), dtype=complex)
    C[1:, :-1] = np.eye(n - 1)
    C[:, -1] = -c
    return C


def match_multisets(a, b) -> float:
    """Largest distance under the optimal matching of two small point sets."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


# --- individual checks ----------------------------------------------------


def check_exact_spectrum(config: ExperimentConfig) -> CheckResult:
    cfg = config.with_overrides(delta=0.0, trials=1)
    ev = np.sort_complex(run_trial(cfg, 0))
    H = assemble_operator(cfg.symbol, cfg.h, cfg.N)
    expected = np.sort_complex(np.diagonal(H).copy()) if _is_triangular(H) else None
    if expected is None:
        return CheckResult(1, "exact unperturbed spectrum", False, "operator is not triangular for this symbol")
    mismatches = int(np.count_nonzero(ev != expected))
    return CheckResult(
        1,
        "exact unperturbed spectrum",
        mismatches == 0,
        f"{mismatches} of {ev.size} eigenvalues differ from h*j + <g> (zero tolerance)",
        {"mismatches": mismatches, "dim": int(ev.size)},
    )


def _is_triangular(H: np.ndarray) -> bool:
    return not np.count_nonzero(np.tril(H, -1)) or not np.count_nonzero(np.triu(H, 1))


def check_action_oracle(symbol: FourierSymbol) -> CheckResult:
    mean = symbol.mean_im
    s_mean = action(symbol, mean).s
    quad = action_by_quadrature(symbol, mean)
    err_quad = abs(s_mean - quad)
    half = 0.5 * (symbol.im_max - symbol.im_min)
    ys = [mean + half * f for f in np.linspace(-0.9, 0.9, 19) if abs(f) > 1e-9]
    for y in ys:
        err_quad = max(err_quad, abs(action(symbol, y).s - action_by_quadrature(symbol, y)))
    step = 1e-5
    err_fd = max(abs(action(symbol, y).ds - (action(symbol, y + step).s - action(symbol, y - step).s) / (2 * step)) for y in ys)
    ok = err_quad <= 1e-9 and err_fd <= 1e-6
    values = {"S_mean": s_mean, "max_quadrature_error": err_quad, "max_fd_error": err_fd}
    detail = f"S(<Im g>) = {s_mean:.15g}; |S - Simpson| <= {err_quad:.2e}; |dS - FD| <= {err_fd:.2e}"
    if symbol == exp_minus_ix():
        values["S0_minus_2"] = s_mean - 2.0
        ok = ok and abs(s_mean - 2.0) <= 1e-12
        detail += f"; |S(0) - 2| = {abs(s_mean - 2.0):.1e}"
    return CheckResult(2, "action oracle", ok, detail, values)


def resolvent_grid(symbol: FourierSymbol, params: ModelParams, N: int, H=None) -> list[PseudoPoint]:
    """20 x 10 grid: five rows on each side of the line, Re z within +-0.5 of <Re g>."""
    half = 0.5 * (symbol.im_max - symbol.im_min)
    mean = symbol.mean_im
    re0 = symbol.mean.real
    nx, ny = GRID_SHAPE
    rows = ny // 2
    pts = []
    for sign in (-1, 1):
        lo, hi = sorted(mean + sign * half * f for f in GRID_IM)
        pts += pseudospectrum_grid(symbol, params, N, (re0 + GRID_RE[0], re0 + GRID_RE[1]), (lo, hi), nx, rows, H=H)
    return pts


def _grid_valid(symbol, p: PseudoPoint) -> bool:
    z = complex(p.re, p.im)
    return p.flag == "ok" and boundary_distance(symbol, z) >= 0.3 and abs(p.im - symbol.mean_im) >= 0.1


def check_resolvent_law(symbol: FourierSymbol, params: ModelParams, points: list[PseudoPoint]) -> CheckResult:
    valid = [p for p in points if _grid_valid(symbol, p)]
    if len(valid) < 3:
        return CheckResult(3, "resolvent law", False, f"only {len(valid)} valid grid points")
    dev = max(abs(p.log_sigma_min - p.log_t0_pred) for p in valid)
    x = np.array([-action(symbol, p.im).s / params.h for p in valid])
    y = np.array([p.log_sigma_min for p in valid])
    slope = float(np.polyfit(x, y, 1)[0])
    ok = dev <= 0.5 and abs(slope - 1.0) <= 0.05
    return CheckResult(
        3,
        "resolvent law",
        ok,
        f"{len(valid)}/{len(points)} points valid; max |log sigma_min - log t0| = {dev:.3f} (<= 0.5); slope = {slope:.4f} (1 +- 0.05)",
        {"valid_points": len(valid), "max_log_deviation": dev, "slope": slope},
    )


def check_gap(symbol: FourierSymbol, params: ModelParams, points: list[PseudoPoint]) -> CheckResult:
    valid = [p for p in points if _grid_valid(symbol, p)]
    ratios = [p.gap / (params.h * math.sqrt(boundary_distance(symbol, complex(p.re, p.im))) / 10.0) for p in valid]
    worst = min(ratios) if ratios else math.nan
    ok = bool(ratios) and worst >= 1.0
    return CheckResult(
        4,
        "singular value gap",
        ok,
        f"min (t1^2 - t0^2) / (h sqrt(d) / 10) = {worst:.3f} over {len(ratios)} points (>= 1)",
        {"min_ratio": worst},
    )


def check_tunneling(symbol: FourierSymbol, params: ModelParams, N: int, H=None) -> CheckResult:
    half = 0.5 * (symbol.im_max - symbol.im_min)
    rows = []
    worst = 0.0
    for off in TUNNEL_OFFSETS:
        z = complex(symbol.mean.real, symbol.mean_im + off * half)
        meas = tunneling_measurement(symbol, params, N, z, H=H)
        pred = tunneling_overlap_prediction(symbol, params, z)
        diff = abs(meas.log_overlap - pred)
        worst = max(worst, diff)
        rows.append({"im": z.imag, "measured": meas.log_overlap, "predicted": pred})
    return CheckResult(
        5,
        "tunneling overlap",
        worst <= 0.5,
        f"max |log overlap - prediction| = {worst:.4f} over Im z offsets {TUNNEL_OFFSETS} (<= 0.5)",
        {"points": rows, "max_deviation": worst},
    )


@dataclass(frozen=True)
class ZoneGeometry:
    re: float
    gamma_minus: float
    gamma_plus: float
    y_minus: float
    y_plus: float
    scale: float  # h / epsilon0^(1/3)
    weyl_margin: float
    omega_margin: float

    @property
    def log_ratio(self) -> float:
        return math.log(1.0 / self.scale) if self.scale else math.nan


def zone_geometry(symbol: FourierSymbol, params: ModelParams, re: float) -> ZoneGeometry:
    scale = edge_scale(params)
    log_ratio = math.log(params.epsilon0 ** (1.0 / 3.0) / params.h)
    y_minus, y_plus = y_levels(symbol, params)
    return ZoneGeometry(
        re=re,
        gamma_minus=gamma_im(symbol, params, re, -1),
        gamma_plus=gamma_im(symbol, params, re, +1),
        y_minus=y_minus,
        y_plus=y_plus,
        scale=scale,
        weyl_margin=WEYL_ALPHA * scale * log_ratio,
        omega_margin=scale * math.log(ZONE_BETA * log_ratio),
    )


def check_weyl_zone(result: EnsembleResult, params: ModelParams, geo: ZoneGeometry) -> CheckResult:
    box = result.config.box
    im0 = geo.y_minus + geo.weyl_margin
    im1 = geo.y_plus - geo.weyl_margin
    values = {"im0": im0, "im1": im1, "margin": geo.weyl_margin}
    if not im0 < im1:
        return CheckResult(
            6,
            "Weyl zone count",
            False,
            f"interior box is empty: margin {geo.weyl_margin:.4f} exceeds the half-width of "
            f"[y_-, y_+] = [{geo.y_minus:.4f}, {geo.y_plus:.4f}]",
            values,
        )
    inner = Box(box.re0, box.re1, im0, im1)
    mean, err = count_in_box(result, inner)
    expect = weyl_count(result.config.symbol, params, inner)
    tol = max(3 * err, 0.1 * expect)
    values.update(mean=mean, stderr=err, weyl=expect)
    return CheckResult(
        6,
        "Weyl zone count",
        abs(mean - expect) <= tol,
        f"mean {mean:.3f} +- {err:.3f} vs Weyl {expect:.3f} in Im [{im0:.4f}, {im1:.4f}] (tol {tol:.3f})",
        values,
    )


def omega1_box(symbol: FourierSymbol, box: Box, geo: ZoneGeometry) -> Box:
    return Box(
        box.re0,
        box.re1,
        max(symbol.im_min, geo.gamma_minus - geo.omega_margin),
        min(symbol.im_max, geo.gamma_plus + geo.omega_margin),
    )


def check_total_accumulation(result: EnsembleResult, params: ModelParams, geo: ZoneGeometry) -> CheckResult:
    sym = result.config.symbol
    box = result.config.box
    omega = omega1_box(sym, box, geo)
    mean, err = count_in_box(result, omega)
    full = weyl_count(sym, params, Box(box.re0, box.re1, sym.im_min, sym.im_max))
    tol = max(3 * err, 0.1 * full)
    return CheckResult(
        7,
        "total accumulation",
        abs(mean - full) <= tol,
        f"mean {mean:.3f} +- {err:.3f} in Im [{omega.im0:.4f}, {omega.im1:.4f}] vs full-strip Weyl {full:.3f} (tol {tol:.3f})",
        {"mean": mean, "stderr": err, "weyl_full": full},
    )


def check_void_zone(result: EnsembleResult, geo: ZoneGeometry) -> CheckResult:
    box = result.config.box
    lo = geo.gamma_minus - geo.omega_margin - VOID_EPS
    hi = geo.gamma_plus + geo.omega_margin + VOID_EPS
    inside_window = 0
    anywhere = 0
    max_abs = 0.0
    for ev in result.eigenvalues():
        out = (ev.imag < lo) | (ev.imag > hi)
        win = (ev.real > box.re0) & (ev.real < box.re1)
        inside_window += int(np.count_nonzero(out & win))
        anywhere += int(np.count_nonzero(out))
        if np.any(win):
            max_abs = max(max_abs, float(np.abs(ev.imag[win]).max()))
    return CheckResult(
        8,
        "void zone",
        inside_window == 0,
        f"{inside_window} eigenvalues with Re in the window and Im outside [{lo:.4f}, {hi:.4f}] "
        f"(outside the window: {anywhere - inside_window}); max |Im| in window {max_abs:.4f}",
        {"count": inside_window, "count_all_re": anywhere, "lo": lo, "hi": hi},
    )


def curve_rows(symbol: FourierSymbol, params: ModelParams, box: Box):
    """Rows ``(re, gamma_-, gamma_+, Gamma_-, Gamma_+, y_-, y_+)`` across the Re window."""
    y_minus, y_plus = y_levels(symbol, params)
    rows = []
    for re in np.linspace(box.re0, box.re1, CURVE_ABSCISSAE):
        re = float(re)
        rows.append((
            re,
            gamma_im(symbol, params, re, -1),
            gamma_im(symbol, params, re, +1),
            Gamma_im(symbol, params, re, -1),
            Gamma_im(symbol, params, re, +1),
            y_minus,
            y_plus,
        ))
    return rows


def check_curves(params: ModelParams, geo: ZoneGeometry, Gamma: tuple[float, float], profile_rows) -> CheckResult:
    scale = geo.scale
    d_level = max(abs(geo.gamma_minus - geo.y_minus), abs(geo.gamma_plus - geo.y_plus))
    d_gamma = max(abs(Gamma[0] - geo.gamma_minus), abs(Gamma[1] - geo.gamma_plus))
    centers = np.array([r[0] for r in profile_rows])
    emp = np.array([r[1] for r in profile_rows])
    line = 0.5 * (geo.y_minus + geo.y_plus)  # the levels are symmetric about <Im g> only for even S; any split works
    peaks = []
    for side, G in ((-1, Gamma[0]), (+1, Gamma[1])):
        mask = centers < line if side < 0 else centers > line
        idx = np.flatnonzero(mask)
        k = idx[int(np.argmax(emp[idx]))]
        peaks.append((float(centers[k]), abs(float(centers[k]) - G)))
    d_peak = max(p[1] for p in peaks)
    parts = [
        (d_level <= 5 * scale, f"|gamma - y_level| = {d_level:.2e} (<= {5 * scale:.2e})"),
        (d_gamma <= params.h**3, f"|Gamma - gamma| = {d_gamma:.2e} (<= h^3 = {params.h**3:.2e})"),
        (d_peak <= 2 * scale, f"|peak bin - Gamma| = {d_peak:.2e} (<= {2 * scale:.2e})"),
    ]
    return CheckResult(
        9,
        "accumulation curves",
        all(ok for ok, _ in parts),
        "; ".join(("" if ok else "FAILED ") + txt for ok, txt in parts),
        {
            "gamma_minus_y_level": d_level,
            "Gamma_minus_gamma": d_gamma,
            "peak_minus_Gamma": d_peak,
            "peaks": [p[0] for p in peaks],
            "Gamma": list(Gamma),
        },
    )


def check_density_shape(Gamma: tuple[float, float], profile_rows) -> CheckResult:
    rows = [r for r in profile_rows if Gamma[0] <= r[0] <= Gamma[1]]
    if not rows:
        return CheckResult(10, "density shape", False, "no bins between the Gamma curves")
    top = max(r[6] for r in rows)
    chosen = [r for r in rows if r[6] >= 0.5 * top]
    worst = 0.0
    bad = []
    for r in chosen:
        emp, err, th = r[1], r[2], r[6]
        tol = max(3 * err, 0.15 * th)
        worst = max(worst, abs(emp - th) / tol)
        if abs(emp - th) > tol:
            bad.append(r[0])
    return CheckResult(
        10,
        "density shape",
        not bad,
        f"{len(chosen)} bins with theory >= 0.5 max between Gamma curves; worst |emp - theory| / tol = {worst:.3f}"
        + (f"; failing bins at Im {bad}" if bad else ""),
        {"bins": [r[0] for r in chosen], "worst_ratio": worst},
    )


def check_determinism(config: ExperimentConfig, result: EnsembleResult, workers: int = 2) -> CheckResult:
    """Recompute the first and last trial in a fresh pool and compare bitwise."""
    from concurrent.futures import ProcessPoolExecutor

    from .ensemble import _init_worker, _worker_trial

    picks = sorted({0, config.trials - 1})
    with ProcessPoolExecutor(max_workers=min(workers, len(picks)), initializer=_init_worker, initargs=(config,)) as pool:
        again = list(pool.map(_worker_trial, picks))
    stored = result.eigenvalues()
    same = all(np.array_equal(stored[t], ev) for t, (ev, _) in zip(picks, again))
    return CheckResult(
        11,
        "determinism",
        same,
        f"trials {picks} recomputed with {workers} workers {'match' if same else 'DIFFER from'} the stored run bitwise",
        {"trials": picks},
    )


def check_eigensolver_oracles(seed: int = 12345) -> CheckResult:
    rng = np.random.default_rng(seed)
    trace_err = 0.0
    det_err = 0.0
    for dim in (8, 16, 32, 64):
        A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        lam = eigenvalues(A)
        norm = np.linalg.norm(A, 2)
        trace_err = max(trace_err, abs(lam.sum() - np.trace(A)) / (dim * norm))
        det_err = max(det_err, abs(float(np.sum(np.log(np.abs(lam)))) - lu_log_abs_det(A)))
    roots = eigenvalues(companion([-1.0, 0.0, 0.0]))
    cube = np.exp(2j * np.pi * np.arange(3) / 3)
    root_err = match_multisets(roots, cube)
    ok = trace_err <= 1e-9 and det_err <= 1e-6 and root_err <= 1e-12
    return CheckResult(
        12,
        "eigensolver oracles",
        ok,
        f"trace err {trace_err:.1e} (<= 1e-9 dim ||A||); log|det| err {det_err:.1e} (<= 1e-6); cube roots err {root_err:.1e} (<= 1e-12)",
        {"trace": trace_err, "logdet": det_err, "roots": root_err},
    )


# --- the full suite -------------------------------------------------------


@dataclass
class VerifyRun:
    config: ExperimentConfig
    results: list[CheckResult]
    ensemble: EnsembleResult
    profile_rows: list[tuple]
    pseudo_points: list[PseudoPoint]
    curves: list[tuple]
    wall_time: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def profile_rows(result: EnsembleResult, params: ModelParams) -> list[tuple]:
    cfg = result.config
    sym = cfg.symbol
    box = cfg.box
    prof = im_profile(result, (box.re0, box.re1), cfg.bins, (sym.im_min, sym.im_max))
    theo = theory_profile(sym, params, prof.edges, re0=box.re0)
    area = np.diff(prof.edges) * box.width
    cum_emp = np.cumsum(prof.density * area)
    cum_theory = np.cumsum(theo.density * area)
    cum_weyl = theo.weyl_cumulative * box.width
    return [
        (
            float(prof.centers[i]),
            float(prof.density[i]),
            float(prof.stderr[i]),
            float(theo.psi1[i]),
            float(theo.log_psi2[i]),
            float(theo.log_theta[i]),
            float(theo.density[i]),
            float(cum_emp[i]),
            float(cum_theory[i]),
            float(cum_weyl[i]),
        )
        for i in range(len(prof.centers))
    ]


def run_verify(config: ExperimentConfig, workers: int | None = None) -> VerifyRun:
    """Run all twelve acceptance checks on ``config``."""
    t_start = time.perf_counter()
    sym = config.symbol
    params = config.params
    results: list[CheckResult] = []

    log.info("eigensolver and action oracles")
    results.append(check_eigensolver_oracles())
    results.append(check_action_oracle(sym))
    log.info("unperturbed spectrum at N = %d", config.N)
    results.append(check_exact_spectrum(config))

    H = assemble_operator(sym, config.h, config.N)
    log.info("pseudospectrum grid")
    points = resolvent_grid(sym, params, config.N, H=H)
    results.append(check_resolvent_law(sym, params, points))
    results.append(check_gap(sym, params, points))
    results.append(check_tunneling(sym, params, config.N, H=H))

    log.info("theory curves")
    re_mid = 0.5 * (config.box.re0 + config.box.re1)
    geo = zone_geometry(sym, params, re_mid)
    Gamma = (Gamma_im(sym, params, re_mid, -1), Gamma_im(sym, params, re_mid, +1))
    curves = curve_rows(sym, params, config.box)

    log.info("spectrum ensemble: %d trials of dimension %d", config.trials, config.dim)
    ens = run_spectrum_ensemble(config, workers=workers, retain=True)
    rows = profile_rows(ens, params)
    results.append(check_weyl_zone(ens, params, geo))
    results.append(check_total_accumulation(ens, params, geo))
    results.append(check_void_zone(ens, geo))
    results.append(check_curves(params, geo, Gamma, rows))
    results.append(check_density_shape(Gamma, rows))
    log.info("determinism spot check")
    results.append(check_determinism(config, ens))

    results.sort(key=lambda r: r.number)
    return VerifyRun(
        config=config,
        results=results,
        ensemble=ens,
        profile_rows=rows,
        pseudo_points=points,
        curves=curves,
        wall_time=time.perf_counter() - t_start,
    )
