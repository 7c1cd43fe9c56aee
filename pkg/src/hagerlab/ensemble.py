"""Monte-Carlo spectra of ``H + delta R`` and their statistics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ExperimentConfig
from .errors import EigenvaluesNotRetained, NoConvergence, OnSpectrum, OutOfStrip
from .matrix import NOISE_FLOOR, assemble_operator, eigenvalues, operator_norm, sample_gaussian, smallest_singular_triplets
from .symbol import FourierSymbol, action, boundary_distance
from .theory import Box, ModelParams, log_t0

THREADS_ENV = "HAGERLAB_THREADS"
UNDERFLOW_ACTION = 30.0


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial; ``SeedSequence`` hashes ``(seed, trial)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def default_workers() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def _solve_trial(config: ExperimentConfig, trial: int, H: np.ndarray) -> tuple[np.ndarray, float]:
    with threadpool_limits(limits=1):
        if config.delta == 0:
            A, hs = H.copy(), 0.0
        else:
            R = sample_gaussian(config.dim, trial_rng(config.seed, trial), config.gaussian_scale)
            hs = float(np.linalg.norm(R))
            A = H + config.delta * R
        try:
            return eigenvalues(A), hs
        except NoConvergence as exc:
            raise NoConvergence(f"trial {trial}: {exc}", trial=trial) from exc


def run_trial(config: ExperimentConfig, trial: int, H: np.ndarray | None = None) -> np.ndarray:
    """Eigenvalues of ``H + delta R_trial``; BLAS pinned to one thread for bitwise reproducibility."""
    if H is None:
        H = assemble_operator(config.symbol, config.h, config.N)
    return _solve_trial(config, trial, H)[0]


_worker_H: np.ndarray | None = None
_worker_cfg: ExperimentConfig | None = None


def _init_worker(config: ExperimentConfig) -> None:
    global _worker_H, _worker_cfg
    _worker_cfg = config
    _worker_H = assemble_operator(config.symbol, config.h, config.N)


def _worker_trial(trial: int) -> tuple[np.ndarray, float]:
    return _solve_trial(_worker_cfg, trial, _worker_H)


def _inside(ev: np.ndarray, box: Box) -> np.ndarray:
    return (ev.real > box.re0) & (ev.real < box.re1) & (ev.imag > box.im0) & (ev.imag < box.im1)


@dataclass
class EnsembleResult:
    config: ExperimentConfig
    box_counts: np.ndarray
    im_edges: np.ndarray
    im_counts: np.ndarray  # trials x bins, eigenvalues per Im bin inside the config box
    spectra: list[np.ndarray] | None = None
    hs_norm_exceedances: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return len(self.box_counts)

    def eigenvalues(self) -> list[np.ndarray]:
        if self.spectra is None:
            raise EigenvaluesNotRetained("run with retain=True to keep per-trial spectra")
        return self.spectra

    @property
    def im_histogram(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(edges, mean density, standard error)`` of the streamed Im-histogram."""
        area = np.diff(self.im_edges) * self.config.box.width
        mean, err = _mean_stderr(self.im_counts)
        return self.im_edges, mean / area, err / area


def _mean_stderr(counts: np.ndarray):
    counts = np.asarray(counts, dtype=float)
    n = counts.shape[0]
    mean = counts.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, counts.std(axis=0, ddof=1) / math.sqrt(n)


def run_spectrum_ensemble(
    config: ExperimentConfig,
    workers: int | None = None,
    retain: bool = True,
) -> EnsembleResult:
    """Spectra of ``config.trials`` independent perturbations.

    Each trial draws from its own substream, so the output is identical for any
    ``workers``; results are reduced in trial order.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, config.trials)
    box = config.box
    edges = np.linspace(box.im0, box.im1, config.bins + 1)
    box_counts = np.zeros(config.trials, dtype=np.int64)
    im_counts = np.zeros((config.trials, config.bins), dtype=np.int64)
    spectra: list[np.ndarray] | None = [] if retain else None
    hs_norms = np.zeros(config.trials)

    def consume(t: int, item: tuple[np.ndarray, float]) -> None:
        ev, hs_norms[t] = item
        mask = _inside(ev, box)
        box_counts[t] = int(mask.sum())
        im_counts[t] = np.histogram(ev.imag[mask], bins=edges)[0]
        if spectra is not None:
            spectra.append(ev)

    if workers == 1:
        H = assemble_operator(config.symbol, config.h, config.N)
        for t in range(config.trials):
            consume(t, _solve_trial(config, t, H))
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(config,)) as pool:
            for t, item in enumerate(pool.map(_worker_trial, range(config.trials))):
                consume(t, item)
    # ||R||_HS concentrates at dim; count the rare samples far above it
    hs_limit = config.dim * math.sqrt(math.log(config.dim)) if config.dim > 2 else math.inf
    exceed = int(np.count_nonzero(hs_norms > hs_limit))
    return EnsembleResult(
        config=config,
        box_counts=box_counts,
        im_edges=edges,
        im_counts=im_counts,
        spectra=spectra,
        hs_norm_exceedances=exceed,
        meta={"workers": workers, "max_hs_ratio": float(hs_norms.max() / config.dim)},
    )


def count_in_box(result: EnsembleResult, box: Box) -> tuple[float, float]:
    """Mean and standard error of the per-trial number of eigenvalues strictly inside ``box``."""
    counts = np.array([int(_inside(ev, box).sum()) for ev in result.eigenvalues()])
    mean, err = _mean_stderr(counts[:, None])
    return float(mean[0]), float(err[0])


class ImProfile(NamedTuple):
    edges: np.ndarray
    centers: np.ndarray
    density: np.ndarray  # mean count / (bin height x window width)
    stderr: np.ndarray
    cumulative: np.ndarray  # mean number of eigenvalues below each bin's upper edge


def im_profile(
    result: EnsembleResult,
    re_window: tuple[float, float],
    bins: int,
    im_range: tuple[float, float] | None = None,
) -> ImProfile:
    """Histogram of Im z over eigenvalues with ``re0 < Re z < re1``."""
    re0, re1 = re_window
    if im_range is None:
        sym = result.config.symbol
        im_range = (sym.im_min, sym.im_max)
    edges = np.linspace(im_range[0], im_range[1], bins + 1)
    counts = np.empty((result.trials, bins))
    for t, ev in enumerate(result.eigenvalues()):
        sel = ev.imag[(ev.real > re0) & (ev.real < re1)]
        counts[t] = np.histogram(sel, bins=edges)[0]
    mean, err = _mean_stderr(counts)
    area = np.diff(edges) * (re1 - re0)
    return ImProfile(
        edges=edges,
        centers=0.5 * (edges[:-1] + edges[1:]),
        density=mean / area,
        stderr=err / area,
        cumulative=np.cumsum(mean),
    )


class PseudoPoint(NamedTuple):
    re: float
    im: float
    log_sigma_min: float
    log_t0_pred: float
    flag: str  # "ok" | "underflow_zone" | "noise_floor" | "on_spectrum"
    gap: float = math.nan  # sigma_1^2 - sigma_0^2


def pseudospectrum_grid(
    symbol: FourierSymbol,
    params: ModelParams,
    N: int,
    re_range: tuple[float, float],
    im_range: tuple[float, float],
    nx: int,
    ny: int,
    H: np.ndarray | None = None,
) -> list[PseudoPoint]:
    """``ln sigma_min(H - z)`` next to the predicted ``ln t0(z)`` on an ``nx x ny`` grid.

    Points with ``S/h > 30`` or where ``e^{-S/h}`` drops below the double
    precision floor ``1e-13 ||H||`` are flagged and excluded from comparisons.
    """
    if H is None:
        H = assemble_operator(symbol, params.h, N)
    norm = operator_norm(H) if H.shape[0] <= 2049 else float(np.linalg.norm(H, "fro"))
    log_floor = math.log(10 * NOISE_FLOOR * norm)
    out = []
    for im in np.linspace(im_range[0], im_range[1], ny):
        im = float(im)
        if not symbol.im_min < im < symbol.im_max:
            raise OutOfStrip(f"grid row Im z = {im!r} outside the strip")
        s_over_h = action(symbol, im).s / params.h
        for re in np.linspace(re_range[0], re_range[1], nx):
            z = complex(float(re), im)
            trip, second = smallest_singular_triplets(H, z, 2)
            gap = second.sigma**2 - trip.sigma**2
            log_sigma = math.log(trip.sigma) if trip.sigma > 0 else -math.inf
            try:
                pred = log_t0(symbol, params, z)
            except OnSpectrum:
                out.append(PseudoPoint(z.real, im, log_sigma, -math.inf, "on_spectrum", gap))
                continue
            if s_over_h > UNDERFLOW_ACTION:
                flag = "underflow_zone"
            elif -s_over_h < log_floor or trip.at_noise_floor:
                flag = "noise_floor"
            else:
                flag = "ok"
            out.append(PseudoPoint(z.real, im, log_sigma, pred, flag, gap))
    return out


class TunnelingSample(NamedTuple):
    log_overlap: float
    gap: float
    sigma0: float
    sigma1: float


def tunneling_measurement(
    symbol: FourierSymbol,
    params: ModelParams,
    N: int,
    z: complex,
    H: np.ndarray | None = None,
) -> TunnelingSample:
    """Discrete ``ln|(e0|f0)|`` and ``t1^2 - t0^2`` from the two smallest singular triplets of ``H - z``."""
    z = complex(z)
    if boundary_distance(symbol, z) <= 0:
        raise OutOfStrip(f"z = {z!r} outside the strip")
    if action(symbol, z.imag).s / params.h > UNDERFLOW_ACTION:
        raise OutOfStrip(f"S(z)/h exceeds {UNDERFLOW_ACTION} at z = {z!r}")
    if H is None:
        H = assemble_operator(symbol, params.h, N)
    t0, t1 = smallest_singular_triplets(H, z, 2)
    overlap = abs(np.vdot(t0.left, t0.right))
    return TunnelingSample(
        log_overlap=math.log(overlap) if overlap > 0 else -math.inf,
        gap=t1.sigma**2 - t0.sigma**2,
        sigma0=t0.sigma,
        sigma1=t1.sigma,
    )
