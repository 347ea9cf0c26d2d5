"""Forced-oscillation source localization from a measurement window.

Pipeline: keep the first ``floor(T0 * fs) + 1`` samples, scale each
measurement type to unit max-abs, split into low-rank plus sparse parts with
robust PCA, and report the channel holding the largest sparse entry.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measurements import Channel, MeasurementMatrix, normalize
from .rpca import RpcaConfig, default_xi, rpca_exact_alm
from .topology import argmax_entry, graph_distance


TIE_RTOL = 1e-9


class NoOscillationError(ValueError):
    pass


class FolocWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LocalizeConfig:
    window_s: float = 10.0
    xi: float | None = None
    rpca: RpcaConfig = field(default_factory=RpcaConfig)
    top_k: int = 5

    def __post_init__(self):
        if not self.window_s > 0:
            raise ValueError(f"window_s must be positive, got {self.window_s}")
        if self.xi is not None and not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be positive, got {self.top_k}")

    def n_columns(self, fs: float) -> int:
        n = int(math.floor(self.window_s * fs + 1e-9)) + 1
        if n < 2:
            raise ValueError(f"window of {self.window_s} s at {fs} Hz holds fewer than 2 samples")
        return n

    def to_dict(self) -> dict:
        r = self.rpca
        return {
            "window_s": self.window_s,
            "xi": "auto" if self.xi is None else self.xi,
            "top_k": self.top_k,
            "tol": r.tol_primal,
            "max_outer_iters": r.max_outer_iters,
            "max_inner_iters": r.max_inner_iters,
            "tol_inner": r.tol_inner,
            "mu0": "auto" if r.mu0 is None else r.mu0,
            "rho": "auto" if r.rho is None else r.rho,
        }


@dataclass(frozen=True)
class RankedChannel:
    row: int
    channel: Channel
    peak: float
    energy: float


@dataclass(frozen=True)
class LocalizationReport:
    source_row: int
    source_col: int
    source_channel: Channel
    ranking: tuple
    xi_used: float
    rpca_diag: dict
    warnings: tuple = ()
    window_columns: int = 0
    scale_factors: dict = field(default_factory=dict)
    tied_channels: tuple = ()
    config: dict = field(default_factory=dict)

    @property
    def source_bus(self) -> int:
        return self.source_channel.bus_id

    @property
    def converged(self) -> bool:
        return bool(self.rpca_diag.get("converged", False))

    def to_dict(self, digits: int = 12) -> dict:
        def num(x):
            return float(f"{float(x):.{digits}g}")

        return {
            "source_bus": self.source_bus,
            "source_type": str(self.source_channel.mtype),
            "source_row": self.source_row,
            "source_col": self.source_col,
            "xi": num(self.xi_used),
            "converged": self.converged,
            "residual": num(self.rpca_diag["residual"]),
            "ranking": [
                {"row": r.row, "bus": r.channel.bus_id, "type": str(r.channel.mtype),
                 "peak": num(r.peak), "energy": num(r.energy)}
                for r in self.ranking
            ],
            "warnings": list(self.warnings),
            "tied_types": [str(ch.mtype) for ch in self.tied_channels],
            "window_columns": self.window_columns,
            "normalization": "max-abs per measurement type",
            "scale_factors": {str(k): num(v) for k, v in self.scale_factors.items()},
            "rpca": {k: (num(v) if isinstance(v, float) else v)
                     for k, v in self.rpca_diag.items()},
            "config": {k: (num(v) if isinstance(v, float) else v)
                       for k, v in self.config.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def locate(Y: MeasurementMatrix, cfg: LocalizeConfig | None = None) -> LocalizationReport:
    """Identify the source channel of a forced oscillation.

    Column 0 of ``Y`` is taken as the oscillation onset. If ``Y`` is shorter
    than the configured window, all available samples are used and a warning
    is recorded.
    """
    cfg = cfg or LocalizeConfig()
    notes = []
    n_cols = cfg.n_columns(Y.sample_rate_hz)
    if Y.n_samples < n_cols:
        notes.append(f"data span {Y.duration_s:.6g} s is shorter than window {cfg.window_s:g} s; "
                     "using all available samples")
    window = Y.head(n_cols)
    if not np.any(window.data):
        raise NoOscillationError("no oscillation present: window is identically zero")
    Yn = normalize(window)
    notes.extend(Yn.warnings)

    xi = cfg.xi if cfg.xi is not None else default_xi(*Yn.shape)
    rcfg = RpcaConfig(xi=xi, tol_primal=cfg.rpca.tol_primal,
                      max_outer_iters=cfg.rpca.max_outer_iters,
                      max_inner_iters=cfg.rpca.max_inner_iters,
                      mu0=cfg.rpca.mu0, rho=cfg.rpca.rho, tol_inner=cfg.rpca.tol_inner)
    result = rpca_exact_alm(Yn.data, rcfg)
    if not result.converged:
        notes.append(f"RPCA did not converge in {result.outer_iters} outer iterations "
                     f"(residual {result.residual:.3g}); using best iterate")

    absS = np.abs(result.S)
    p, q = argmax_entry(absS)
    peaks = absS.max(axis=1)
    energy = np.sqrt((result.S ** 2).sum(axis=1))
    order = sorted(range(len(peaks)), key=lambda r: (-peaks[r], r))
    ranking = tuple(RankedChannel(r, Yn.channels[r], float(peaks[r]), float(energy[r]))
                    for r in order[:cfg.top_k])
    source = Yn.channels[p]
    tied = tuple(ch for r, ch in enumerate(Yn.channels)
                 if ch.bus_id == source.bus_id and r != p
                 and peaks[r] >= (1 - TIE_RTOL) * peaks[p])

    return LocalizationReport(
        source_row=p, source_col=q, source_channel=source, ranking=ranking,
        xi_used=xi, rpca_diag=result.summary(), warnings=tuple(notes),
        window_columns=window.n_samples, scale_factors=dict(Yn.scale_factors),
        tied_channels=tied, config=cfg.to_dict(),
    )


def add_noise(Y: MeasurementMatrix, snr_db: float, seed=None) -> MeasurementMatrix:
    """Add white Gaussian noise at the given per-channel SNR (dB).

    Channel power is the mean square of the row. A channel with zero power
    borrows the matrix-wide power (with a warning). ``snr_db = inf`` returns
    ``Y`` unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return Y
    power = np.mean(Y.data ** 2, axis=1)
    overall = float(np.mean(Y.data ** 2))
    if overall == 0.0:
        raise ValueError("cannot scale noise for an all-zero matrix")
    if np.any(power == 0):
        silent = [str(Y.channels[i]) for i in np.flatnonzero(power == 0)]
        warnings.warn(f"zero-power channels {silent}; noise scaled from matrix-wide power",
                      FolocWarning, stacklevel=2)
        power = np.where(power == 0, overall, power)
    std = np.sqrt(power / 10 ** (snr_db / 10))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(Y.shape) * std[:, None]
    return Y.with_data(Y.data + noise)


@dataclass(frozen=True)
class CaseVerdict:
    index: int
    true_bus: int
    identified_bus: int
    distance: float
    exact_hit: bool
    vicinity_hit: bool
    converged: bool


@dataclass(frozen=True)
class EvaluationSummary:
    n_cases: int
    n0: int
    exact_accuracy: float
    vicinity_accuracy: float
    verdicts: tuple

    def to_dict(self) -> dict:
        return {
            "n_cases": self.n_cases,
            "n0": self.n0,
            "exact_accuracy": round(self.exact_accuracy, 12),
            "vicinity_accuracy": round(self.vicinity_accuracy, 12),
            "cases": [
                {"index": v.index, "true_bus": v.true_bus, "identified_bus": v.identified_bus,
                 "distance": None if math.isinf(v.distance) else int(v.distance),
                 "exact_hit": v.exact_hit, "vicinity_hit": v.vicinity_hit,
                 "converged": v.converged}
                for v in self.verdicts
            ],
        }


def evaluate(suite: Sequence, cfg: LocalizeConfig | None = None, n0: int = 0) -> EvaluationSummary:
    """Run :func:`locate` on ``(Y, topology, true_source_bus)`` cases.

    A case is an exact hit when the identified bus is the true bus, and a
    vicinity hit when it lies within ``n0`` lines of it.
    """
    cases = list(suite)
    if not cases:
        raise ValueError("empty suite")
    verdicts = []
    for idx, (Y, topo, true_bus) in enumerate(cases):
        rep = locate(Y, cfg)
        found = rep.source_bus
        if topo is not None:
            dist = graph_distance(topo, true_bus, found)
        else:
            dist = 0 if found == true_bus else math.inf
        verdicts.append(CaseVerdict(idx, int(true_bus), found, dist, found == true_bus,
                                    dist <= n0, rep.converged))
    n = len(verdicts)
    return EvaluationSummary(
        n_cases=n, n0=n0,
        exact_accuracy=sum(v.exact_hit for v in verdicts) / n,
        vicinity_accuracy=sum(v.vicinity_hit for v in verdicts) / n,
        verdicts=tuple(verdicts),
    )


def accuracy(reports: Sequence[LocalizationReport], truths: Sequence[int]) -> float:
    hits = sum(r.source_bus == t for r, t in zip(reports, truths))
    return hits / len(truths)
