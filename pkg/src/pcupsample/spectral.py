"""Frequency-selective surface model over scattered block samples.

The height ``q`` of a block is approximated as a sparse sum of separable
cosines ``cos(pi*k*o) * cos(pi*l*p)`` on the normalized ``[0, 1]^2`` domain.
Terms are chosen greedily: each iteration adds the dictionary entry whose
one-dimensional weighted least-squares fit removes the most (spectrally
weighted) residual energy, with a damped coefficient.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .partition import LocalSamples

log = logging.getLogger(__name__)

# dictionary entries whose weighted norm falls below this are never selected
NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    kmax: int = 8
    max_iter: int = 100
    gamma: float = 0.5
    rho: float = 0.7
    rho_f: float = 0.9
    stop_eps: float = 1e-10

    def __post_init__(self):
        if self.kmax < 1:
            raise ValueError("kmax must be >= 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not 0.0 < self.rho_f <= 1.0:
            raise ValueError("rho_f must lie in (0, 1]")
        if self.stop_eps < 0:
            raise ValueError("stop_eps must be >= 0")

    def effective_kmax(self, n_samples: int) -> int:
        return min(self.kmax, int(np.floor(np.sqrt(n_samples))))


@dataclass
class SurfaceModel:
    """Ordered ``(k, l, coefficient)`` terms plus fit diagnostics.

    The same frequency pair may appear several times; evaluation sums all
    terms. ``energies[i]`` is the weighted residual energy after ``i`` terms.
    """

    terms: List[Tuple[int, int, float]] = field(default_factory=list)
    kmax: int = 0
    energies: List[float] = field(default_factory=list)
    status: str = "ok"

    @property
    def iterations(self) -> int:
        return len(self.terms)

    def __add__(self, other: "SurfaceModel") -> "SurfaceModel":
        return SurfaceModel(self.terms + other.terms, max(self.kmax, other.kmax))

    def prefix(self, n: int) -> "SurfaceModel":
        return SurfaceModel(self.terms[:n], self.kmax)


def basis_eval(k, l, o, p):
    return np.cos(np.pi * k * np.asarray(o, dtype=np.float64)) * np.cos(
        np.pi * l * np.asarray(p, dtype=np.float64)
    )


def spatial_weight(o, p, rho: float):
    """Radial window ``rho ** distance`` from the block center ``(0.5, 0.5)``."""
    o = np.asarray(o, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    return rho ** np.sqrt((o - 0.5) ** 2 + (p - 0.5) ** 2)


def spectral_weight(k, l, rho_f: float):
    return rho_f ** np.sqrt(np.asarray(k, dtype=np.float64) ** 2 + np.asarray(l, dtype=np.float64) ** 2)


def dictionary(kmax: int) -> np.ndarray:
    """All ``(k, l)`` with ``k, l < kmax``, ordered by ``k^2 + l^2`` then ``k``.

    The ordering makes a first-occurrence argmax apply the tie-break
    (smoother entry wins).
    """
    kl = [(k, l) for k in range(kmax) for l in range(kmax)]
    kl.sort(key=lambda t: (t[0] ** 2 + t[1] ** 2, t[0]))
    return np.array(kl, dtype=np.int64).reshape(-1, 2)


def design_matrix(kl: np.ndarray, o, p) -> np.ndarray:
    """``(n_samples, n_entries)`` matrix of basis values."""
    o = np.asarray(o, dtype=np.float64)[:, None]
    p = np.asarray(p, dtype=np.float64)[:, None]
    return np.cos(np.pi * kl[:, 0] * o) * np.cos(np.pi * kl[:, 1] * p)


def fit_model(samples: LocalSamples, cfg: ModelConfig = ModelConfig()) -> SurfaceModel:
    n = len(samples)
    if n == 0:
        raise ValueError("cannot fit a model to zero samples")
    kmax = cfg.effective_kmax(n)
    kl = dictionary(kmax)
    phi = design_matrix(kl, samples.o, samples.p)
    w = spatial_weight(samples.o, samples.p, cfg.rho)
    wf = spectral_weight(kl[:, 0], kl[:, 1], cfg.rho_f)

    norm = (w[:, None] * phi * phi).sum(axis=0)
    usable = norm >= NORM_FLOOR
    model = SurfaceModel(kmax=kmax)
    r = np.array(samples.q, dtype=np.float64)
    energy = float(np.sum(w * r * r))
    model.energies.append(energy)
    if not usable.any():
        log.warning("all %d dictionary entries degenerate for %d samples", len(kl), n)
        model.status = "degenerate"
        return model
    safe_norm = np.where(usable, norm, 1.0)
    e0 = energy

    for _ in range(cfg.max_iter):
        proj = phi.T @ (w * r)
        gain = np.where(usable, proj * proj / safe_norm, 0.0)
        score = np.where(usable, gain * wf, -np.inf)
        best = int(np.argmax(score))
        if score[best] <= cfg.stop_eps * e0:
            break
        coef = cfg.gamma * proj[best] / norm[best]
        r = r - coef * phi[:, best]
        model.terms.append((int(kl[best, 0]), int(kl[best, 1]), float(coef)))
        energy = float(np.sum(w * r * r))
        model.energies.append(energy)
    return model


def eval_model(model: SurfaceModel, positions) -> np.ndarray:
    """Sum of all model terms at ``(o_bar, p_bar)`` rows of ``positions``."""
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    out = np.zeros(pos.shape[0])
    if pos.size and (pos.min() < 0.0 or pos.max() > 1.0):
        log.debug("evaluating model outside the [0, 1]^2 domain")
    for k, l, c in model.terms:
        out += c * basis_eval(k, l, pos[:, 0], pos[:, 1])
    return out


def residual_energy(samples: LocalSamples, model: SurfaceModel, rho: float) -> float:
    if len(samples) == 0:
        raise ValueError("no samples")
    w = spatial_weight(samples.o, samples.p, rho)
    r = samples.q - eval_model(model, np.column_stack([samples.o, samples.p]))
    return float(np.sum(w * r * r))

