"""MRC/EGC-Crossover bei verrauschter Kanalschätzung: geschlossene Formen und Monte Carlo.

Modell: r_i = a_i s + n_i, n_i ~ N(0, σ²), Schätzung â_i = a_i + ε_i, ε_i ~ N(0, σ_w²).
Mit S_k = Σ a_i^k gilt γ_MRC = S₂/σ², γ_EGC = S₁²/(dσ²).
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..exceptions import ConfigValidationError
from .theory_models import AmplitudeProfile, CriticalCsiVariance, CrossoverSimulation

logger = logging.getLogger(__name__)

MIN_TRIALS = 10_000
BLOCK_SIZE = 16
N_BATCHES = 20


def snr_mrc(profile: AmplitudeProfile) -> float:
    return profile.s2 / profile.sigma ** 2


def snr_egc(profile: AmplitudeProfile) -> float:
    return profile.s1 ** 2 / (profile.d * profile.sigma ** 2)


def snr_mrc_noisy_csi(profile: AmplitudeProfile, sigma_w2: Optional[float] = None) -> float:
    """Näherung erster Ordnung S₂(S₂ + σ_w²) / ((S₂ + dσ_w²)σ²).

    Ohne ``sigma_w2`` wird σ_w² des Profils verwendet.
    """
    w2 = profile.sigma_w ** 2 if sigma_w2 is None else sigma_w2
    if w2 < 0:
        raise ConfigValidationError(f"σ_w² muss >= 0 sein, war {w2}")
    s2 = profile.s2
    return s2 * (s2 + w2) / ((s2 + profile.d * w2) * profile.sigma ** 2)


def critical_csi_variance(profile: AmplitudeProfile) -> CriticalCsiVariance:
    """σ_w*² = S₂(dS₂ − S₁²) / (d(S₁² − S₂)); 0 mit Flag bei gleichen Amplituden."""
    d, s1, s2 = profile.d, profile.s1, profile.s2
    spread = d * s2 - s1 ** 2
    if spread <= 1e-12 * s1 ** 2:
        logger.debug("Gleiche Amplituden: kritische CSI-Varianz degeneriert zu 0")
        return CriticalCsiVariance(value=0.0, degenerate=True)
    return CriticalCsiVariance(value=s2 * spread / (d * (s1 ** 2 - s2)))


def _output_snr(y: np.ndarray) -> float:
    """Quadriertes Mittel über Varianz, blockweise bei festen Gewichten je Block.

    ``y`` hat Form (Blöcke, Symbole); der Bias des Blockmittels wird abgezogen.
    """
    m = y.mean(axis=1)
    v = y.var(axis=1, ddof=1)
    signal = float(np.mean(m ** 2 - v / y.shape[1]))
    noise = float(np.mean(v))
    return signal / noise


def _batch_se(y: np.ndarray) -> float:
    batches = np.array_split(y, N_BATCHES, axis=0)
    values = [_output_snr(b) for b in batches if b.shape[0] > 1]
    return float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0


def monte_carlo_crossover(
    profile: AmplitudeProfile, n_trials: int = 100_000, seed: int = 0
) -> CrossoverSimulation:
    """Simuliert den binären Kombinierer (s = +1) mit Gewichten â_i bzw. 1.

    Die CSI-Schätzung wird je Block von BLOCK_SIZE Symbolen gezogen, damit
    Gewichtsjitter nicht als Kanalrauschen zählt. Standardfehler per Batch-Means.
    """
    if n_trials < MIN_TRIALS:
        raise ConfigValidationError(f"Monte Carlo braucht mindestens {MIN_TRIALS} Versuche")
    rng = np.random.default_rng(seed)
    a = np.asarray(profile.amplitudes, dtype=float)
    n_blocks = math.ceil(n_trials / BLOCK_SIZE)

    r = a + rng.normal(0.0, profile.sigma, size=(n_blocks, BLOCK_SIZE, profile.d))
    weights = a + rng.normal(0.0, profile.sigma_w, size=(n_blocks, 1, profile.d))
    y_mrc = (r * weights).sum(axis=2)
    y_egc = r.sum(axis=2)

    result = CrossoverSimulation(
        mrc_snr=_output_snr(y_mrc),
        egc_snr=_output_snr(y_egc),
        mrc_se=_batch_se(y_mrc),
        egc_se=_batch_se(y_egc),
        n_trials=n_blocks * BLOCK_SIZE,
    )
    logger.debug(
        f"MC σ_w²={profile.sigma_w ** 2:.4f}: MRC {result.mrc_snr:.4f}±{result.mrc_se:.4f}, "
        f"EGC {result.egc_snr:.4f}±{result.egc_se:.4f}"
    )
    return result


def crossover_sweep(
    profile: AmplitudeProfile,
    sigma_w2_grid: Sequence[float],
    n_trials: int = 100_000,
    seed: int = 0,
) -> pd.DataFrame:
    """Analytische und empirische SNRs über ein σ_w²-Gitter."""
    if not sigma_w2_grid:
        raise ConfigValidationError("σ_w²-Gitter darf nicht leer sein")
    seeds = np.random.SeedSequence(seed).spawn(len(sigma_w2_grid))
    egc = snr_egc(profile)
    rows = []
    for w2, child in zip(sigma_w2_grid, seeds):
        noisy = profile.with_csi_variance(w2)
        sim = monte_carlo_crossover(noisy, n_trials, int(child.generate_state(1)[0]))
        rows.append(
            {
                "sigma_w2": float(w2),
                "analytic_mrc": snr_mrc_noisy_csi(noisy),
                "analytic_egc": egc,
                "empirical_mrc": sim.mrc_snr,
                "empirical_egc": sim.egc_snr,
                "mrc_se": sim.mrc_se,
                "egc_se": sim.egc_se,
            }
        )
    frame = pd.DataFrame(rows)
    critical = critical_csi_variance(profile)
    logger.info(
        f"Crossover-Sweep über {len(rows)} Punkte, σ_w*² = {critical.value:.6f}"
        + (" (degeneriert)" if critical.degenerate else "")
    )
    return frame


__all__ = [
    "critical_csi_variance",
    "crossover_sweep",
    "monte_carlo_crossover",
    "snr_egc",
    "snr_mrc",
    "snr_mrc_noisy_csi",
]
