"""Statistical functionals straight from quadrature records, plus
phase-space functionals of reconstructed states.

Photon moments come from phase-averaged powers of the quadrature: the mean
photon number is ⟨⟨q²⟩⟩ − 1/2, factorial moments follow Richter's
Hermite-polynomial formula, and g² is a ratio of fourth- to second-order
phase-averaged moments.  No state reconstruction is involved; for
η_eff < 1 records the results describe the detected (smoothed) mode and
carry no loss correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_hermite, factorial

from .detection import QuadratureDataset, require_full_coverage
from .errors import NearVacuumError
from .states import DensityMatrix


@dataclass
class MomentReport:
    mean_n: float
    mean_n_stderr: float
    g2: float | None
    g2_stderr: float | None
    factorial_moments: dict
    n_samples: int
    eta_eff: float
    loss_corrected: bool = False

    def to_dict(self) -> dict:
        return {
            "mean_n": self.mean_n,
            "mean_n_stderr": self.mean_n_stderr,
            "g2": self.g2,
            "g2_stderr": self.g2_stderr,
            "factorial_moments": {str(r): list(v) for r, v in self.factorial_moments.items()},
            "n_samples": self.n_samples,
            "eta_eff": self.eta_eff,
            "loss_corrected": self.loss_corrected,
        }


def mean_photon(ds: QuadratureDataset):
    """(⟨n⟩, std err) from ⟨⟨q²⟩⟩ − 1/2.

    The variance of the estimate is taken as ⟨⟨ξ⁴⟩⟩/N (a slightly
    conservative upper estimate).  For η_eff < 1 this is the detected-mode
    mean; no loss correction is applied.
    """
    require_full_coverage(ds, min_harmonic=2)
    q = ds.qs
    value = float(np.mean(q**2) - 0.5)
    stderr = float(np.sqrt(np.mean(q**4) / q.size))
    return value, stderr


def n_min(mean_n: float, mean_n2: float) -> float:
    """Measurements needed for unit signal-to-noise on the mean photon number:
    (3⟨n²⟩ + ⟨n⟩ + 1/2) / (2⟨n⟩²)."""
    if mean_n <= 0:
        raise ValueError("mean_n must be positive")
    return (3.0 * mean_n2 + mean_n + 0.5) / (2.0 * mean_n**2)


def factorial_moment(ds: QuadratureDataset, r: int):
    """Richter's formula: ⟨n^(r)⟩ = (r!)²/(2^r (2r)!) ⟨⟨H_2r(q)⟩⟩."""
    if not 1 <= r <= 4:
        raise ValueError("r must be in 1..4")
    require_full_coverage(ds, min_harmonic=2 * r)
    pref = factorial(r) ** 2 / (2.0**r * factorial(2 * r))
    summand = pref * eval_hermite(2 * r, ds.qs)
    value = float(np.mean(summand))
    stderr = float(np.std(summand) / np.sqrt(summand.size))
    return value, stderr


def _g2_from_means(m2, m4):
    num = (2.0 / 3.0) * m4 - 2.0 * m2 + 0.5
    den = m2**2 - m2 + 0.25
    return num / den


def g2_single(ds: QuadratureDataset):
    """Second-order coherence g²(t,t) from phase-averaged q² and q⁴ moments.

    Standard error by delete-1 jackknife on the moment pair.  Refuses
    near-vacuum records whose ⟨n⟩ is not resolved at 5 standard errors
    (the normalization diverges).
    """
    require_full_coverage(ds, min_harmonic=4)
    q = ds.qs
    n = q.size
    a = q**2
    b = q**4
    mean_n_val = float(a.mean() - 0.5)
    mean_n_err = float(np.sqrt(b.mean() / n))
    if mean_n_val < 5.0 * mean_n_err:
        raise NearVacuumError(
            f"mean photon number {mean_n_val:.4g} ± {mean_n_err:.4g} is consistent "
            "with vacuum; g² is undefined"
        )
    value = float(_g2_from_means(a.mean(), b.mean()))
    sa, sb = a.sum(), b.sum()
    loo = _g2_from_means((sa - a) / (n - 1), (sb - b) / (n - 1))
    stderr = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return value, stderr


def moment_report(ds: QuadratureDataset, factorial_orders=(1, 2)) -> MomentReport:
    mn, mn_se = mean_photon(ds)
    fm = {r: factorial_moment(ds, r) for r in factorial_orders}
    try:
        g2, g2_se = g2_single(ds)
    except NearVacuumError:
        g2, g2_se = None, None
    return MomentReport(mean_n=mn, mean_n_stderr=mn_se, g2=g2, g2_stderr=g2_se,
                        factorial_moments=fm, n_samples=len(ds),
                        eta_eff=ds.meta.detector.eta_eff)


@dataclass
class PhaseDistribution:
    """Truncated London / Pegg-Barnett phase distribution on [−π, π)."""

    phi_axis: np.ndarray
    values: np.ndarray
    s: int

    def integral(self) -> float:
        dphi = self.phi_axis[1] - self.phi_axis[0]
        return float(np.sum(self.values) * dphi)

    def to_dict(self) -> dict:
        return {"s": self.s,
                "phi": [float(x) for x in self.phi_axis],
                "pr": [float(x) for x in self.values]}


def phase_distribution(rho: DensityMatrix, s: int | None = None,
                       n_points: int = 721) -> PhaseDistribution:
    """Pr(φ) = (1/2π) Σ_{n,m≤s} e^{i(m−n)φ} ρ_nm.

    Normalized by the truncated trace so the distribution integrates to one
    even when s clips a little population.
    """
    s = rho.dim - 1 if s is None else s
    if s > rho.dim - 1:
        raise ValueError("s exceeds the stored truncation")
    phi = -np.pi + 2 * np.pi * np.arange(n_points) / n_points
    block = rho.elements[: s + 1, : s + 1]
    tr = float(np.real(np.trace(block)))
    e = np.exp(1j * np.outer(np.arange(s + 1), phi))
    vals = np.real(np.einsum("np,nm,mp->p", e.conj(), block, e, optimize=True)) / (2 * np.pi * tr)
    if vals.min() < -1e-9:
        raise FloatingPointError(f"phase distribution negative: {vals.min():.2e}")
    return PhaseDistribution(phi_axis=phi, values=np.clip(vals, 0.0, None), s=s)


@dataclass
class NumberPhaseStats:
    delta_n: float
    delta_phi: float
    product: float
    commutator_half: float
    s: int
    notes: dict = field(default_factory=dict)


def pegg_barnett_phase_operator(s: int, phi0: float = -np.pi) -> np.ndarray:
    """Truncated phase operator Σ_k φ_k |φ_k><φ_k| with φ_k = φ0 + 2πk/(s+1)."""
    k = np.arange(s + 1)
    phi_k = phi0 + 2 * np.pi * k / (s + 1)
    # <n|φ̂|m> = (1/(s+1)) Σ_k φ_k e^{i(n−m)φ_k}
    n = np.arange(s + 1)
    e = np.exp(1j * np.outer(n, phi_k))
    return (e * phi_k[None, :]) @ e.conj().T / (s + 1)


def number_phase_stats(rho: DensityMatrix, s: int | None = None,
                       phi0: float = -np.pi) -> NumberPhaseStats:
    """Number-phase uncertainties and the commutator expectation, evaluated
    with the truncated phase operator in the (s+1)-dimensional space.

    The reference phase φ0 defaults to −π (a convention, exposed here).
    The Robertson bound Δn·Δφ ≥ |⟨[n̂, φ̂]⟩|/2 is asserted.
    """
    s = rho.dim - 1 if s is None else s
    if s > rho.dim - 1:
        raise ValueError("s exceeds the stored truncation")
    block = rho.elements[: s + 1, : s + 1]
    tr = float(np.real(np.trace(block)))
    block = block / tr
    phi_op = pegg_barnett_phase_operator(s, phi0)
    n_op = np.diag(np.arange(s + 1).astype(complex))
    exp = lambda op: complex(np.trace(block @ op))
    mean_n = exp(n_op).real
    var_n = exp(n_op @ n_op).real - mean_n**2
    mean_phi = exp(phi_op).real
    var_phi = exp(phi_op @ phi_op).real - mean_phi**2
    comm = exp(n_op @ phi_op - phi_op @ n_op)
    dn = float(np.sqrt(max(var_n, 0.0)))
    dphi = float(np.sqrt(max(var_phi, 0.0)))
    product = dn * dphi
    chalf = float(abs(comm) / 2.0)
    assert product >= chalf - 1e-9, "Robertson inequality violated"
    notes = {"truncated_trace": tr, "phi0": phi0}
    return NumberPhaseStats(delta_n=dn, delta_phi=dphi, product=product,
                            commutator_half=chalf, s=s, notes=notes)
