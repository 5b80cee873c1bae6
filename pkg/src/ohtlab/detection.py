"""Monte Carlo balanced-homodyne detection.

The measurement chain: an ideal quadrature value is drawn from the state's
Pr(q, θ), detection losses smear it with a Gaussian of variance
(1/η_eff − 1)/2 (η_eff = η_q·η_LS), and electronic noise adds
σ_e·√2/(η_eff·√(2·N_LO)) in quadrature units (two channels combined).
The count-space route (`detector_counts`) models the two photodiodes
explicitly for classical (coherent mean-field) signals, where independent
Poisson statistics are exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import skellam

from ._rng import stream
from .errors import CoverageError, UnsupportedStateError
from .states import DensityMatrix, StateSpec, hermite_psi_all

FORMAT_VERSION = "ohtlab-quad-v1"

#: tabulation grid for inverse-CDF sampling
PDF_POINTS = 4096
PDF_SPAN = 8.0

#: continuous phase schedules are snapped to this many equispaced values so
#: per-phase pdf tables stay affordable; phase averages of harmonics below
#: this order are exact, and the recorded theta is the actual sampling phase
PHASE_SNAP = 1024


@dataclass(frozen=True)
class DetectorModel:
    """Balanced-homodyne detector parameters."""

    eta_q: float = 1.0
    eta_ls: float = 1.0
    lo_mean_photons: float = 1e6
    sigma_e: float = 0.0
    gain: float = 1e6
    balance_imbalance: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.eta_q <= 1.0:
            raise ValueError("eta_q must be in (0, 1]")
        if not 0.0 <= self.eta_ls <= 1.0:
            raise ValueError("eta_ls must be in [0, 1]")
        if self.lo_mean_photons < 0 or self.sigma_e < 0:
            raise ValueError("lo_mean_photons and sigma_e must be >= 0")

    @property
    def eta_eff(self) -> float:
        return self.eta_q * self.eta_ls

    def to_dict(self) -> dict:
        return {
            "eta_q": self.eta_q,
            "eta_ls": self.eta_ls,
            "lo_mean_photons": self.lo_mean_photons,
            "sigma_e": self.sigma_e,
            "gain": self.gain,
            "balance_imbalance": self.balance_imbalance,
        }


@dataclass(frozen=True)
class PhaseSchedule:
    """LO phase program: equally spaced grid, uniform random, or linear sweep."""

    kind: str = "grid"
    d: int | None = None
    span: tuple = (0.0, 2.0 * np.pi)

    KINDS = ("grid", "uniform_random", "swept_linear")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "grid":
            if self.d is None or self.d < 1:
                raise ValueError("grid schedule needs d >= 1")

    def grid_phases(self) -> np.ndarray:
        lo, hi = self.span
        return lo + (hi - lo) * np.arange(self.d) / self.d

    def phases(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Per-sample θ values in [0, 2π), deterministic given the generator."""
        if self.kind == "grid":
            return np.resize(self.grid_phases(), n)
        snap = 2.0 * np.pi / PHASE_SNAP
        if self.kind == "uniform_random":
            theta = rng.random(n) * 2.0 * np.pi
        else:  # swept_linear
            theta = 2.0 * np.pi * np.arange(n) / n
        return np.floor(theta / snap) * snap

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.d is not None:
            d["d"] = self.d
        if tuple(self.span) != (0.0, 2.0 * np.pi):
            d["span"] = list(self.span)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PhaseSchedule":
        kw = dict(data)
        if "span" in kw:
            kw["span"] = tuple(kw["span"])
        return cls(**kw)


@dataclass
class DatasetMeta:
    detector: DetectorModel
    schedule: PhaseSchedule
    seed: int
    source: dict | None = None
    format_version: str = FORMAT_VERSION
    extra: dict = field(default_factory=dict)


@dataclass
class QuadratureDataset:
    """Measurement record: ordered (θ, q) samples plus detector metadata."""

    thetas: np.ndarray
    qs: np.ndarray
    meta: DatasetMeta

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, float)
        self.qs = np.asarray(self.qs, float)
        if self.thetas.shape != self.qs.shape:
            raise ValueError("thetas and qs must have equal length")
        if self.thetas.size and (self.thetas.min() < 0 or self.thetas.max() >= 2 * np.pi):
            raise ValueError("phases must lie in [0, 2π)")

    def __len__(self):
        return self.qs.size


def pdf_table(rho: DensityMatrix, thetas: np.ndarray, q_grid: np.ndarray) -> np.ndarray:
    """Pr(q, θ) rows for each θ via the harmonic-band decomposition.

    Pr(q,θ) = c_0(q) + 2 Re Σ_{k≥1} e^{ikθ} c_k(q) with
    c_k(q) = Σ_μ ρ_{μ,μ+k} ψ_μ(q) ψ_{μ+k}(q); cost is one ψ table plus a
    (n_θ × bands) × (bands × n_q) product.
    """
    dim = rho.dim
    psi = hermite_psi_all(dim - 1, q_grid)
    bands = np.zeros((dim, q_grid.size), complex)
    for k in range(dim):
        mu = np.arange(dim - k)
        coeff = rho.elements[mu, mu + k]
        bands[k] = np.einsum("m,mq,mq->q", coeff, psi[mu], psi[mu + k])
    phase = np.exp(1j * np.outer(thetas, np.arange(dim)))
    table = np.real(phase[:, :1] * bands[:1]).reshape(thetas.size, q_grid.size) \
        + 2.0 * np.real(phase[:, 1:] @ bands[1:])
    return np.clip(table, 0.0, None)


def _inverse_cdf_draw(pdf_rows: np.ndarray, q_grid: np.ndarray, group_idx: np.ndarray,
                      u: np.ndarray) -> np.ndarray:
    """Draw one quadrature per sample: sample i uses pdf row group_idx[i]."""
    dq = q_grid[1] - q_grid[0]
    out = np.empty(u.size, float)
    for g in range(pdf_rows.shape[0]):
        sel = group_idx == g
        if not np.any(sel):
            continue
        cdf = np.concatenate([[0.0], np.cumsum((pdf_rows[g][1:] + pdf_rows[g][:-1]) * 0.5 * dq)])
        cdf /= cdf[-1]
        out[sel] = np.interp(u[sel], cdf, q_grid)
    return out


def electronic_quadrature_sigma(det: DetectorModel) -> float:
    """Electronic noise mapped to quadrature units, both channels combined.

    σ_e·√2/(η_eff·√(2·N_LO)); valid as a quadrature-space shortcut while
    σ_e is well below the shot noise.
    """
    if det.sigma_e == 0:
        return 0.0
    return det.sigma_e * np.sqrt(2.0) / (det.eta_eff * np.sqrt(2.0 * det.lo_mean_photons))


def sample_quadratures(rho: DensityMatrix, sched: PhaseSchedule, det: DetectorModel,
                       n_samples: int, seed: int) -> QuadratureDataset:
    """Synthesize a balanced-homodyne measurement record from a state."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if det.eta_eff <= 0:
        raise ValueError("eta_eff must be positive")
    if det.lo_mean_photons <= 0:
        raise ValueError("quadrature sampling needs a nonzero LO")
    if det.lo_mean_photons < 1e4:
        warnings.warn("lo_mean_photons < 1e4: strong-LO Gaussian model is marginal")
    thetas = sched.phases(n_samples, stream(seed, "theta"))
    distinct, group = np.unique(thetas, return_inverse=True)
    q_grid = np.linspace(-PDF_SPAN, PDF_SPAN, PDF_POINTS)
    rows = pdf_table(rho, distinct, q_grid)
    u = stream(seed, "quadrature").random(n_samples)
    qs = _inverse_cdf_draw(rows, q_grid, group, u)
    if det.eta_eff < 1.0:
        sig = np.sqrt((1.0 / det.eta_eff - 1.0) / 2.0)
        qs = qs + sig * stream(seed, "efficiency").standard_normal(n_samples)
    sig_e = electronic_quadrature_sigma(det)
    if sig_e > 0:
        qs = qs + sig_e * stream(seed, "electronic").standard_normal(n_samples)
    if det.balance_imbalance != 0.0:
        # leading-order effect of imperfect 50/50 splitting: the unsubtracted
        # LO leaves a DC offset on the scaled difference
        qs = qs + det.balance_imbalance * det.eta_q * np.sqrt(det.lo_mean_photons) \
            / (np.sqrt(2.0) * det.eta_eff)
    meta = DatasetMeta(detector=det, schedule=sched, seed=seed,
                       source=rho.meta.get("spec"))
    return QuadratureDataset(thetas=thetas, qs=qs, meta=meta)


def detector_counts(q_ideal, theta, det: DetectorModel, rng: np.random.Generator):
    """Raw photoelectron numbers (n1, n2) at the two diodes for one pulse.

    Models a classical (mean-field) signal with quadrature displacement
    q_ideal: each diode sees the split LO plus the antisymmetric signal beat
    η_eff·|α_L|·q/√2, Poisson photostatistics, and rounded Gaussian
    electronic noise per channel.  The scaled difference
    n_−/(√2·η_eff·|α_L|) recovers q within the shot-noise spread; Poisson
    statistics make this chain exact for coherent signals.
    """
    q_ideal = np.asarray(q_ideal, float)
    lo_det = det.eta_q * det.lo_mean_photons
    beat = det.eta_eff * np.sqrt(det.lo_mean_photons) * q_ideal / np.sqrt(2.0)
    mu1 = lo_det * (1.0 + det.balance_imbalance) / 2.0 + beat
    mu2 = lo_det * (1.0 - det.balance_imbalance) / 2.0 - beat
    if np.any(mu1 < 0) or np.any(mu2 < 0):
        raise ValueError("negative mean photoelectron rate; LO too weak for this signal")
    n1 = rng.poisson(mu1).astype(np.int64)
    n2 = rng.poisson(mu2).astype(np.int64)
    if det.sigma_e > 0:
        n1 = n1 + np.rint(rng.normal(0.0, det.sigma_e, size=n1.shape)).astype(np.int64)
        n2 = n2 + np.rint(rng.normal(0.0, det.sigma_e, size=n2.shape)).astype(np.int64)
    return n1, n2


def scaled_difference(n1, n2, det: DetectorModel):
    """Quadrature value recovered from a count pair."""
    return (np.asarray(n1) - np.asarray(n2)) / (np.sqrt(2.0) * det.eta_eff * np.sqrt(det.lo_mean_photons))


def skellam_difference_pdf(signal_alpha, theta: float, det: DetectorModel,
                           n_sigma: float = 8.0):
    """Exact difference-count law for a coherent signal: the Skellam pmf.

    With coherent signal and LO, the two diodes are independent Poisson
    sources with the beam-splitter output means, so n_− follows the
    modified-Bessel (Skellam) distribution, the closed evaluation of the
    general counting formula in this regime, and the exactness oracle for
    the strong-LO Gaussian model.

    Returns (n_values, pmf, mu1, mu2).
    """
    if isinstance(signal_alpha, StateSpec):
        if signal_alpha.kind == "vacuum":
            alpha = 0.0 + 0.0j
        elif signal_alpha.kind == "coherent":
            alpha = complex(signal_alpha.alpha)
        else:
            raise UnsupportedStateError(
                f"exact difference-count law only implemented for coherent signals, not {signal_alpha.kind}"
            )
    else:
        alpha = complex(signal_alpha)
    lo = det.lo_mean_photons
    q_mean = np.sqrt(2.0) * np.real(alpha * np.exp(-1j * theta))
    beat = det.eta_q * np.sqrt(lo) * q_mean / np.sqrt(2.0)
    base = det.eta_q * (lo + abs(alpha) ** 2) / 2.0
    mu1 = base * (1.0 + det.balance_imbalance) + beat
    mu2 = base * (1.0 - det.balance_imbalance) - beat
    if mu1 < 0 or mu2 < 0:
        raise ValueError("negative mean rate")
    center = mu1 - mu2
    width = n_sigma * np.sqrt(mu1 + mu2) + 10
    n_values = np.arange(int(np.floor(center - width)), int(np.ceil(center + width)) + 1)
    pmf = skellam.pmf(n_values, mu1, mu2)
    return n_values, pmf, mu1, mu2


def mode_overlap(lo_mode, sig_mode, dx: float = 1.0) -> float:
    """Mode-overlap efficiency |Σ v_L* · w_S · Δ| for normalized mode samples."""
    v = np.asarray(lo_mode, complex)
    w = np.asarray(sig_mode, complex)
    for name, m in (("lo_mode", v), ("sig_mode", w)):
        norm = np.sum(np.abs(m) ** 2) * dx
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"{name} not normalized: Σ|·|²Δ = {norm:.8f}")
    return float(np.abs(np.sum(np.conj(v) * w) * dx))


@dataclass
class CalibrationResult:
    gain_estimate: float
    sigma_e_estimate: float
    slope: float
    intercept: float
    intercept_stderr: float
    mean_v_plus: np.ndarray
    var_v_minus: np.ndarray
    nonlinearity_flag: bool
    reduced_residual: float


def calibration_curve(det: DetectorModel, lo_levels, pulses_per_level: int,
                      seed: int) -> CalibrationResult:
    """Shot-noise calibration: fit Var(V_−) = (1/g)·<V_+> + 2σ_e²/g².

    Simulates vacuum-signal voltage pairs V_i = N_i/g over several LO pulse
    energies and recovers gain and per-channel electronic noise from the
    straight-line fit; a reduced residual well above 1 flags deviation from
    shot-noise-limited response.
    """
    levels = np.asarray(lo_levels, float)
    if np.unique(levels).size < 3:
        raise ValueError("need at least 3 distinct LO levels")
    rng = stream(seed, "calibration")
    mean_vp = np.empty(levels.size)
    var_vm = np.empty(levels.size)
    for i, energy in enumerate(levels):
        level_det = replace(det, lo_mean_photons=float(energy))
        n1, n2 = detector_counts(np.zeros(pulses_per_level), 0.0, level_det, rng)
        v1 = n1 / det.gain
        v2 = n2 / det.gain
        mean_vp[i] = np.mean(v1 + v2)
        var_vm[i] = np.var(v1 - v2, ddof=1)
    # weighted least squares: Var(sample variance) ~ 2 Var²/(n−1), so the
    # high-energy points carry much larger absolute scatter
    x = mean_vp
    y = var_vm
    sigma_y = y * np.sqrt(2.0 / (pulses_per_level - 1))
    A = np.vstack([x, np.ones_like(x)]).T / sigma_y[:, None]
    b = y / sigma_y
    coeff, res, *_ = np.linalg.lstsq(A, b, rcond=None)
    slope, intercept = float(coeff[0]), float(coeff[1])
    fit = (np.vstack([x, np.ones_like(x)]).T) @ coeff
    cov = np.linalg.inv(A.T @ A)
    intercept_se = float(np.sqrt(cov[1, 1]))
    gain_est = 1.0 / slope
    sigma_e_est = gain_est * np.sqrt(max(intercept, 0.0) / 2.0)
    red = float(np.mean(((y - fit) / sigma_y) ** 2))
    return CalibrationResult(
        gain_estimate=gain_est, sigma_e_estimate=sigma_e_est,
        slope=slope, intercept=intercept, intercept_stderr=intercept_se,
        mean_v_plus=mean_vp, var_v_minus=var_vm,
        nonlinearity_flag=red > 5.0, reduced_residual=red,
    )


def gain_balancing_sim(n_tot: float, n_diff1: float, n_diff2: float) -> float:
    """Achievable gain-matching precision from the iterated swap procedure.

    With residual difference numbers n_diff1, n_diff2 in the two connection
    configurations and n_tot total photoelectrons, the two channel gains are
    equal to within (n_diff1 + n_diff2)/n_tot.
    """
    if n_tot <= 0:
        raise ValueError("n_tot must be positive")
    return (n_diff1 + n_diff2) / n_tot


def phase_coverage_kind(ds: QuadratureDataset) -> str:
    """Classify a dataset's phase coverage: 'full', 'grid', or 'fixed'."""
    sched = ds.meta.schedule
    if sched.kind in ("uniform_random", "swept_linear"):
        return "full"
    distinct = np.unique(ds.thetas)
    return "fixed" if distinct.size == 1 else "grid"


def require_full_coverage(ds: QuadratureDataset, min_harmonic: int = 4):
    """Raise CoverageError unless phase averages up to the given trigonometric
    order are unbiased for this dataset."""
    kind = phase_coverage_kind(ds)
    if kind == "full":
        return
    if kind == "fixed":
        raise CoverageError("fixed-phase dataset cannot be phase-averaged")
    d = np.unique(ds.thetas).size
    if d <= min_harmonic:
        raise CoverageError(
            f"grid of {d} phases aliases harmonics up to order {min_harmonic}; "
            f"need more than {min_harmonic} equally spaced phases"
        )
