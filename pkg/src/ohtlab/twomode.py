"""Two-mode tomography primitives: dual-LO combined quadratures, GRIPS mode
rotations, the three-angle two-time g² method, and Stokes-operator moments.

The dual-LO measurement returns, per pulse, the combined quadrature
Q = cos(α) q_1θ + sin(α) q_2β with β = θ − ζ.  Correlated photon-number
sources are synthesized by planting per-pulse number pairs (n₁, n₂) from a
joint law and sampling each quadrature from the matching Fock distribution,
which gives exact ground-truth ⟨n₁n₂⟩ for validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .detection import (DatasetMeta, DetectorModel, PhaseSchedule, QuadratureDataset,
                        PDF_POINTS, PDF_SPAN, electronic_quadrature_sigma,
                        pdf_table, _inverse_cdf_draw)
from .errors import UnsupportedStateError
from .states import DensityMatrix, hermite_psi_all


@dataclass(frozen=True)
class LOSuperposition:
    """Dual-LO mixing parameters: mode-mixing angle α, common phase θ,
    relative phase ζ."""

    alpha: float
    theta: float = 0.0
    zeta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= np.pi / 2:
            raise ValueError("alpha must lie in [0, π/2]")


@dataclass
class TwoModeState:
    """Two-mode source description.

    kinds:
      product:            independent modes with given single-mode density matrices
      correlated_thermal: equal thermal marginals; with probability `corr`
                           the two photon numbers coincide shot-to-shot
      planted:            arbitrary joint number law (callable(rng, n) -> (n1, n2))
      joint:              full joint Fock density matrix (moments only;
                           sampling is not implemented for entangled states)
    """

    kind: str
    rho1: DensityMatrix | None = None
    rho2: DensityMatrix | None = None
    nbar: float | None = None
    corr: float | None = None
    law: object = None
    rho_joint: np.ndarray | None = None
    dims: tuple | None = None

    def __post_init__(self):
        if self.kind == "correlated_thermal":
            if self.nbar is None or self.nbar < 0:
                raise ValueError("correlated_thermal needs nbar >= 0")
            if self.corr is None or not 0.0 <= self.corr <= 1.0:
                raise ValueError("number correlation coefficient must be in [0, 1]")
        elif self.kind == "product":
            if self.rho1 is None or self.rho2 is None:
                raise ValueError("product state needs rho1 and rho2")
        elif self.kind == "planted":
            if not callable(self.law):
                raise ValueError("planted state needs a callable joint number law")
        elif self.kind == "joint":
            if self.rho_joint is None or self.dims is None:
                raise ValueError("joint state needs rho_joint and dims")
            d = self.dims[0] * self.dims[1]
            if self.rho_joint.shape != (d, d):
                raise ValueError("rho_joint must be (D1·D2) x (D1·D2)")
            herm = np.max(np.abs(self.rho_joint - self.rho_joint.conj().T))
            if herm > 1e-9:
                raise ValueError("joint density matrix not Hermitian")
            if abs(np.real(np.trace(self.rho_joint)) - 1) > 1e-9:
                raise ValueError("joint density matrix trace must be 1")
        else:
            raise ValueError(f"unknown two-mode kind {self.kind!r}")


@dataclass
class DualQuadratureDataset:
    """Per-pulse combined quadratures with their (θ, ζ) phase tags."""

    thetas: np.ndarray
    zetas: np.ndarray
    qs: np.ndarray
    alpha: float
    meta: DatasetMeta

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, float)
        self.zetas = np.asarray(self.zetas, float)
        self.qs = np.asarray(self.qs, float)
        if not (self.thetas.shape == self.zetas.shape == self.qs.shape):
            raise ValueError("thetas, zetas, qs must have equal length")

    def __len__(self):
        return self.qs.size

    def as_single_mode(self) -> QuadratureDataset:
        """View the record as a single-mode dataset (valid at α = 0 or π/2)."""
        return QuadratureDataset(thetas=self.thetas, qs=self.qs, meta=self.meta)


def thermal_pmf(nbar: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff)
    p = (nbar / (1 + nbar)) ** n / (1 + nbar)
    return p / p.sum()


def correlated_thermal_law(nbar: float, corr: float):
    """Joint number law: equal thermal marginals, Pearson correlation `corr`
    realized as a mixture of perfectly-correlated and independent draws."""
    def law(rng: np.random.Generator, n: int):
        cutoff = max(30, int(20 * (1 + nbar)))
        p = thermal_pmf(nbar, cutoff)
        common = rng.choice(cutoff, size=n, p=p)
        ind1 = rng.choice(cutoff, size=n, p=p)
        ind2 = rng.choice(cutoff, size=n, p=p)
        use_common = rng.random(n) < corr
        n1 = np.where(use_common, common, ind1)
        n2 = np.where(use_common, common, ind2)
        return n1, n2
    return law


def hbt_split_law(nbar: float):
    """One thermal mode split 50/50 onto the two measured modes (the
    Hanbury Brown-Twiss arrangement): n ~ BE(nbar), n1 ~ Binom(n, 1/2)."""
    def law(rng: np.random.Generator, n: int):
        cutoff = max(30, int(20 * (1 + nbar)))
        p = thermal_pmf(nbar, cutoff)
        total = rng.choice(cutoff, size=n, p=p)
        n1 = rng.binomial(total, 0.5)
        return n1, total - n1
    return law


def anticorrelated_thermal_law(nbar: float, cutoff: int = 60):
    """Antithetically coupled thermal pair: thermal marginals with strongly
    negative number correlation."""
    def law(rng: np.random.Generator, n: int):
        p = thermal_pmf(nbar, cutoff)
        cdf = np.cumsum(p)
        u = rng.random(n)
        n1 = np.searchsorted(cdf, u)
        n2 = np.searchsorted(cdf, 1.0 - u)
        return n1, n2
    return law


def independent_poisson_law(nbar1: float, nbar2: float):
    def law(rng: np.random.Generator, n: int):
        return rng.poisson(nbar1, size=n), rng.poisson(nbar2, size=n)
    return law


def _fock_quadrature_draw(ns: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Quadrature samples of Fock states: q ~ ψ_n(q)² (phase independent)."""
    q_grid = np.linspace(-PDF_SPAN, PDF_SPAN, PDF_POINTS)
    n_max = int(ns.max()) if ns.size else 0
    psi = hermite_psi_all(n_max, q_grid)
    out = np.empty(ns.size, float)
    dq = q_grid[1] - q_grid[0]
    for n in np.unique(ns):
        sel = ns == n
        pdf = psi[n] ** 2
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * dq)])
        cdf /= cdf[-1]
        out[sel] = np.interp(u[sel], cdf, q_grid)
    return out


def _mode_quadratures_product(rho: DensityMatrix, phases: np.ndarray, u: np.ndarray) -> np.ndarray:
    q_grid = np.linspace(-PDF_SPAN, PDF_SPAN, PDF_POINTS)
    distinct, group = np.unique(phases, return_inverse=True)
    rows = pdf_table(rho, distinct, q_grid)
    return _inverse_cdf_draw(rows, q_grid, group, u)


def combined_quadrature_samples(st: TwoModeState, lo: LOSuperposition, det: DetectorModel,
                                n_samples: int, seed: int,
                                theta_schedule: PhaseSchedule | None = None,
                                zeta_schedule: PhaseSchedule | None = None,
                                keep_joint: bool = False) -> DualQuadratureDataset:
    """Dual-LO measurement record Q = cos(α) q_1θ + sin(α) q_2β, β = θ − ζ.

    θ and ζ follow their schedules when given (fixed at the LOSuperposition
    values otherwise); detection noise follows the single-detector rules.
    """
    if st.kind == "joint":
        raise UnsupportedStateError(
            "sampling from a general entangled joint Fock state is not implemented; "
            "use product / correlated_thermal / planted representations"
        )
    thetas = (theta_schedule.phases(n_samples, stream(seed, "theta"))
              if theta_schedule else np.full(n_samples, lo.theta))
    zetas = (zeta_schedule.phases(n_samples, stream(seed, "zeta"))
             if zeta_schedule else np.full(n_samples, lo.zeta))
    betas = np.mod(thetas - zetas, 2.0 * np.pi)
    u1 = stream(seed, "quadrature-1").random(n_samples)
    u2 = stream(seed, "quadrature-2").random(n_samples)
    joint = {}
    if st.kind == "product":
        q1 = _mode_quadratures_product(st.rho1, thetas, u1)
        q2 = _mode_quadratures_product(st.rho2, betas, u2)
    else:
        law = st.law if st.kind == "planted" else correlated_thermal_law(st.nbar, st.corr)
        n1, n2 = law(stream(seed, "numbers"), n_samples)
        n1 = np.asarray(n1, int)
        n2 = np.asarray(n2, int)
        q1 = _fock_quadrature_draw(n1, u1)
        q2 = _fock_quadrature_draw(n2, u2)
        if keep_joint:
            joint.update(n1=n1, n2=n2)
    if keep_joint:
        joint.update(q1=q1, q2=q2)
    qs = np.cos(lo.alpha) * q1 + np.sin(lo.alpha) * q2
    if det.eta_eff < 1.0:
        sig = np.sqrt((1.0 / det.eta_eff - 1.0) / 2.0)
        qs = qs + sig * stream(seed, "efficiency").standard_normal(n_samples)
    sig_e = electronic_quadrature_sigma(det)
    if sig_e > 0:
        qs = qs + sig_e * stream(seed, "electronic").standard_normal(n_samples)
    meta = DatasetMeta(detector=det, schedule=theta_schedule or PhaseSchedule("grid", d=1),
                       seed=seed,
                       extra={"mode": "dual", "alpha": lo.alpha,
                              "zeta_schedule": zeta_schedule.to_dict() if zeta_schedule else None,
                              **({"joint_record": joint} if keep_joint else {})})
    return DualQuadratureDataset(thetas=thetas, zetas=zetas, qs=qs, alpha=lo.alpha, meta=meta)


def grips_transform(gamma: float, zeta: float) -> np.ndarray:
    """SU(2) mode map (â₁, â₂) → (â₃, â₄):
    â₃ = cos(γ/2) â₁ + e^{iζ} sin(γ/2) â₂,
    â₄ = −sin(γ/2) â₁ + e^{iζ} cos(γ/2) â₂."""
    c, s = np.cos(gamma / 2.0), np.sin(gamma / 2.0)
    e = np.exp(1j * zeta)
    return np.array([[c, e * s], [-s, e * c]], dtype=complex)


def _phase_randomized(ds: DualQuadratureDataset) -> bool:
    sched = ds.meta.schedule
    return sched.kind in ("uniform_random", "swept_linear")


def _run_moments(ds: DualQuadratureDataset):
    q = ds.qs
    return q**2, q**4


def two_time_g2(run0: DualQuadratureDataset, run45: DualQuadratureDataset,
                run90: DualQuadratureDataset):
    """Two-time/two-mode second-order coherence from the three-α method.

    With θ and ζ independently phase-randomized, odd cross moments of the
    mode quadratures vanish, so the α = π/4 run isolates the cross moment:
    ⟨q₁²q₂²⟩ = (4⟨⟨Q⁴⟩⟩_{π/4} − ⟨⟨q₁⁴⟩⟩ − ⟨⟨q₂⁴⟩⟩)/6, and
    ⟨q₁²q₂²⟩ = ⟨n₁n₂⟩ + ⟨n₁⟩/2 + ⟨n₂⟩/2 + 1/4 converts to photon numbers.
    Returns (g², jackknife std err).
    """
    for ds, want in ((run0, 0.0), (run45, np.pi / 4), (run90, np.pi / 2)):
        if abs(ds.alpha - want) > 1e-9:
            raise ValueError(f"expected runs at α = 0, π/4, π/2; got α = {ds.alpha}")
        if not _phase_randomized(ds):
            raise ValueError("two-time g² needs phase-randomized records")
    if not (len(run0) == len(run45) == len(run90)):
        raise ValueError("mismatched sample counts between the three runs")

    a2, a4 = _run_moments(run0)
    b2, b4 = _run_moments(run90)
    c4 = run45.qs ** 4

    def estimate(m2_1, m4_1, m2_2, m4_2, m4_c):
        cross = (4.0 * m4_c - m4_1 - m4_2) / 6.0
        n1 = m2_1 - 0.5
        n2 = m2_2 - 0.5
        n1n2 = cross - 0.5 * n1 - 0.5 * n2 - 0.25
        return n1n2 / (n1 * n2)

    means = [a2.mean(), a4.mean(), b2.mean(), b4.mean(), c4.mean()]
    value = float(estimate(*means))

    # delete-1 jackknife per run; the three runs are independent, so their
    # jackknife variances add
    n = len(run0)
    loo_sets = (
        estimate((a2.sum() - a2) / (n - 1), (a4.sum() - a4) / (n - 1),
                 means[2], means[3], means[4]),
        estimate(means[0], means[1], (b2.sum() - b2) / (n - 1),
                 (b4.sum() - b4) / (n - 1), means[4]),
        estimate(means[0], means[1], means[2], means[3],
                 (c4.sum() - c4) / (n - 1)),
    )
    var = sum((n - 1) / n * np.sum((loo - loo.mean()) ** 2) for loo in loo_sets)
    return value, float(np.sqrt(var))


#: Jones matrices (H/V basis) of the fixed waveplates used for basis changes:
#: a quarter-wave plate at 45° sends R → V, L → H (up to phase); a half-wave
#: plate at 67.5° sends +45° → V, −45° → H.
QWP_RL_TO_VH = np.array([[1.0, -1.0j], [-1.0j, 1.0]], dtype=complex) / np.sqrt(2.0)
HWP_DIAG_TO_VH = np.array([[-1.0, 1.0], [1.0, 1.0]], dtype=complex) / np.sqrt(2.0)

POLARIZATION_BASES = ("R/L", "H/V", "+45/-45")


def polarization_g2(runs: dict):
    """Polarization-resolved g² table over the three standard bases.

    `runs` maps each basis name to its (α = 0, π/4, π/2) record triple,
    generated after the fixed waveplate transformation for that basis.
    Returns per-basis mean photon numbers, the self coherences g_11/g_22
    (single-mode formula on the α = 0 / π/2 runs), and the cross coherence
    g_12 from the three-α method.
    """
    from .moments import g2_single, mean_photon

    missing = [b for b in POLARIZATION_BASES if b not in runs]
    if missing:
        raise ValueError(f"incomplete basis set; missing {missing}")
    table = {}
    for basis in POLARIZATION_BASES:
        ds0, ds45, ds90 = runs[basis]
        g12, g12_se = two_time_g2(ds0, ds45, ds90)
        m1 = ds0.as_single_mode()
        m2 = ds90.as_single_mode()
        g11, g11_se = g2_single(m1)
        g22, g22_se = g2_single(m2)
        n1, n1_se = mean_photon(m1)
        n2, n2_se = mean_photon(m2)
        table[basis] = {
            "n_1": (n1, n1_se), "n_2": (n2, n2_se),
            "g_11": (g11, g11_se), "g_22": (g22, g22_se),
            "g_12": (g12, g12_se),
        }
    return table


@dataclass
class StokesMoments:
    means: np.ndarray
    second_moments: np.ndarray

    def __post_init__(self):
        sym_dev = np.max(np.abs(self.second_moments - self.second_moments.T))
        if sym_dev > 1e-9:
            raise ValueError("second-moment matrix must be symmetric")
        evals = np.linalg.eigvalsh(self.second_moments)
        if evals.min() < -1e-9:
            raise ValueError("second-moment matrix must be positive semidefinite")


def joint_density(st: TwoModeState, dim: int = 10) -> tuple[np.ndarray, int]:
    """Joint Fock density matrix of a representable two-mode state."""
    if st.kind == "joint":
        return st.rho_joint, st.dims[0]
    if st.kind == "product":
        if st.rho1.dim != st.rho2.dim:
            raise ValueError("product Stokes moments need equal mode dimensions")
        return np.kron(st.rho1.elements, st.rho2.elements), st.rho1.dim
    if st.kind == "correlated_thermal":
        p = thermal_pmf(st.nbar, dim)
        pm = st.corr * np.diag(p) + (1 - st.corr) * np.outer(p, p)
        pm /= pm.sum()
        return np.diag(pm.ravel()).astype(complex), dim
    raise UnsupportedStateError(f"no joint density matrix for kind {st.kind!r}")


def stokes_operators(dim: int):
    """Truncated Ĵ₁, Ĵ₂, Ĵ₃ on the D² joint space."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    eye = np.eye(dim, dtype=complex)
    a1 = np.kron(a, eye)
    a2 = np.kron(eye, a)
    j1 = (a1.conj().T @ a1 - a2.conj().T @ a2) / 2.0
    j2 = (a1.conj().T @ a2 + a2.conj().T @ a1) / 2.0
    j3 = (a1.conj().T @ a2 - a2.conj().T @ a1) / 2.0j
    return j1, j2, j3


def stokes_moments(st: TwoModeState, dim: int = 10) -> StokesMoments:
    """First and symmetrized second moments of the Stokes operators."""
    if dim > 10:
        raise ValueError("joint Fock space capped at 10 x 10")
    rho, d = joint_density(st, dim)
    ops = stokes_operators(d)
    means = np.array([float(np.real(np.trace(rho @ op))) for op in ops])
    second = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            sym = 0.5 * (ops[i] @ ops[j] + ops[j] @ ops[i])
            second[i, j] = float(np.real(np.trace(rho @ sym)))
    second = 0.5 * (second + second.T)
    return StokesMoments(means=means, second_moments=second)
