"""Filtered back-projection of the Wigner function from quadrature records.

The inversion integrates the measured Pr(q_θ, θ) against the |ξ| ramp
filter over θ ∈ [0, π); samples at θ ∈ [π, 2π) are folded in via
Pr(q, θ+π) = Pr(−q, θ).  The ramp is truncated at a frequency cutoff k_c
(with an optional cosine roll-off over its top 20%), which trades
statistical noise against a small deterministic smoothing bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.signal import fftconvolve

from ._rng import stream
from .detection import QuadratureDataset
from .errors import CoverageError
from .states import WignerGrid, default_grid_axis

Q_BINS = 256
Q_SPAN = 8.0


@dataclass
class RadonConfig:
    grid_points: int = 201
    grid_span: float = 6.0
    k_c: float = 5.0
    n_phase_bins: int = 32
    kernel: str = "ram-lak-with-cosine-rolloff"
    q_bins: int = Q_BINS
    q_span: float = Q_SPAN

    KERNELS = ("ram-lak", "ram-lak-with-cosine-rolloff")

    def __post_init__(self):
        if self.k_c <= 0:
            raise ValueError("k_c must be positive")
        if self.n_phase_bins < 2:
            raise ValueError("need at least 2 phase bins")
        if self.kernel not in self.KERNELS:
            raise ValueError(f"unknown filter kernel {self.kernel!r}")


def fold_phases(thetas: np.ndarray, qs: np.ndarray):
    """Map samples with θ in [π, 2π) onto [0, π) using Pr(q, θ+π) = Pr(−q, θ)."""
    fold = thetas >= np.pi
    return np.where(fold, thetas - np.pi, thetas), np.where(fold, -qs, qs)


def ramp_kernel_profile(u: np.ndarray, k_c: float, kernel: str) -> np.ndarray:
    """κ(u) = 2 ∫_0^{k_c} ξ w(ξ) cos(ξu) dξ, the real-space ramp filter."""
    xi = np.linspace(0.0, k_c, 4001)
    w = np.ones_like(xi)
    if kernel == "ram-lak-with-cosine-rolloff":
        edge = 0.8 * k_c
        tail = xi > edge
        w[tail] = 0.5 * (1.0 + np.cos(np.pi * (xi[tail] - edge) / (k_c - edge)))
    integrand = xi * w
    return 2.0 * np.trapezoid(integrand[None, :] * np.cos(np.outer(u, xi)), xi, axis=1)


def _histogram_projections(thetas, qs, cfg: RadonConfig):
    """Per-phase-bin normalized histograms Pr_M(q | θ_bin)."""
    theta_f, q_f = fold_phases(thetas, qs)
    dtheta = np.pi / cfg.n_phase_bins
    # bins centered on k·dθ so exact grid phases never straddle an edge;
    # the wrap region near π folds onto θ−π, −q by the same symmetry
    wrap = theta_f >= np.pi - dtheta / 2
    theta_f = np.where(wrap, theta_f - np.pi, theta_f)
    q_f = np.where(wrap, -q_f, q_f)
    bin_idx = np.rint(theta_f / dtheta).astype(int)
    bin_idx = np.clip(bin_idx, 0, cfg.n_phase_bins - 1)
    edges = np.linspace(-cfg.q_span, cfg.q_span, cfg.q_bins + 1)
    centers = 0.5 * (edges[1:] + edges[:-1])
    dq = edges[1] - edges[0]
    proj = np.zeros((cfg.n_phase_bins, cfg.q_bins))
    counts = np.zeros(cfg.n_phase_bins, dtype=int)
    mean_theta = np.arange(cfg.n_phase_bins) * dtheta
    for b in range(cfg.n_phase_bins):
        sel = bin_idx == b
        counts[b] = int(sel.sum())
        if counts[b]:
            h, _ = np.histogram(q_f[sel], bins=edges)
            proj[b] = h / (counts[b] * dq)
            # project at the actual mean phase of the bin, not its center:
            # grid schedules put all samples on one exact angle
            mean_theta[b] = float(np.mean(theta_f[sel]))
    return proj, counts, mean_theta, centers, dq


def filtered_backprojection(ds: QuadratureDataset, cfg: RadonConfig | None = None) -> WignerGrid:
    """Reconstruct W(q, p) from a quadrature dataset.

    Raises CoverageError when any phase bin is empty; flags bins with fewer
    than 100 samples in the result metadata.  Output is renormalized to
    unit integral on its grid.
    """
    cfg = cfg or RadonConfig()
    proj, counts, theta_proj, centers, dq = _histogram_projections(ds.thetas, ds.qs, cfg)
    empty = np.nonzero(counts == 0)[0]
    if empty.size:
        raise CoverageError(f"empty phase bins {empty.tolist()}; cover [0, π) before inverting")
    meta = {"bin_counts": counts.tolist(), "k_c": cfg.k_c, "kernel": cfg.kernel}
    if counts.min() < 100:
        meta["low_count_warning"] = True

    # filtered projections: G_b(q) = ∫ Pr(q'|θ_b) κ(q − q') dq'; the offsets
    # q_i − q_j take only 2·nbins−1 distinct values on the uniform grid
    lags = np.arange(-(cfg.q_bins - 1), cfg.q_bins) * dq
    kappa_1d = ramp_kernel_profile(lags, cfg.k_c, cfg.kernel)
    idx = (np.arange(cfg.q_bins)[:, None] - np.arange(cfg.q_bins)[None, :]) + cfg.q_bins - 1
    kappa = kappa_1d[idx]
    filtered = proj @ kappa.T * dq

    q_axis = default_grid_axis(cfg.grid_points, cfg.grid_span)
    p_axis = default_grid_axis(cfg.grid_points, cfg.grid_span)
    Q, P = np.meshgrid(q_axis, p_axis, indexing="ij")
    dtheta = np.pi / cfg.n_phase_bins
    w = np.zeros_like(Q)
    for b, th in enumerate(theta_proj):
        x = Q * np.cos(th) + P * np.sin(th)
        w += np.interp(x.ravel(), centers, filtered[b], left=0.0, right=0.0).reshape(Q.shape)
    w *= dtheta / (4.0 * np.pi**2)
    grid = WignerGrid(q_axis=q_axis, p_axis=p_axis, values=w, meta=meta)
    total = grid.integral()
    grid.values /= total
    grid.meta["raw_integral"] = total
    return grid


def bootstrap_backprojection(ds: QuadratureDataset, cfg: RadonConfig | None = None,
                             n_boot: int = 100, seed: int = 0) -> WignerGrid:
    """Per-pixel standard error of the FBP reconstruction by resampling
    (θ, q) pairs with replacement."""
    cfg = cfg or RadonConfig()
    rng = stream(seed, "bootstrap")
    n = len(ds)
    acc = None
    acc2 = None
    for _ in range(n_boot):
        idx = rng.integers(0, n, size=n)
        sub = QuadratureDataset(thetas=ds.thetas[idx], qs=ds.qs[idx], meta=ds.meta)
        w = filtered_backprojection(sub, cfg)
        if acc is None:
            acc = np.zeros_like(w.values)
            acc2 = np.zeros_like(w.values)
        acc += w.values
        acc2 += w.values**2
    mean = acc / n_boot
    var = np.clip(acc2 / n_boot - mean**2, 0.0, None) * n_boot / (n_boot - 1)
    q_axis = default_grid_axis(cfg.grid_points, cfg.grid_span)
    return WignerGrid(q_axis=q_axis, p_axis=q_axis.copy(), values=np.sqrt(var),
                      meta={"n_boot": n_boot})


def gaussian_kernel_grid(q_axis, p_axis, var: float):
    """Sampled centered 2D Gaussian, normalized so Σ K dq dp = 1."""
    dq = q_axis[1] - q_axis[0]
    dp = p_axis[1] - p_axis[0]
    half_q = int(np.ceil(8.0 * np.sqrt(var) / dq))
    half_p = int(np.ceil(8.0 * np.sqrt(var) / dp))
    gq = np.arange(-half_q, half_q + 1) * dq
    gp = np.arange(-half_p, half_p + 1) * dp
    K = np.exp(-gq[:, None] ** 2 / (2 * var) - gp[None, :] ** 2 / (2 * var))
    K /= K.sum() * dq * dp
    return K


def loss_smoothing(w: WignerGrid, eta: float) -> WignerGrid:
    """Gaussian smoothing equivalent to detection efficiency η < 1.

    Convolves with the per-axis variance ε² = (1/η − 1)/2 kernel and
    renormalizes; this is the forward model an η-limited reconstruction
    should be compared against.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must be in (0, 1)")
    var = (1.0 / eta - 1.0) / 2.0
    K = gaussian_kernel_grid(w.q_axis, w.p_axis, var)
    vals = fftconvolve(w.values, K, mode="same") * w.dq * w.dp
    out = WignerGrid(q_axis=w.q_axis.copy(), p_axis=w.p_axis.copy(), values=vals,
                     meta={"eta": eta})
    out.values /= out.integral()
    return out


def radon_forward(w: WignerGrid, theta: float, q_axis=None) -> np.ndarray:
    """Marginal Pr(q_θ): line integrals of W along the axis rotated by θ."""
    q_axis = w.q_axis if q_axis is None else np.asarray(q_axis, float)
    interp = RegularGridInterpolator((w.q_axis, w.p_axis), w.values, method="cubic",
                                     bounds_error=False, fill_value=0.0)
    span = max(w.q_axis[-1], w.p_axis[-1])
    t = np.linspace(-span * np.sqrt(2.0), span * np.sqrt(2.0), 2 * w.q_axis.size)
    c, s = np.cos(theta), np.sin(theta)
    qq = q_axis[:, None] * c - t[None, :] * s
    pp = q_axis[:, None] * s + t[None, :] * c
    vals = interp(np.stack([qq.ravel(), pp.ravel()], axis=-1)).reshape(qq.shape)
    return np.trapezoid(vals, t, axis=1)
