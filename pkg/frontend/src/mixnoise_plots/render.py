"""Figure rendering for persisted experiment artifacts."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LogNorm
from matplotlib.patches import Ellipse

from .io import PlotInputError, load_chain, read_json, resolve

KINDS = ("gmm-hist", "sensor-marginals", "astro-maps", "calibration-surface")


@dataclass
class PlotJob:
    kind: str
    inputs: list = field(default_factory=list)
    output: str | Path = "figure.png"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotInputError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise PlotInputError("at least one input path is required")


@dataclass
class RenderResult:
    path: Path
    panels: int
    overlays: int
    width_px: int
    height_px: int


SAVE_DPI = 110


def _save(fig, output: Path, panels: int, overlays: int) -> RenderResult:
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=SAVE_DPI)
    w, h = (int(round(s * SAVE_DPI)) for s in fig.get_size_inches())
    plt.close(fig)
    return RenderResult(path=output, panels=panels, overlays=overlays, width_px=w, height_px=h)


def render_gmm_hist(job: PlotJob) -> RenderResult:
    """2-D histogram of the chain in logarithmic color norm with 2-sigma mode ellipses."""
    samples, _ = load_chain(job.inputs)
    target = read_json(resolve(job.inputs, "gmm_target.json"))
    pts = samples[:, 0, :]
    lo = np.asarray(target["box_lower"], dtype=float)
    hi = np.asarray(target["box_upper"], dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    ax.hist2d(pts[:, 0], pts[:, 1], bins=150, range=[[lo[0], hi[0]], [lo[1], hi[1]]],
              norm=LogNorm(), cmap="viridis")
    overlays = 0
    for mean, cov in zip(target["means"], target["covs"]):
        vals, vecs = np.linalg.eigh(np.asarray(cov))
        angle = float(np.degrees(np.arctan2(vecs[1, -1], vecs[0, -1])))
        ell = Ellipse(mean, width=4 * np.sqrt(vals[-1]), height=4 * np.sqrt(vals[0]),
                      angle=angle, fill=False, color="red", lw=1.2)
        ax.add_patch(ell)
        overlays += 1
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_xlabel(r"$\theta_1$")
    ax.set_ylabel(r"$\theta_2$")
    fig.tight_layout()
    return _save(fig, job.output, panels=1, overlays=overlays)


def render_sensor_marginals(job: PlotJob) -> RenderResult:
    """Post-burn-in position scatter per sensor with the true-scene graph."""
    samples, _ = load_chain(job.inputs)
    scene = read_json(resolve(job.inputs, "sensor_scene.json"))
    truth = np.asarray(scene["positions_true"], dtype=float)
    anchors = np.asarray(scene["anchors"], dtype=float)
    censored = np.asarray(scene["c"], dtype=bool)
    n = truth.shape[0]
    fig, ax = plt.subplots(figsize=(5.4, 5.0))
    cmap = plt.get_cmap("tab10")
    step = max(1, samples.shape[0] // 4000)
    for s in range(n):
        pts = samples[::step, s, :]
        ax.scatter(pts[:, 0], pts[:, 1], s=2, alpha=0.25, color=cmap(s % 10))
    # graph overlay: observed pairs
    overlays = 0
    pos = np.vstack([truth, anchors])
    for s in range(n):
        for ell in range(pos.shape[0]):
            if ell != s and not censored[s][ell]:
                ax.plot([truth[s, 0], pos[ell, 0]], [truth[s, 1], pos[ell, 1]],
                        color="gray", lw=0.7, zorder=1)
                overlays += 1
    ax.scatter(truth[:, 0], truth[:, 1], marker="o", s=45, color="blue", zorder=3, label="unknown (true)")
    ax.scatter(anchors[:, 0], anchors[:, 1], marker="s", s=60, color="red", zorder=3, label="anchors")
    ax.set_xlim(scene["box_lower"][0], scene["box_upper"][0])
    ax.set_ylim(scene["box_lower"][1], scene["box_upper"][1])
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, job.output, panels=1, overlays=overlays)


def render_astro_maps(job: PlotJob) -> RenderResult:
    """Per-parameter rows: ground truth, posterior-mean estimate, CI width."""
    stats = read_json(resolve(job.inputs, "stats.json"))
    for key in ("truth", "mean", "ci_rel_width", "grid_height", "grid_width"):
        if key not in stats:
            raise PlotInputError(f"stats.json lacks {key!r}; run the diagnose stage for astro")
    h, w = int(stats["grid_height"]), int(stats["grid_width"])
    truth = np.asarray(stats["truth"], dtype=float)
    mean = np.asarray(stats["mean"], dtype=float)
    ci = np.asarray(stats["ci_rel_width"], dtype=float)
    d = truth.shape[1]
    fig, axes = plt.subplots(d, 3, figsize=(9.6, 2.6 * d), squeeze=False)
    panels = 0
    for k in range(d):
        t_map = truth[:, k].reshape(h, w)
        m_map = mean[:, k].reshape(h, w)
        c_map = ci[:, k].reshape(h, w)
        vmin = min(t_map.min(), m_map.min())
        vmax = max(t_map.max(), m_map.max())
        for col, (data, title, kwargs) in enumerate((
            (t_map, f"map {k + 1}: truth", dict(vmin=vmin, vmax=vmax, cmap="inferno")),
            (m_map, "posterior mean", dict(vmin=vmin, vmax=vmax, cmap="inferno")),
            (c_map, "95% CI width (% box)", dict(cmap="cividis")),
        )):
            ax = axes[k][col]
            im = ax.imshow(data, origin="lower", **kwargs)
            ax.set_title(title, fontsize=9)
            ax.set_xticks([])
            ax.set_yticks([])
            fig.colorbar(im, ax=ax, fraction=0.046)
            panels += 1
    fig.tight_layout()
    return _save(fig, job.output, panels=panels, overlays=0)


def render_calibration_surface(job: PlotJob) -> RenderResult:
    """Expected-KS landscape over candidate (a0, a1) pairs, one panel per channel."""
    blend = read_json(resolve(job.inputs, "blend.json"))
    channels = blend.get("channels", [])
    if not channels:
        raise PlotInputError("blend.json holds no channels")
    n = len(channels)
    cols = min(n, 5)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.0 * cols, 2.7 * rows), squeeze=False)
    panels = 0
    for i, ch in enumerate(channels):
        ax = axes[i // cols][i % cols]
        surf = ch["surface"]
        a0 = np.asarray(surf["a0"], dtype=float)
        a1 = np.asarray(surf["a1"], dtype=float)
        phi = np.asarray(surf["phi"], dtype=float)
        sc = ax.scatter(a0, a1, c=-np.log10(phi), s=14, cmap="viridis")
        ax.plot([ch["a0"]], [ch["a1"]], marker="*", color="red", ms=11)
        ax.set_title(f"channel {i}: phi*={ch['phi']:.3g}", fontsize=8)
        fig.colorbar(sc, ax=ax, fraction=0.05)
        panels += 1
    for j in range(n, rows * cols):
        axes[j // cols][j % cols].axis("off")
    fig.tight_layout()
    return _save(fig, job.output, panels=panels, overlays=0)


_RENDERERS = {
    "gmm-hist": render_gmm_hist,
    "sensor-marginals": render_sensor_marginals,
    "astro-maps": render_astro_maps,
    "calibration-surface": render_calibration_surface,
}


def render(job: PlotJob) -> RenderResult:
    """Dispatch on figure kind; raises PlotInputError before any file is written."""
    return _RENDERERS[job.kind](job)
