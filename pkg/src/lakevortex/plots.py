"""Static post-run figures (Agg backend, no display needed)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_trajectories(res, path) -> None:
    lake = res.lake
    fig, ax = plt.subplots(figsize=(5, 5))
    b = np.where(lake.mask, lake.b_cells, np.nan)
    ext = [lake.origin[0], lake.origin[0] + lake.shape[0] * lake.h,
           lake.origin[1], lake.origin[1] + lake.shape[1] * lake.h]
    im = ax.imshow(b.T, origin="lower", extent=ext, cmap="Blues", alpha=0.6)
    fig.colorbar(im, ax=ax, shrink=0.8, label="depth b")
    for i, lim in enumerate(res.limits):
        z = res.series.centers(i)
        ax.plot(z[:, 0], z[:, 1], "-", lw=1.5, label=f"blob {i} center")
        ax.plot(lim.z[:, 0], lim.z[:, 1], "k--", lw=1, label="limit" if i == 0 else None)
    ax.set_aspect("equal")
    ax.set_title(f"{res.cfg.scenario}, eps={res.eps:g}")
    ax.legend(loc="upper right", fontsize=7)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_scaling(report: dict, path) -> None:
    eps = np.asarray(report["eps"])
    laws = report["blobs"][0]["laws"]
    fig, axes = plt.subplots(2, (len(laws) + 1) // 2, figsize=(12, 6))
    for ax, (name, law) in zip(np.ravel(axes), laws.items()):
        for k, blob in enumerate(report["blobs"]):
            ax.plot(np.abs(np.log(eps)), blob["laws"][name]["values"], "o-", label=f"blob {k}")
        ax.set_title(f"{name}: {law['verdict']}", fontsize=9)
        ax.set_xlabel("|ln eps|")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
