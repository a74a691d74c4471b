"""Deterministic SVG plots (matplotlib, Agg backend, fixed hash salt, no date)."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "curliso"
matplotlib.rcParams["svg.fonttype"] = "none"


def _to_svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def psi_contours(mesh, psi, title: str = "", levels: int = 20) -> str:
    tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    fig, ax = plt.subplots(figsize=(5, 5))
    cs = ax.tricontourf(tri, psi, levels=levels, cmap="RdBu_r")
    ax.tricontour(tri, psi, levels=levels, colors="k", linewidths=0.3)
    fig.colorbar(cs, ax=ax, label="psi")
    ax.set_aspect("equal")
    ax.set_xlabel("r")
    ax.set_ylabel("z")
    ax.set_title(title)
    return _to_svg(fig)


def boundary_speed(samples, c_estimate: float | None = None, title: str = "") -> str:
    samples = np.asarray(samples)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(samples[:, 0], samples[:, 1], lw=1.2, label="|X|")
    if c_estimate is not None:
        ax.axhline(c_estimate, color="gray", ls="--", lw=0.8, label="mean")
    ax.set_xlabel("arclength")
    ax.set_ylabel("|X| on boundary")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _to_svg(fig)


def sweep_objective(parameters, objectives, xlabel: str = "parameter") -> str:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(parameters, objectives, "o-")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("lambda_plus * vol^(1/3)")
    fig.tight_layout()
    return _to_svg(fig)
