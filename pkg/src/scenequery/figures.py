"""Matplotlib figure rendering for reports and navigation paths."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.patches as patches
import matplotlib.pyplot as plt
import numpy as np


def render_report_figure(report, out_path) -> None:
    """Grouped bar chart of per-route metrics, reference rows hatched."""
    metric_keys = ["descriptive_precision", "descriptive_recall",
                   "affordance_success", "negation_success"]
    labels = ["desc P", "desc R", "aff SR", "neg SR"]
    routes = sorted(report.routes)
    refs = sorted(report.reference_rows)
    groups = [(r, report.routes[r], None) for r in routes]
    groups += [(f"{r}\n({report.reference_label})", report.reference_rows[r], "//")
               for r in refs]
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(groups), 4.0))
    x = np.arange(len(metric_keys))
    width = 0.8 / max(1, len(groups))
    for i, (name, metrics, hatch) in enumerate(groups):
        values = [metrics.get(k) if metrics.get(k) is not None else 0.0
                  for k in metric_keys]
        ax.bar(x + i * width, values, width, label=name, hatch=hatch,
               alpha=0.6 if hatch else 0.9)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("metric value")
    ax.set_title(f"query suite metrics: {report.scene_id}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def render_nav_figure(grid, out_path, path=None, boxes=None, start=None,
                      hits=None) -> None:
    """Top-down view: occupancy grid, object boxes, planned path."""
    fig, ax = plt.subplots(figsize=(7, 7))
    extent = [grid.origin[0], grid.origin[0] + grid.width * grid.cell_size,
              grid.origin[1], grid.origin[1] + grid.height * grid.cell_size]
    ax.imshow(np.where(grid.occupied, 0.25, 1.0), cmap="gray", origin="lower",
              extent=extent, vmin=0, vmax=1)
    for oid, aabb, cls in (boxes or []):
        lo, hi = aabb.min, aabb.max
        rect = patches.Rectangle((lo[0], lo[1]), hi[0] - lo[0], hi[1] - lo[1],
                                 fill=False, edgecolor="tab:blue", linewidth=1.2)
        ax.add_patch(rect)
        ax.annotate(f"{cls} #{oid}", (lo[0], hi[1]), fontsize=7,
                    color="tab:blue")
    for oid in (hits or []):
        for bid, aabb, _ in (boxes or []):
            if bid == oid:
                lo, hi = aabb.min, aabb.max
                rect = patches.Rectangle((lo[0], lo[1]), hi[0] - lo[0],
                                         hi[1] - lo[1], fill=False,
                                         edgecolor="tab:orange", linewidth=2.0)
                ax.add_patch(rect)
    if path is not None and path.waypoints:
        xs = [p[0] for p in path.waypoints]
        ys = [p[1] for p in path.waypoints]
        ax.plot(xs, ys, "-", color="tab:red", linewidth=1.6, label="path")
        ax.plot(xs[-1], ys[-1], "*", color="tab:green", markersize=12,
                label="goal")
    if start is not None:
        ax.plot(start[0], start[1], "o", color="tab:purple", markersize=8,
                label="start")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    if path is not None or start is not None:
        ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
