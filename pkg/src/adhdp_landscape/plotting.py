"""
SVG figures for the analysis tables.

All figures are written through matplotlib's SVG backend with a fixed hash
salt, no date stamp and text kept as ``<text>`` elements, so identical input
gives byte-identical files. The default canvas is 960x720 SVG units.

The 3-D trajectory view min-max normalizes each axis to [0, 1] and maps it
to the page with the fixed isometric matrix :data:`ISOMETRIC`::

    [u]   [ cos30  -cos30  0 ] [x]
    [v] = [-sin30  -sin30  1 ] [y]
                               [z]
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import LogNorm, Normalize  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

DEFAULT_SIZE = (960, 720)
_C30, _S30 = np.cos(np.pi / 6), np.sin(np.pi / 6)
ISOMETRIC = np.array([[_C30, -_C30, 0.0], [-_S30, -_S30, 1.0]])

_RC = {
    "svg.hashsalt": "adhdp-landscape",
    "svg.fonttype": "none",
    "font.size": 13,
    "axes.titlesize": 15,
    "axes.labelsize": 14,
    "figure.dpi": 72,
    "savefig.dpi": 72,
}


@dataclass
class FigureSpec:
    kind: str                               # heatmap | line | scatter | trajectory3d
    input_path: Path
    output_path: Path
    xlabel: str = ""
    ylabel: str = ""
    zlabel: str = ""
    title: str = ""
    log_scale: bool = False
    contours: int = 10
    size: Tuple[int, int] = DEFAULT_SIZE
    x_column: str = ""
    y_columns: Sequence[str] = field(default_factory=tuple)
    z_column: str = ""
    overlay_path: Optional[Path] = None
    select: Optional[Tuple[str, float]] = None


class EmptyInputError(ValueError):
    pass


# =============================================================================
# Input
# =============================================================================

def read_table(path, required=()):
    """Numeric CSV with a header row -> (header list, float array)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split(",")
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}: row {lineno} has {len(parts)} fields, expected {len(header)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"{path}: row {lineno} is not numeric: {line!r}") from None
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def _columns(spec, names):
    header, data = read_table(spec.input_path, required=list(names) + ([spec.select[0]] if spec.select else []))
    if spec.select:
        data = data[data[:, header.index(spec.select[0])] == spec.select[1]]
    if len(data) == 0:
        raise EmptyInputError(f"{spec.input_path}: no data rows to plot")
    return [data[:, header.index(n)] for n in names]


def grid_from_table(path):
    """Rebuild ``(alpha_axis, beta_axis, values)`` from a landscape CSV."""
    header, data = read_table(path, required=("alpha", "beta", "loss"))
    if len(data) == 0:
        raise EmptyInputError(f"{path}: no grid rows")
    a, b, loss = (data[:, header.index(c)] for c in ("alpha", "beta", "loss"))
    alpha, beta = np.unique(a), np.unique(b)
    if len(alpha) * len(beta) != len(data):
        raise ValueError(f"{path}: {len(data)} rows do not form a {len(alpha)}x{len(beta)} grid")
    values = np.empty((len(alpha), len(beta)))
    values[np.searchsorted(alpha, a), np.searchsorted(beta, b)] = loss
    return alpha, beta, values


def _check_log(values, what):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size and v.min() <= 0:
        raise ValueError(f"log scale needs positive {what}; smallest value is {v.min()!r}")


# =============================================================================
# Figures
# =============================================================================

def _new_figure(size):
    w, h = size
    fig = plt.figure(figsize=(w / 72.0, h / 72.0), dpi=72)
    return fig


def save_svg(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # the hash salt is read at save time, so the rc context must cover savefig
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def heatmap_figure(alpha, beta, values, trajectory=None, spec=None):
    spec = spec or FigureSpec("heatmap", Path(), Path())
    with plt.rc_context(_RC):
        fig = _new_figure(spec.size)
        ax = fig.add_subplot(111)
        finite = np.isfinite(values)
        masked = np.ma.masked_invalid(values.T)   # rows of the image are beta
        fv = values[finite]
        if spec.log_scale:
            _check_log(fv, "loss values")
            norm = LogNorm(vmin=fv.min(), vmax=fv.max()) if fv.size else None
        else:
            lo, hi = (fv.min(), fv.max()) if fv.size else (0.0, 1.0)
            norm = Normalize(vmin=lo, vmax=hi if hi > lo else lo + 1.0)
        mesh = ax.pcolormesh(alpha, beta, masked, shading="nearest", cmap="viridis", norm=norm)
        mesh.set_gid("heatmap")
        fig.colorbar(mesh, ax=ax, label="loss")

        if fv.size and fv.max() > fv.min() and spec.contours > 0 and min(values.shape) >= 2:
            if spec.log_scale:
                levels = np.geomspace(fv.min(), fv.max(), spec.contours + 2)[1:-1]
            else:
                levels = np.linspace(fv.min(), fv.max(), spec.contours + 2)[1:-1]
            cs = ax.contour(alpha, beta, masked, levels=levels, colors="white", linewidths=0.8)
            cs.set_gid("contours")

        if not finite.all():
            da = (alpha[1] - alpha[0]) if len(alpha) > 1 else 1.0
            db = (beta[1] - beta[0]) if len(beta) > 1 else 1.0
            for i, j in zip(*np.nonzero(~finite)):
                ax.add_patch(Rectangle((alpha[i] - da / 2, beta[j] - db / 2), da, db, fill=False,
                                       hatch="////", edgecolor="0.4", linewidth=0, gid=f"nonfinite_{i}_{j}"))

        if trajectory is not None and len(trajectory):
            (line,) = ax.plot(trajectory[:, 0], trajectory[:, 1], "-o", color="tab:red",
                              markersize=3, linewidth=1.2, label="snapshots")
            line.set_gid("trajectory")
            ax.plot(trajectory[-1, 0], trajectory[-1, 1], "*", color="tab:red", markersize=12)
        ax.set_xlabel(spec.xlabel or "alpha (PC1)")
        ax.set_ylabel(spec.ylabel or "beta (PC2)")
        if spec.title:
            ax.set_title(spec.title)
    return fig


def render_heatmap(grid_csv, spec):
    alpha, beta, values = grid_from_table(grid_csv)
    traj = None
    if spec.overlay_path is not None:
        header, data = read_table(spec.overlay_path, required=("alpha", "beta"))
        traj = data[:, [header.index("alpha"), header.index("beta")]]
    return save_svg(heatmap_figure(alpha, beta, values, traj, spec), spec.output_path)


def line_figure(x, ys, labels, spec):
    with plt.rc_context(_RC):
        fig = _new_figure(spec.size)
        ax = fig.add_subplot(111)
        for y, label in zip(ys, labels):
            if spec.log_scale:
                _check_log(y, label)
            (line,) = ax.plot(x, y, linewidth=1.2, label=label)
            line.set_gid(f"series_{label}")
        if spec.log_scale:
            ax.set_yscale("log")
        if len(ys) > 1:
            ax.legend(loc="best")
        ax.set_xlabel(spec.xlabel or spec.x_column)
        ax.set_ylabel(spec.ylabel)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, alpha=0.3)
    return fig


def render_line(series_csv, spec):
    spec.input_path = series_csv
    cols = _columns(spec, [spec.x_column, *spec.y_columns])
    fig = line_figure(cols[0], cols[1:], list(spec.y_columns), spec)
    return save_svg(fig, spec.output_path)


def scatter_figure(x, y, spec):
    if spec.log_scale:
        _check_log(y, spec.ylabel or "y values")
    with plt.rc_context(_RC):
        fig = _new_figure(spec.size)
        ax = fig.add_subplot(111)
        pts = ax.scatter(x, y, s=6, c=np.arange(len(x)), cmap="plasma", linewidths=0)
        pts.set_gid("points")
        fig.colorbar(pts, ax=ax, label="sample index")
        if spec.log_scale:
            ax.set_yscale("log")
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, alpha=0.3)
    return fig


def render_scatter(pairs_csv, spec):
    spec.input_path = pairs_csv
    x, y = _columns(spec, [spec.x_column, spec.y_columns[0]])
    return save_svg(scatter_figure(x, y, spec), spec.output_path)


def normalize_unit(v):
    v = np.asarray(v, dtype=float)
    lo, hi = v.min(), v.max()
    if hi > lo:
        return (v - lo) / (hi - lo)
    return np.full_like(v, 0.5)


def isometric_project(points):
    """Map (n, 3) points already scaled to the unit cube onto the page plane."""
    return np.asarray(points, dtype=float) @ ISOMETRIC.T


def trajectory3d_figure(x, y, z, spec):
    pts = np.column_stack((normalize_unit(x), normalize_unit(y), normalize_unit(z)))
    uv = isometric_project(pts)
    with plt.rc_context(_RC):
        fig = _new_figure(spec.size)
        ax = fig.add_subplot(111)
        ax.set_aspect("equal")
        ax.axis("off")
        # unit-cube frame: the three back walls' edges
        corners = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
                            [1, 1, 0], [1, 0, 1], [0, 1, 1]], dtype=float)
        edges = [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (1, 5), (3, 5), (2, 6), (3, 6)]
        cp = isometric_project(corners)
        for a, b in edges:
            ax.plot(cp[[a, b], 0], cp[[a, b], 1], color="0.75", linewidth=0.8)
        labels = (spec.xlabel or "x", spec.ylabel or "y", spec.zlabel or "z")
        ranges = [(np.min(v), np.max(v)) for v in (x, y, z)]
        for k, (corner, label) in enumerate(zip(cp[1:4], labels)):
            ax.annotate(f"{label}\n[{ranges[k][0]:.3g}, {ranges[k][1]:.3g}]", corner,
                        ha="center", va="center", fontsize=11, color="0.2",
                        xytext=(0, 18 if k == 2 else -22), textcoords="offset points")
        (line,) = ax.plot(uv[:, 0], uv[:, 1], color="tab:blue", linewidth=1.0)
        line.set_gid("trajectory")
        ax.plot(uv[0, 0], uv[0, 1], "o", color="tab:green", markersize=6)
        ax.plot(uv[-1, 0], uv[-1, 1], "s", color="tab:red", markersize=6)
        ax.margins(0.12)
        if spec.title:
            ax.set_title(spec.title)
    return fig


def render_traj3d(triples_csv, spec):
    spec.input_path = triples_csv
    x, y, z = _columns(spec, [spec.x_column, spec.y_columns[0], spec.z_column])
    return save_svg(trajectory3d_figure(x, y, z, spec), spec.output_path)


def data_pixel_coords(fig):
    """Display coordinates of every plotted data vertex (lines and scatter points)."""
    fig.canvas.draw()
    out = []
    for ax in fig.axes:
        for line in ax.get_lines():
            xy = np.column_stack(line.get_data())
            out.append(ax.transData.transform(xy))
        for coll in ax.collections:
            offs = coll.get_offsets()
            if len(offs) and coll.get_gid() == "points":
                out.append(ax.transData.transform(offs))
    return np.vstack(out) if out else np.zeros((0, 2))
