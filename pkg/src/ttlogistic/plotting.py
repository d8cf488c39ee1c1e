"""SVG line charts rendered from the exported CSV curves."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "ttlogistic"


def _read(path: Path) -> dict:
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_rate(csv_path, svg_path) -> Path:
    d = _read(Path(csv_path))
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, style in (("r_exact", "-"), ("r_tt", ":"), ("r_final", "--")):
        if key in d:
            ax.plot(d["t"], d[key], style, label=key[2:])
    ax.set_xlabel("t, hours")
    ax.set_ylabel("r(t)")
    ax.legend()
    return _save(fig, Path(svg_path))


def plot_psi(anchor_csv, profile_csv, svg_path) -> Path:
    a = _read(Path(anchor_csv))
    prof = _read(Path(profile_csv))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(a["x"], a["psi_exact"], "o", label="exact anchors")
    for key, style in (("psi_tt", ":"), ("psi_final", "--")):
        if key in prof:
            ax.plot(prof["x"], prof[key], style, label=key[4:])
    ax.set_xlabel("distance x")
    ax.set_ylabel("initial density")
    ax.legend()
    return _save(fig, Path(svg_path))


def plot_profiles(csv_path, svg_path) -> Path:
    d = _read(Path(csv_path))
    fig, ax = plt.subplots(figsize=(6, 4))
    hours = sorted(set(d["hours_after_release"]))
    for j, h in enumerate(hours):
        sel = [i for i, v in enumerate(d["hours_after_release"]) if v == h]
        x = [d["x"][i] for i in sel]
        color = f"C{j}"
        ax.plot(x, [d["y_exact"][i] for i in sel], "-", lw=2.5, color=color, label=f"{h:g} h")
        ax.plot(x, [d["y_predicted"][i] for i in sel], "--", color=color)
    ax.set_xlabel("distance x")
    ax.set_ylabel("density of influenced users")
    ax.legend(title="solid: synthetic, dashed: predicted", fontsize=8)
    return _save(fig, Path(svg_path))


def plot_directory(outdir) -> list[Path]:
    """Render every chart whose source CSV exists in ``outdir``."""
    out = Path(outdir)
    made = []
    if (out / "r_curve.csv").exists():
        made.append(plot_rate(out / "r_curve.csv", out / "r_curve.svg"))
    if (out / "psi.csv").exists() and (out / "psi_profile.csv").exists():
        made.append(plot_psi(out / "psi.csv", out / "psi_profile.csv", out / "psi.svg"))
    if (out / "profiles.csv").exists():
        made.append(plot_profiles(out / "profiles.csv", out / "profiles.svg"))
    return made
