#!/usr/bin/env python3
"""Tour of the built-in phantoms and their tracer kinetics.

A phantom is a hard partition of the image grid into K tissue regions plus
one concentration curve per region.  Curves come from convolving a bolus
arterial input with an exponential washout kernel, so each region is fully
described by a washout rate and an amplitude.  This script renders every
preset's region map, its regional time-activity curves, and a few frames of
the resulting dynamic image.

Run:  python demos/01_phantoms_and_curves.py
Figures are written to demos/output/.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dynspect.kinetics import (
    PHANTOM_PRESETS,
    ArterialInput,
    basis_curve,
    make_phantom,
    render_frames,
)
from dynspect.tomo import ImageGeometry

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

M, N = 45, 64
geom = ImageGeometry(N, N)

# --- the arterial input and the effect of the washout rate ----------------
inp = ArterialInput.bolus(M, dt=1.0, peak_time=4.5)
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(inp.samples, "k--", label="arterial input")
for rate in (0.0, 0.1, 0.3, 0.6):
    ax.plot(basis_curve(inp, rate), label=f"washout rate {rate}")
ax.set_xlabel("time step")
ax.set_ylabel("concentration")
ax.set_title("Tissue response to a bolus input for different washout rates")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "01_washout_rates.png", dpi=120)
print("rate 0 accumulates forever; larger rates wash the tracer out faster")

# --- every preset: region map + curves + sample frames --------------------
for preset in sorted(PHANTOM_PRESETS):
    ph = make_phantom(preset, geom, M)
    frames = render_frames(ph)
    print(f"{preset:16s}  K={ph.K}  region sizes="
          f"{[int((ph.region_map == k).sum()) for k in range(ph.K)]}")

    fig, axes = plt.subplots(1, 5, figsize=(16, 3.2))
    axes[0].imshow(ph.region_map.reshape(N, N), cmap="tab10", vmax=9)
    axes[0].set_title(f"{preset}: regions")
    for k in range(ph.K):
        axes[1].plot(ph.curves.values[:, k], label=f"region {k}")
    axes[1].set_title("regional curves")
    axes[1].legend(fontsize=7)
    for ax, t in zip(axes[2:], (2, M // 2, M - 1)):
        ax.imshow(frames[:, t].reshape(N, N), cmap="inferno")
        ax.set_title(f"frame t={t}")
    for ax in (axes[0], *axes[2:]):
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(OUT / f"01_phantom_{preset}.png", dpi=120)
    plt.close(fig)

print(f"\nfigures written to {OUT}/")
