"""
Draw data profiles written by ``bdfo profile``
==============================================

Usage: ``python demos/render_profiles.py PROFILE_DIR [OUT.png]``.
Needs matplotlib; the benchmark itself does not.
"""
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

src = sys.argv[1] if len(sys.argv) > 1 else "profiles"
out = sys.argv[2] if len(sys.argv) > 2 else os.path.join(src, "profiles.png")

fig, ax = plt.subplots(figsize=(6, 4))
for path in sorted(glob.glob(os.path.join(src, "profile_*.csv"))):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")][1:]
    xs = [float(a) for a, _ in rows]
    ys = [float(b) for _, b in rows]
    label = os.path.basename(path)[len("profile_"):-len(".csv")]
    ax.step(xs + [max(xs + [1.0]) * 1.5], ys + ys[-1:], where="post", label=label)
ax.set_xscale("symlog")
ax.set_xlabel("distinct queries / (n + 1)")
ax.set_ylabel("fraction solved")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(out, dpi=120)
print(out)
