"""Deterministic SVG line charts for diagnostics bundles."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed salt and no date stamp keep SVG bytes reproducible
matplotlib.rcParams["svg.hashsalt"] = "stablefield"
matplotlib.rcParams["svg.fonttype"] = "path"
_META = {"Date": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def theta_traces(path, n_grid, thetas, target=None, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    for row in np.asarray(thetas):
        ax.plot(n_grid, row, color="0.5", lw=0.6, alpha=0.6)
    if target is not None:
        ax.axhline(target, color="C3", lw=1.2, label="E h(X_0)")
        ax.legend()
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("cube average")
    ax.set_title(title)
    _save(fig, path)


def cf_fit(path, theta, empirical, model, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(theta, empirical, "o", ms=4, label="empirical")
    ax.plot(theta, model, "-", label="model")
    ax.set_xlabel("theta")
    ax.set_ylabel("Re cf")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def maxima_loglog(path, n_grid, medians, exponent, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    n = np.asarray(n_grid, dtype=float)
    m = np.asarray(medians, dtype=float)
    ax.loglog(n, m, "o-", label="median max |X_t|")
    ref = m[0] * (n / n[0]) ** exponent
    ax.loglog(n, ref, "--", label=f"slope {exponent:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("M_n")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)
