"""Figures drawn from summary rows (matplotlib, file output only)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {"figure.figsize": (6.0, 4.0), "axes.grid": True, "grid.alpha": 0.3, "font.size": 9}


def _series(rows, **match):
    rows = [r for r in rows if all(r[k] == v for k, v in match.items())]
    rows.sort(key=lambda r: r["axis_value"])
    return rows


def _num(rows, key):
    return [float("nan") if r[key] == "" else r[key] for r in rows]


def plot_fig2(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        s = _series(rows)
        x = [r["axis_value"] for r in s]
        ax.fill_between(x, _num(s, "q25_rsse"), _num(s, "q75_rsse"), alpha=0.25, label="interquartile")
        ax.plot(x, _num(s, "median_rsse"), "o-", label="median RSSE")
        ax.axhline(1.0, color="k", lw=0.8, ls=":")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("m / (K d)")
        ax.set_ylabel("SSE / Lloyd SSE")
        ax2 = ax.twinx()
        ax2.bar(x, [r["failure_count"] for r in s], width=[0.15 * v for v in x], alpha=0.3, color="C3")
        ax2.set_ylabel("detected failures", color="C3")
        ax.legend(loc="upper right")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def plot_fig3(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for decoder in sorted({r["decoder"] for r in rows}):
            s = _series(rows, decoder=decoder)
            ax.plot([r["axis_value"] for r in s], _num(s, "median_cost"), marker="o",
                    ls="--" if decoder == "truth" else "-", label=decoder)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("m / (K d)")
        ax.set_ylabel("median sketch-matching cost")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def plot_fig4(rows, path):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6), sharey=True)
        for ax, task in zip(axes, ("kmeans", "gmm")):
            for law in sorted({r["law"] for r in rows}):
                s = _series(rows, law=law, task=task)
                ax.plot([r["axis_value"] for r in s], _num(s, "success_rate"), "o-", label=law)
            ax.set_title(task)
            ax.set_xlabel("log10 sigma")
            ax.set_ylim(-0.05, 1.05)
            ax.legend()
        axes[0].set_ylabel("success rate")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


PLOTTERS = {"fig2": plot_fig2, "fig3": plot_fig3, "fig4": plot_fig4}
