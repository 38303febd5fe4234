"""Figure rendering for the report paths (loss curves, evaluation charts)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["save_loss_curve", "save_eval_chart"]


def save_loss_curve(loss_log, path) -> None:
    """Training-loss curve next to the CSV log."""
    iters = [row[0] for row in loss_log]
    losses = [row[1] for row in loss_log]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(iters, losses, lw=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("MSE loss")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_eval_chart(report, path) -> None:
    """Per-image PSNR/SSIM bars with dataset means."""
    names = [r.name for r in report.records]
    psnrs = [r.psnr for r in report.records]
    ssims = [r.ssim for r in report.records]
    x = range(len(names))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(max(6, 0.6 * len(names)), 5), sharex=True)
    ax1.bar(x, psnrs, color="#3b74b5")
    ax1.axhline(report.mean_psnr, color="#b53b3b", ls="--", lw=1,
                label=f"mean {report.mean_psnr:.2f} dB")
    ax1.set_ylabel("PSNR (dB)")
    ax1.legend(fontsize=8)
    ax2.bar(x, ssims, color="#52a06c")
    ax2.axhline(report.mean_ssim, color="#b53b3b", ls="--", lw=1,
                label=f"mean {report.mean_ssim:.4f}")
    ax2.set_ylabel("SSIM")
    ax2.set_xticks(list(x))
    ax2.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
