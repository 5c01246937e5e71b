"""Run report: figures plus a delimited per-pair summary.

Renders distribution plots (fanout, margins, pair score ratios, token
usage) as PNGs next to a report.tsv so a run can be eyeballed without
loading the artifact files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .records import read_json, read_jsonl


def _save(fig, path: Path, written: list[Path]) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)


def write_report(workdir: str | Path, outdir: str | Path) -> list[Path]:
    """Render figures and the per-pair TSV from a run's artifact files.
    Returns the paths written."""
    workdir, outdir = Path(workdir), Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    manifest = read_json(workdir / "manifest.json")
    triples = list(read_jsonl(workdir / "triples.jsonl")) if (workdir / "triples.jsonl").exists() else []
    pair_recs = list(read_jsonl(workdir / "pairs.jsonl")) if (workdir / "pairs.jsonl").exists() else []

    generated: dict[str, int] = {}
    valid: dict[str, int] = {}
    for t in triples:
        generated[t["pair_id"]] = generated.get(t["pair_id"], 0) + 1
        if t["valid"]:
            valid[t["pair_id"]] = valid.get(t["pair_id"], 0) + 1

    tsv = outdir / "report.tsv"
    with tsv.open("w", encoding="utf-8") as f:
        f.write("pair_id\tgenerated\tvalid\tscore_ratio\n")
        for rec in pair_recs:
            pid = rec["pair_id"]
            f.write(f"{pid}\t{generated.get(pid, 0)}\t{valid.get(pid, 0)}\t{rec['score_ratio']:.4f}\n")
    written.append(tsv)

    if valid or generated:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        fanouts = [valid.get(pid, 0) for pid in generated]
        ax.hist(fanouts, bins=range(0, max(fanouts, default=0) + 2), color="#4878a8", edgecolor="white")
        ax.set_xlabel("valid triples per pair")
        ax.set_ylabel("pairs")
        ax.set_title(f"fanout (mean {manifest['validation']['triples_per_pair']:.2f})")
        _save(fig, outdir / "fanout_hist.png", written)

    margins = [t["margin"] for t in triples if t["margin"] is not None]
    if margins:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(margins, bins=40, color="#4878a8", edgecolor="white")
        tau = manifest["config"]["validation"]["tau"]
        ax.axvline(tau, color="#c23b22", linestyle="--", label=f"tau = {tau}")
        ax.set_xlabel("margin")
        ax.set_ylabel("triples")
        ax.set_title("relevance margins")
        ax.legend()
        _save(fig, outdir / "margin_hist.png", written)

    ratios = [rec["score_ratio"] for rec in pair_recs]
    if ratios:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(ratios, bins=30, color="#4878a8", edgecolor="white")
        ax.set_xlabel("negative / positive BM25 score ratio")
        ax.set_ylabel("pairs")
        ax.set_title("pair separation")
        _save(fig, outdir / "ratio_hist.png", written)

    tokens = manifest.get("tokens", {})
    if tokens.get("total"):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        ax.bar(["prompt", "output"], [tokens["prompt"], tokens["output"]], color=["#4878a8", "#76a86b"])
        ax.set_ylabel("tokens")
        cost = manifest["cost"]["total_usd"]
        ax.set_title(f"token usage (cost ${cost})")
        _save(fig, outdir / "token_usage.png", written)

    return written
