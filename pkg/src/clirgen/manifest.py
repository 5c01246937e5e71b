"""Run-level bookkeeping: counts, fanout, token usage, and cost.

Every numeric field is reproducible from the stage artifact files, and the
arithmetic identities (generated = valid + rejected + errors; total cost =
sum of per-record costs) hold exactly - money is Decimal and serialized as
strings.
"""
from __future__ import annotations

from decimal import Decimal


def build_manifest(
    config: dict,
    corpus_stats: dict,
    mine_stats: dict,
    generate_stats: dict,
    validation_stats: dict,
    duration_seconds: float,
) -> dict:
    valid = validation_stats.get("valid", 0)
    total_cost = Decimal(generate_stats.get("total_cost_usd", "0"))
    cost_per_1k = (
        str((total_cost / valid * 1000).quantize(Decimal("0.01"))) if valid else None
    )
    fanout = validation_stats.get("fanout", {})
    return {
        "config": config,
        "corpus": dict(corpus_stats),
        "pairs": dict(mine_stats),
        "prompts": {
            "issued": generate_stats.get("issued", 0),
            "succeeded": generate_stats.get("succeeded", 0),
            "failed": generate_stats.get("failed", 0),
            "truncated": generate_stats.get("truncated", 0),
            "budget_rejected": generate_stats.get("budget_rejected", 0),
            "tokens_estimated": generate_stats.get("tokens_estimated", 0),
        },
        "tokens": {
            "prompt": generate_stats.get("prompt_tokens", 0),
            "output": generate_stats.get("output_tokens", 0),
            "total": generate_stats.get("prompt_tokens", 0) + generate_stats.get("output_tokens", 0),
        },
        "cost": {
            "unit_cost_per_1k_usd": generate_stats.get("unit_cost_per_1k", "0"),
            "total_usd": str(total_cost),
            "per_1k_valid_triples_usd": cost_per_1k,
        },
        "queries": {
            "generated": validation_stats.get("generated", 0),
            "parse_warnings": generate_stats.get("parse_warnings", 0),
        },
        "validation": {
            "valid": valid,
            "rejected_margin": validation_stats.get("rejected_margin", 0),
            "rejected_inverted": validation_stats.get("rejected_inverted", 0),
            "scorer_errors": validation_stats.get("scorer_errors", 0),
            "pair_count": validation_stats.get("pair_count", 0),
            "triples_per_pair": validation_stats.get("triples_per_pair", 0.0),
            "fanout_max": max(fanout.values(), default=0),
        },
        "duration_seconds": duration_seconds,
    }


def manifest_identity_violations(manifest: dict) -> list[str]:
    """Check the exact arithmetic the manifest promises. Empty = healthy."""
    out = []
    v = manifest["validation"]
    q = manifest["queries"]
    expected = v["valid"] + v["rejected_margin"] + v["rejected_inverted"] + v["scorer_errors"]
    if q["generated"] != expected:
        out.append(f"generated {q['generated']} != valid+rejected+errors {expected}")
    p = manifest["prompts"]
    if p["issued"] != p["succeeded"] + p["failed"]:
        out.append(f"prompts issued {p['issued']} != succeeded+failed")
    t = manifest["tokens"]
    if t["total"] != t["prompt"] + t["output"]:
        out.append("token total mismatch")
    return out
