#!/usr/bin/env python3
"""Triage accuracy report over the curated verifier-error corpus.

Parses every stored diagnostic block, compares the assigned category to
the hand label, and prints a per-category table plus the accuracy on
non-Unknown labels (the number the release gate checks at >= 90%).

Usage: python3 scripts/triage_report.py [--corpus path] [--show-misses]
"""

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from proofkit.runner import parse_diagnostics

DEFAULT_CORPUS = Path(__file__).resolve().parents[1] / "tests" / "data" / "error_corpus.jsonl"


def predicted_category(block):
    errors = [d for d in parse_diagnostics(block) if d.severity == "error"]
    return errors[0].category.value if errors else "(no error parsed)"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", default=DEFAULT_CORPUS, type=Path)
    parser.add_argument("--show-misses", action="store_true",
                        help="print each mislabeled block's first line")
    args = parser.parse_args()

    entries = [
        json.loads(line)
        for line in args.corpus.read_text().splitlines()
        if line.strip()
    ]
    totals: Counter = Counter()
    correct: Counter = Counter()
    misses = []
    for entry in entries:
        label = entry["label"]
        predicted = predicted_category(entry["block"])
        totals[label] += 1
        if predicted == label:
            correct[label] += 1
        else:
            misses.append((label, predicted, entry["block"].splitlines()[0]))

    width = max(len(k) for k in totals)
    print(f"{'label'.ljust(width)}  blocks  correct")
    for label in sorted(totals):
        print(f"{label.ljust(width)}  {totals[label]:6d}  {correct[label]:7d}")

    labeled = sum(n for k, n in totals.items() if k != "Unknown")
    right = sum(n for k, n in correct.items() if k != "Unknown")
    print(f"\ncorpus: {sum(totals.values())} blocks, {labeled} with non-Unknown labels")
    print(f"non-Unknown accuracy: {right}/{labeled} = {right / labeled:.1%} (gate: >= 90%)")

    if misses:
        print(f"\nmislabeled blocks: {len(misses)}")
        if args.show_misses:
            for label, predicted, first_line in misses:
                print(f"  labeled {label}, predicted {predicted}: {first_line!r}")
        else:
            print("  (re-run with --show-misses for details)")


if __name__ == "__main__":
    main()
