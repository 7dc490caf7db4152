"""Rerun the zambon worked example and print one verdict per check.

    python3 scripts/reproduce_zambon.py [outdir]
"""
import sys
from pathlib import Path

from shla.reproduce import reproduce_zambon

if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
    out.mkdir(parents=True, exist_ok=True)
    lines, ok = reproduce_zambon(out)
    print("\n".join(lines))
    sys.exit(0 if ok else 1)
