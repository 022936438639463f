"""Regenerate ``tests/data/oracles.json``. Run once; the file is committed frozen."""

import json
from pathlib import Path

from oracles import all_values

if __name__ == "__main__":
    out = Path(__file__).with_name("data") / "oracles.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(all_values(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
