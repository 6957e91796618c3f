"""Run every config in demos/configs through the CLI and summarise the exit codes.

Reports land in demos/out/.  multi_end_disjoint.json is expected to exit with 2
(disconnected components are rejected).
"""
import json
import sys
import time
from pathlib import Path

from hypint import cli

HERE = Path(__file__).parent


def main(argv):
    names = argv or sorted(p.stem for p in (HERE / "configs").glob("*.json"))
    out = HERE / "out"
    out.mkdir(exist_ok=True)
    for name in names:
        cfg = HERE / "configs" / f"{name}.json"
        command = json.loads(cfg.read_text())["command"]
        t0 = time.perf_counter()
        code = cli.main([command, "--config", str(cfg), "--out", str(out / f"{name}.json")])
        print(f"{name:32s} exit {code}  {time.perf_counter() - t0:6.1f} s")


if __name__ == "__main__":
    main(sys.argv[1:])
