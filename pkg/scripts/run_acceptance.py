"""Run the acceptance suite and print one PASS/FAIL line per criterion.

    python3 scripts/run_acceptance.py [--only 2 3 7] [--threads 1]
"""

import argparse
import os
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class AcceptanceConfig:
    only: list = field(default_factory=list)
    threads: int = 1
    verbose: bool = False


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--only", type=int, nargs="*", default=[], help="criterion numbers to run")
    p.add_argument("--threads", type=int, default=1, help="value for QCURV_THREADS")
    p.add_argument("-v", "--verbose", action="store_true")
    a = p.parse_args(argv)
    return AcceptanceConfig(a.only, a.threads, a.verbose)


def main(argv=None):
    cfg = parse_args(argv)
    cmd = [sys.executable, "-m", "pytest", str(ROOT / "tests" / "test_acceptance.py"), "-q",
           "-p", "no:cacheprovider"]
    if cfg.only:
        cmd += ["-k", " or ".join(f"criterion_{n:02d}" for n in cfg.only)]
    if not cfg.verbose:
        cmd += ["--tb=no"]
    env = dict(os.environ, QCURV_THREADS=str(cfg.threads))
    proc = subprocess.run(cmd, cwd=ROOT, env=env, capture_output=True, text=True)
    lines = [ln for ln in proc.stdout.splitlines() if ln.startswith("criterion ")]
    for ln in lines:
        print(ln)
    if cfg.verbose or not lines:
        print(proc.stdout)
        print(proc.stderr, file=sys.stderr)
    passed = sum(" PASS " in ln for ln in lines)
    print(f"{passed}/{len(lines)} criteria pass")
    return 0 if lines and passed == len(lines) else 1


if __name__ == "__main__":
    sys.exit(main())
