"""Drive the command line interface: validate, run, then eval.

Run: python3 demos/08_cli_tour.py
"""

import subprocess
import sys
import tempfile
from pathlib import Path

from modalflow.synthetic import make_s2st_fixture

CONFIG = Path(__file__).parent / "configs" / "summarize_translate.json"


def cli(*args):
    cmd = [sys.executable, "-m", "modalflow.cli", *args]
    print("$ modalflow", " ".join(args))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    for stream in (proc.stdout, proc.stderr):
        for line in stream.splitlines():
            print(" ", line)
    print()
    return proc


with tempfile.TemporaryDirectory() as scratch:
    root = Path(scratch)

    cli("validate", "--config", str(CONFIG))

    out_dir = root / "run-out"
    cli(
        "run", "--config", str(CONFIG),
        "--input", "src=The demo begins now. Everything after this is detail.",
        "--out-dir", str(out_dir),
    )
    print("dst.txt ->", (out_dir / "dst.txt").read_text(encoding="utf-8"))
    print()

    manifest = make_s2st_fixture(
        root / "s2st", ["buenos dias", "hasta luego"], source="es", target="en"
    )
    cli("eval", "--task", "s2st", "--manifest", str(manifest))
