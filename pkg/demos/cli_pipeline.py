"""The command-line workflow on the shipped two-block instance.

Equivalent shell session, run from ``demos/data``::

    qvident synth   --config run.cfg --a-true a_true.txt --sigma 0.001 --out z.txt
    qvident forward --config run.cfg --a a_true.txt --out u.txt --report report.txt
    qvident verify  --config run.cfg --a a_true.txt --u u.txt
    qvident invert  --config run.cfg --out a_out.txt --history history.csv
    qvident sweep   --config run.cfg --kappas 1e-6,1e-2,1e6 --out sweep.csv

Outputs are written to a temporary directory so the shipped inputs stay clean.
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

DATA = Path(__file__).resolve().parent / "data"

with tempfile.TemporaryDirectory() as tmp:
    for name in ("run.cfg", "a_true.txt"):
        shutil.copy(DATA / name, tmp)
    steps = [
        ["synth", "--a-true", "a_true.txt", "--sigma", "0.001", "--out", "z.txt"],
        ["forward", "--a", "a_true.txt", "--out", "u.txt", "--report", "report.txt"],
        ["verify", "--a", "a_true.txt", "--u", "u.txt"],
        ["invert", "--out", "a_out.txt", "--history", "history.csv"],
        ["sweep", "--kappas", "1e-6,1e-2,1e6", "--out", "sweep.csv"],
    ]
    for step in steps:
        cmd = [sys.executable, "-m", "qvident", step[0], "--config", "run.cfg", *step[1:]]
        out = subprocess.run(cmd, cwd=tmp, capture_output=True, text=True)
        print(f"$ qvident {' '.join(step)}  -> exit {out.returncode}")
        if out.stdout:
            print(out.stdout.rstrip())
    print("\nreport.txt:")
    print(Path(tmp, "report.txt").read_text().rstrip())
    print("\nsweep.csv:")
    print(Path(tmp, "sweep.csv").read_text().rstrip())
    a_out = Path(tmp, "a_out.txt").read_text().splitlines()
    print(f"\nrecovered blocks: {a_out[-64].split(',')[1]} ... {a_out[-1].split(',')[1]}")
