"""The full command-line workflow, driven from Python.

Equivalent shell session:

    phasorloc simulate --preset AI-2 --frames 40 --seed 7 --out run/sim
    phasorloc encode   --preset AI-2 --gt run/sim/emitters.csv \
                       --frames 40 --out run/maps
    phasorloc decode   --maps run/maps --out run/seeds.csv
    phasorloc evaluate --gt run/sim/emitters.csv --pred run/seeds.csv
    phasorloc filter   --pred run/seeds.csv --gt run/sim/emitters.csv \
                       --rates 0,0.2,0.4,0.6 --out run/curve.txt
    phasorloc render   --pred run/seeds.csv --bin-size 20 --out run/top.png
    phasorloc residuals --preset AI-2 --density 4.13 --seed 7 \
                       --max-frames 800 --out run/resid

Every output is byte-reproducible for a fixed --seed, also with --workers.
"""

import shutil
from pathlib import Path

from phasorloc import cli, formats

run = Path("demo_output/cli_run")
if run.exists():
    shutil.rmtree(run)
run.mkdir(parents=True)

steps = [
    ["simulate", "--preset", "AI-2", "--frames", "40", "--seed", "7",
     "--out", str(run / "sim")],
    ["encode", "--preset", "AI-2", "--gt", str(run / "sim" / "emitters.csv"),
     "--frames", "40", "--out", str(run / "maps")],
    ["decode", "--maps", str(run / "maps"), "--out", str(run / "seeds.csv")],
    ["evaluate", "--gt", str(run / "sim" / "emitters.csv"),
     "--pred", str(run / "seeds.csv"), "--out", str(run / "report.txt")],
    ["filter", "--pred", str(run / "seeds.csv"),
     "--gt", str(run / "sim" / "emitters.csv"),
     "--rates", "0,0.2,0.4,0.6", "--out", str(run / "curve.txt")],
    ["render", "--pred", str(run / "seeds.csv"), "--bin-size", "20",
     "--out", str(run / "top.png")],
    ["residuals", "--preset", "AI-2", "--density", "4.13", "--seed", "7",
     "--max-frames", "800", "--out", str(run / "resid")],
]

for argv in steps:
    print(f"\n$ phasorloc {' '.join(argv)}")
    rc = cli.main(argv)
    assert rc == 0, f"step failed with exit code {rc}"

report = formats.read_report(run / "report.txt")
print(f"\nchain finished: ji={report.ji:.4f}, "
      f"rmse_3d={report.rmse_3d:.3f} nm over {report.n_frames} frames")
