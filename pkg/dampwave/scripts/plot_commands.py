"""Gnuplot commands for the CSVs of a run directory

Usage:
    python -m dampwave.scripts.plot_commands runs/sim              # print to stdout
    python -m dampwave.scripts.plot_commands runs/sim -o plots.gp  # write a script
    gnuplot plots.gp
"""
import argparse
import logging
import sys
from pathlib import Path

from dampwave.storage.artifacts import read_csv

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
log = logging.getLogger("plot_commands")

# header -> (x column, y columns, title); columns are 1-based for gnuplot
PLOTS = {
    ("t", "E", "D_cumulative", "residual"): (1, [2, 3], "energy ledger"),
    ("t", "exact_norm", "bound", "ratio"): (1, [2, 3], "decay estimate"),
    ("n", "constant"): (1, [2], "embedding constant"),
    ("x", "u"): (1, [2], "grid function"),
}


def commands_for(path: Path) -> list[str]:
    header, _ = read_csv(path)
    key = tuple(header)
    out = [f"set title '{path.stem}'", "set datafile separator ','", "set key autotitle columnhead"]
    if key == ("t", "x", "u", "v"):
        # trajectories are blocks of rows per time; plot u over (x, t)
        out += ["set xlabel 'x'", "set ylabel 't'", f"splot '{path}' using 2:1:3 with points pt 7 ps 0.3"]
        return out
    if key == ("index", "basin_hits", "residual_l2", "x", "u"):
        out += [f"plot '{path}' using 4:5:1 with points palette pt 7 ps 0.4"]
        return out
    if key not in PLOTS:
        return []
    x, ys, title = PLOTS[key]
    if title == "decay estimate":
        out.append("set logscale xy")
    curves = ", ".join(f"'{path}' using {x}:{y} with lines" for y in ys)
    out += [f"set xlabel '{header[x - 1]}'", f"plot {curves}", "unset logscale"]
    return out


def emit(run_dir: Path) -> list[str]:
    lines = ["set terminal pngcairo size 900,600"]
    for path in sorted(run_dir.rglob("*.csv")):
        cmds = commands_for(path)
        if not cmds:
            log.debug(f"no plot recipe for {path}")
            continue
        lines.append(f"set output '{path.with_suffix('.png')}'")
        lines += cmds
        lines.append("reset")
    return lines


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("run_dir", type=Path, help="Directory produced by a dampwave command")
    parser.add_argument("-o", "--output", type=Path, help="Write the gnuplot script here")
    args = parser.parse_args()
    if not args.run_dir.is_dir():
        log.error(f"❌ {args.run_dir} is not a directory")
        sys.exit(2)
    script = "\n".join(emit(args.run_dir)) + "\n"
    if args.output:
        args.output.write_text(script)
        log.info(f"✅ wrote {args.output}")
    else:
        sys.stdout.write(script)
