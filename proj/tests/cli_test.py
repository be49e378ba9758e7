"""Exit codes and outputs of the command-line tool.

Usage: cli_test.py <affdiff executable> <source dir>
"""
import json
import pathlib
import subprocess
import sys
import tempfile

EXE = sys.argv[1]
SRC = pathlib.Path(sys.argv[2])

SMALL = {
    "name": "cli",
    "topology": "net1",
    "filter_len": 2,
    "agents": {"sigma_x2": 1.0, "sigma_z2": 0.05},
    "targets": {"stages": [{"start": 0, "w": [0.5, -0.3]}]},
    "components": [{"a2": "identity", "mu": 0.05}, {"a2": "averaging", "mu": 0.05}],
    "combiner": {"scheme": "power_normalized", "nu": 0.01},
    "horizon": 300,
    "runs": 20,
    "seed": 3,
}

failures = []


def run(*args, expect):
    p = subprocess.run([EXE, *map(str, args)], capture_output=True, text=True)
    if p.returncode != expect:
        failures.append(f"{args}: exit {p.returncode}, expected {expect}\n{p.stdout}{p.stderr}")
    return p


with tempfile.TemporaryDirectory() as d:
    d = pathlib.Path(d)
    cfg = d / "small.json"
    cfg.write_text(json.dumps(SMALL))

    out = run("validate", cfg, expect=0).stdout
    if "valid" not in out or "density=0.4400" not in out:
        failures.append("validate output: " + out)
    run("validate", SRC / "configs" / "tracking_adaptive_pn.json", expect=0)

    run("simulate", cfg, "-o", d / "sim.csv", expect=0)
    run("simulate", cfg, "-o", d / "sim.json", "-w", "3", expect=0)
    out = run("theory", cfg, "-o", d / "th.json", expect=0).stdout
    if "universality" not in out:
        failures.append("theory summary: " + out)
    run("theory", cfg, "-o", d / "th.csv", expect=0)

    header = (d / "sim.csv").read_text().splitlines()
    if len(header) != 301 or not header[0].startswith("n,msd_1,msd_2,msd_cross,msd,"):
        failures.append("CSV layout: " + header[0])
    meta = json.loads((d / "sim.json").read_text())
    if meta["runs"] != 20 or meta["seed"] != 3 or len(meta["config_hash"]) != 16:
        failures.append("JSON metadata: " + str({k: meta[k] for k in ("runs", "seed", "config_hash")}))

    out = run("compare", d / "th.json", d / "th.json", expect=0).stdout
    if "PASS" not in out:
        failures.append("self comparison: " + out)
    run("compare", d / "sim.json", d / "th.json", "--tol-msd-db", "3", "--tol-gamma", "0.2", expect=0)
    run("compare", d / "sim.csv", d / "th.csv", "--tol-msd-db", "0", "--tol-gamma", "0", expect=1)

    short = dict(SMALL, horizon=100)
    (d / "short.json").write_text(json.dumps(short))
    run("theory", d / "short.json", "-o", d / "short.csv", expect=0)
    run("compare", d / "sim.csv", d / "short.csv", expect=1)

    (d / "broken.json").write_text("{ not json")
    run("validate", d / "broken.json", expect=2)
    run("simulate", d / "missing.json", "-o", d / "x.csv", expect=2)
    run("simulate", cfg, "-o", d / "no" / "such" / "dir.csv", expect=2)
    (d / "bad.json").write_text(json.dumps(dict(SMALL, horizon=0)))
    run("validate", d / "bad.json", expect=1)
    adaptive = dict(SMALL, components=[{"a2_mode": "adaptive_projection", "mu": 0.05}, {"mu": 0.05}])
    (d / "adaptive.json").write_text(json.dumps(adaptive))
    run("theory", d / "adaptive.json", "-o", d / "a.csv", expect=1)
    run("frobnicate", expect=2)
    run(expect=2)

if failures:
    print("\n".join(failures))
    sys.exit(1)
print("cli: all checks passed")
