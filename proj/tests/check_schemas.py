"""Runs the CLI and validates every JSON output against the shipped schemas."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

cli, schema_dir = sys.argv[1], pathlib.Path(sys.argv[2])


def schema(name):
    return json.loads((schema_dir / f"{name}-v1.schema.json").read_text())


def run(*args):
    subprocess.run([cli, *args], check=True, stdout=subprocess.DEVNULL)


with tempfile.TemporaryDirectory() as tmp:
    t = pathlib.Path(tmp)
    cases = [
        (["solve", "--d", "3", "--solver", "both", "--out", str(t / "solve.json")], "solve.json", "metrics"),
        (["solve", "--d", "3", "--domain", "0,0:2,0:1.6,1:0.4,1", "--bc", "left=dirichlet,bottom=dirichlet",
          "--force", "100,-50", "--quadrature", "midpoint", "--save-u", str(t / "u.qtt"), "--out", str(t / "s2.json")],
         "s2.json", "metrics"),
        (["bench", "--d-min", "2", "--d", "3", "--solver", "both", "--repeats", "2", "--format", "json",
          "--out", str(t / "bench.json")], "bench.json", "metrics"),
        (["validate", "--d", "2", "--out", str(t / "validate.json")], "validate.json", "validation"),
        (["export", "--in", str(t / "u.qtt"), "--out", str(t / "dump.json")], "dump.json", "qtt1-dump"),
    ]
    for args, out, name in cases:
        run(*args)
        jsonschema.validate(json.loads((t / out).read_text()), schema(name))
        print("valid:", out)
