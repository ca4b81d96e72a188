#!/usr/bin/env python3
"""Runs every CLI command into a scratch directory and validates each artifact against docs/schemas."""

import csv
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema
from referencing import Registry, Resource


def load_registry(schema_dir):
    schemas = {}
    resources = []
    for path in sorted(schema_dir.glob("*.schema.json")):
        doc = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(doc)
        schemas[path.name] = doc
        resources.append((doc["$id"], Resource.from_contents(doc)))
    return schemas, Registry().with_resources(resources)


class Checker:
    def __init__(self, cli, schema_dir, workdir):
        self.cli = cli
        self.work = workdir
        self.schemas, self.registry = load_registry(schema_dir)
        self.columns = json.loads((schema_dir / "csv_columns.json").read_text())
        self.failures = []
        self.checked = 0

    def run(self, *args, expect=0):
        proc = subprocess.run([self.cli, *args], cwd=self.work, capture_output=True, text=True)
        if proc.returncode != expect:
            self.failures.append(f"{' '.join(args)}: exit {proc.returncode} (wanted {expect}): {proc.stderr.strip()}")
        return proc

    def validate(self, doc, schema_name, label):
        self.checked += 1
        v = jsonschema.Draft202012Validator(self.schemas[schema_name], registry=self.registry)
        errors = sorted(v.iter_errors(doc), key=lambda e: list(e.path))
        for e in errors[:5]:
            self.failures.append(f"{label} vs {schema_name}: {'/'.join(map(str, e.path))}: {e.message}")

    def file(self, name, schema_name):
        path = self.work / name
        if not path.exists():
            self.failures.append(f"{name}: missing")
            return None
        doc = json.loads(path.read_text())
        self.validate(doc, schema_name, name)
        return doc

    def stdout(self, proc, schema_name, label):
        try:
            doc = json.loads(proc.stdout)
        except json.JSONDecodeError as exc:
            self.failures.append(f"{label}: stdout is not JSON ({exc})")
            return None
        self.validate(doc, schema_name, label)
        return doc

    def csv_header(self, name, key):
        self.checked += 1
        path = self.work / name
        if not path.exists():
            self.failures.append(f"{name}: missing")
            return
        with path.open() as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != self.columns[key]:
            self.failures.append(f"{name}: header {rows[0] if rows else None} != {self.columns[key]}")
            return
        for r in rows[1:]:
            if len(r) != len(rows[0]):
                self.failures.append(f"{name}: ragged row {r}")
                return
            for cell in r:
                float(cell)


def main():
    cli, schema_dir = str(Path(sys.argv[1]).resolve()), Path(sys.argv[2]).resolve()
    with tempfile.TemporaryDirectory() as tmp:
        c = Checker(cli, schema_dir, Path(tmp))

        c.run("gen", "--m", "10", "--p", "3", "--seed", "7", "-o", "inst.json")
        c.file("inst.json", "instance.schema.json")
        c.run("gen", "--m", "12", "--p", "3", "--stream", "6", "-o", "stream.json")
        c.file("stream.json", "stream.schema.json")
        c.run("gen", "--m", "16", "--p", "2", "--classification", "--stream", "6", "-o", "cstream.json")
        c.file("cstream.json", "stream.schema.json")

        for method in ("cd", "path"):
            c.run("solve", "--instance", "inst.json", "--lambda1", "0.05", "--lambda2", "0.1", "--method", method,
                  "-o", f"solve_{method}.json")
            c.file(f"solve_{method}.json", "solve_result.schema.json")
        c.run("path", "--instance", "inst.json", "--lambda2", "0.2", "-o", "path.json")
        c.file("path.json", "path_result.schema.json")

        for mode in ("ridge", "lasso", "en"):
            for obj in ("val", "aic", "bic"):
                out = f"erm_{mode}_{obj}.json"
                c.run("tune-erm", "--stream", "stream.json", "--mode", mode, "--objective", obj, "--slices", "8",
                      "--refine", "4", "-o", out)
                c.file(out, "tuning_result.schema.json")

        for mode in ("ridge", "lasso", "en"):
            out = f"online_{mode}.json"
            c.run("tune-online", "--horizon", "12", "--mode", mode, "--slices", "4", "--seed", "3", "-o", out,
                  "--rounds-csv", f"rounds_{mode}.csv", "--regret-csv", f"curve_{mode}.csv")
            c.file(out, "regret_report.schema.json")
            c.csv_header(f"rounds_{mode}.csv", "rounds-csv")
            c.csv_header(f"curve_{mode}.csv", "regret-csv")
        c.run("tune-online", "--stream", "stream.json", "--doubling", "--zeta", "0.3", "--eps", "0.1,0.5",
              "-o", "online_stream.json")
        c.file("online_stream.json", "regret_report.schema.json")

        for mode in ("ridge", "lasso", "en"):
            c.run("classify-tune", "--stream", "cstream.json", "--mode", mode, "--slices", "3", "-o", f"ct_{mode}.json")
            c.file(f"ct_{mode}.json", "classify_result.schema.json")
            c.run("classify-online", "--stream", "cstream.json", "--mode", mode, "--tau-grid", "4",
                  "--lambda2-slices", "2", "-o", f"co_{mode}.json", "--rounds-csv", f"co_rounds_{mode}.csv",
                  "--regret-csv", f"co_curve_{mode}.csv")
            c.file(f"co_{mode}.json", "regret_report.schema.json")
            c.csv_header(f"co_rounds_{mode}.csv", "rounds-csv")
            c.csv_header(f"co_curve_{mode}.csv", "regret-csv")
        c.run("classify-tune", "--stream", "cstream.json", "--tau", "-1,1", "-o", "ct_tau.json")
        c.file("ct_tau.json", "classify_result.schema.json")

        c.run("diagnose-dispersion", "--horizon", "20", "--mode", "en", "--slices", "3", "-o", "disp.json",
              "--breakpoints-csv", "bps.csv")
        c.file("disp.json", "dispersion_report.schema.json")
        c.csv_header("bps.csv", "breakpoints-csv")

        p = c.run("experiment", "sample-complexity", "--trials", "3", "--n-values", "1,2,4", "-o", "sc.csv")
        c.stdout(p, "experiment_summary.schema.json", "sample-complexity summary")
        c.csv_header("sc.csv", "experiment sample-complexity")
        c.run("experiment", "sample-complexity", "--instance", "inst.json", "--cv", "mccv", "--trials", "2",
              "--n-values", "1,3", "-o", "sc2.csv", "--summary", "sc2.json")
        c.file("sc2.json", "experiment_summary.schema.json")
        p = c.run("experiment", "regret", "--T-values", "20,40", "--seeds", "0,1", "-o", "rg.csv")
        c.stdout(p, "experiment_summary.schema.json", "regret summary")
        c.csv_header("rg.csv", "experiment regret")
        p = c.run("experiment", "dispersion", "--T-values", "20,40", "--seeds", "0", "-o", "dx.csv")
        c.stdout(p, "experiment_summary.schema.json", "dispersion summary")
        c.csv_header("dx.csv", "experiment dispersion")

        # Echoed configs must also reject bad values under the same schema.
        bad = json.loads((c.work / "erm_lasso_val.json").read_text())
        bad["config"]["mode"] = "bogus"
        v = jsonschema.Draft202012Validator(c.schemas["tuning_result.schema.json"], registry=c.registry)
        c.checked += 1
        if v.is_valid(bad):
            c.failures.append("schema accepted an unknown mode")

        for f in c.failures:
            print("FAIL:", f)
        print(f"{c.checked} artifacts checked, {len(c.failures)} failures")
        return 1 if c.failures else 0


if __name__ == "__main__":
    sys.exit(main())
