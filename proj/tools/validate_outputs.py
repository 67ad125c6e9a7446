#!/usr/bin/env python3
"""Runs the ioext CLI over the model corpus and validates every JSON artifact."""

import argparse
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema
from referencing import Registry, Resource


def load_registry(schema_dir):
    schemas = {}
    for path in sorted(schema_dir.glob("*.schema.json")):
        schemas[path.name] = json.loads(path.read_text())
    registry = Registry().with_resources([(s["$id"], Resource.from_contents(s)) for s in schemas.values()])
    return schemas, registry


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ioext", required=True)
    ap.add_argument("--models", required=True, type=Path)
    ap.add_argument("--schemas", required=True, type=Path)
    args = ap.parse_args()

    schemas, registry = load_registry(args.schemas)
    by_tag = {s["properties"]["schema"]["const"]: s for s in schemas.values()}
    for s in schemas.values():
        jsonschema.Draft202012Validator.check_schema(s)

    failures = 0
    checked = 0

    def validate(doc, origin):
        nonlocal failures, checked
        tag = doc.get("schema")
        if tag not in by_tag:
            print(f"FAIL {origin}: unknown schema tag {tag!r}")
            failures += 1
            return
        v = jsonschema.Draft202012Validator(by_tag[tag], registry=registry)
        errors = sorted(v.iter_errors(doc), key=lambda e: list(e.path))
        checked += 1
        if errors:
            failures += 1
            for e in errors[:5]:
                print(f"FAIL {origin} [{tag}] at {'/'.join(map(str, e.path))}: {e.message}")
        else:
            print(f"ok   {origin} [{tag}]")

    def run(cmd, origin, expect):
        proc = subprocess.run([args.ioext] + cmd, capture_output=True, text=True)
        nonlocal failures
        if proc.returncode not in expect:
            print(f"FAIL {origin}: exit {proc.returncode}, expected {sorted(expect)}\n{proc.stderr}")
            failures += 1
            return
        if proc.stdout.lstrip().startswith("{"):
            validate(json.loads(proc.stdout), origin)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for model in sorted(args.models.glob("*.sys")):
            stem = model.stem
            infeasible = "infeasible" in stem
            run(["analyze", str(model)], f"analyze {stem}", {0})
            run(["check", str(model)], f"check {stem}", {3} if infeasible else {0})
            emitted = tmp / f"{stem}.json"
            run(["synthesize", str(model), "--emit", str(emitted)], f"synthesize {stem}", {0})
            if emitted.exists():
                validate(json.loads(emitted.read_text()), f"emitted {stem}")
            trace = tmp / f"{stem}.trace.json"
            run(["simulate", str(model), "--format", "json", "--out", str(trace)], f"simulate {stem}",
                {4} if infeasible else {0})
            if trace.exists():
                validate(json.loads(trace.read_text()), f"trace {stem}")
        run(["simulate", str(args.models / "linear_chain.sys"), "--sweep", "1,3", "--format", "json",
             "--out", str(tmp / "sweep.json")], "sweep linear_chain", {0})
        for p in sorted(tmp.glob("sweep_*.json")):
            validate(json.loads(p.read_text()), f"trace {p.name}")

    print(f"{checked} documents checked, {failures} failures")
    return 1 if failures or checked == 0 else 0


if __name__ == "__main__":
    sys.exit(main())
