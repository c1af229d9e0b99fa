#!/usr/bin/env python3
"""Validate JSON documents against the schemas in ../schemas.

usage: validate_json.py SCHEMA_NAME FILE...
SCHEMA_NAME is eval_report, eval_summary or run_manifest.
"""
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource

SCHEMAS = pathlib.Path(__file__).resolve().parent.parent / "schemas"


def registry():
    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        schema = json.loads(path.read_text())
        resources.append((schema["$id"], Resource.from_contents(schema)))
    return Registry().with_resources(resources)


def validate(name, document):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    jsonschema.Draft202012Validator(schema, registry=registry()).validate(document)


def main(argv):
    if len(argv) < 3:
        print(__doc__, file=sys.stderr)
        return 2
    for path in argv[2:]:
        try:
            validate(argv[1], json.loads(pathlib.Path(path).read_text()))
        except (jsonschema.ValidationError, json.JSONDecodeError, OSError) as err:
            print(f"{path}: {err}", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
