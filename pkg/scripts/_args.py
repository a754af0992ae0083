"""Build an argparse parser from a dataclass so each script's settings live in one place."""

from __future__ import annotations

import argparse
import dataclasses


def parse_into(cls, description: str, argv=None):
    parser = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default
        kind = type(default) if default is not None else str
        if kind is bool:
            parser.add_argument(f"--{f.name.replace('_', '-')}", action=argparse.BooleanOptionalAction, default=default)
        else:
            parser.add_argument(f"--{f.name.replace('_', '-')}", type=kind, default=default, help=f.metadata.get("help"))
    return cls(**vars(parser.parse_args(argv)))
