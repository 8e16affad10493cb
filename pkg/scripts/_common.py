"""Tiny helper: expose a dataclass as argparse flags."""

import argparse
from dataclasses import fields


def parse_into(cls, description):
    ap = argparse.ArgumentParser(description=description)
    for f in fields(cls):
        flag = "--" + f.name.replace("_", "-")
        if f.type in (bool, "bool"):
            ap.add_argument(flag, action="store_true", default=f.default)
        else:
            kind = {"int": int, "float": float, "str": str}.get(str(f.type), type(f.default))
            ap.add_argument(flag, type=kind, default=f.default)
    return cls(**vars(ap.parse_args()))
