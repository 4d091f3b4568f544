"""Tiny helper: expose a dataclass's fields as ``--flags``."""

import argparse
import dataclasses
import json


def parse(cls, argv=None):
    parser = argparse.ArgumentParser(description=cls.__doc__)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        kind = json.loads if isinstance(default, (list, tuple, dict)) else type(default)
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=kind, default=default,
                            help=f"default: {json.dumps(default)}")
    return cls(**vars(parser.parse_args(argv)))
