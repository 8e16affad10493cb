"""Co-data learning study: mean AUC of the inclusion probabilities per
co-data scenario, driven through the ``infhs benchmark`` command."""

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from _common import parse_into
from infhs.cli import main as cli


@dataclass
class Config:
    scenarios: str = "main_G0..main_G4"
    n: int = 100
    p: int = 500
    p0: int = 30
    replicates: int = 5
    engines: str = "vb"
    seed: int = 0
    out: str = "results/auc"


def main(cfg: Config):
    code = cli(["benchmark", "--scenarios", cfg.scenarios, "--n", str(cfg.n), "--p", str(cfg.p),
                "--p0", str(cfg.p0), "--replicates", str(cfg.replicates), "--engines", cfg.engines,
                "--seed", str(cfg.seed), "--no-strict", "--out", cfg.out])
    if code:
        raise SystemExit(code)
    table = defaultdict(list)
    with (Path(cfg.out) / "auc_by_scenario.csv").open() as fh:
        for row in csv.DictReader(fh):
            for k, v in row.items():
                if k.startswith("auc_"):
                    table[(row["scenario"], k)].append(float(v))
    for (scn, col), vals in table.items():
        print(f"{scn:12s} {col:10s} mean {sum(vals) / len(vals):.4f} over {len(vals)} replicates")


if __name__ == "__main__":
    main(parse_into(Config, __doc__))
