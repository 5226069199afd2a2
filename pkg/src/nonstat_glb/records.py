from __future__ import annotations

import csv
import hashlib
import json
import io
from dataclasses import dataclass

CSV_HEADER = "seed,t,algo,arm,reward,regret,cum_regret,theta_hat_norm,outside_theta"


@dataclass(frozen=True)
class RoundRecord:
    seed: int
    t: int
    algo: str
    arm: int
    reward: float
    regret: float
    cum_regret: float
    theta_hat_norm: float
    outside_theta: int

    def row(self) -> list[str]:
        return [
            str(self.seed), str(self.t), self.algo, str(self.arm), repr(float(self.reward)),
            repr(float(self.regret)), repr(float(self.cum_regret)), repr(float(self.theta_hat_norm)),
            str(self.outside_theta),
        ]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


def read_csv(path) -> list[RoundRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            RoundRecord(
                seed=int(r["seed"]), t=int(r["t"]), algo=r["algo"], arm=int(r["arm"]),
                reward=float(r["reward"]), regret=float(r["regret"]), cum_regret=float(r["cum_regret"]),
                theta_hat_norm=float(r["theta_hat_norm"]), outside_theta=int(r["outside_theta"]),
            )
            for r in reader
        ]


def config_hash(obj) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(v):
    if hasattr(v, "tolist"):
        return v.tolist()
    raise TypeError(f"cannot hash {type(v).__name__}")
