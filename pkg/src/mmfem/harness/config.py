"""Study configuration and rate reports for the experiment harness."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

STUDY_KINDS = ("convergence", "thin", "condscale", "electro")

_KIND_ALIASES = {
    "condition_scaling": "condscale",
    "electrostatics": "electro",
}

# JSON uses the short physical names; the dataclass uses descriptive ones.
_KEY_ALIASES = {"N": "n_parts", "p": "degrees"}


@dataclass
class StudyConfig:
    """Configuration of one harness run; JSON files mirror these fields
    (with ``N`` for ``n_parts`` and ``p`` for ``degrees``)."""

    study: str
    n_parts: int = 1
    degrees: list = field(default_factory=lambda: [1])
    levels: int = 4
    coarsest: int = 8
    seed: int = 0
    beta0: float = None
    beta1: float = None
    out_dir: str = "."
    # thin / condition-scaling studies
    thin_k: list = field(default_factory=lambda: [0, 8, 16, 32, 52])
    x0_fixed: float = 2.48e-16
    # electrostatics
    steps: int = 50
    dt: float = 0.2
    box_half: float = 1.2
    bg_half: float = 2.4
    bg_cells: int = 24
    body_cells: int = 2
    snapshot_every: int = 0
    # reporting
    figures: bool = True
    dump_matrix: bool = False
    dump_quadrature: bool = False

    def __post_init__(self):
        self.study = _KIND_ALIASES.get(self.study, self.study)
        if self.study not in STUDY_KINDS:
            raise ValueError(f"unknown study kind {self.study!r}")
        if isinstance(self.degrees, int):
            self.degrees = [self.degrees]
        if self.levels < 2 and self.study in ("convergence", "condscale"):
            raise ValueError("need at least 2 levels to fit rates")
        if self.n_parts < 0:
            raise ValueError("n_parts must be nonnegative")

    @classmethod
    def from_dict(cls, data):
        kwargs = {}
        for key, value in data.items():
            kwargs[_KEY_ALIASES.get(key, key)] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self):
        return asdict(self)


@dataclass
class RateReport:
    """Per-level errors of one (N, p) series and least-squares rates of
    log(error) against log(h)."""

    n_parts: int
    degree: int
    h: list
    ndof: list
    err_l2: list
    err_h1: list
    l2_rate: float
    h1_rate: float


def fit_rate(hs, errors):
    """Least-squares slope of log(error) vs log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0.0) or np.any(hs <= 0.0):
        raise ValueError("rates need positive mesh sizes and errors")
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def write_csv(path, header, rows):
    """Plain CSV writer with repr formatting (deterministic, lossless)."""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(repr(v) if isinstance(v, float) else str(v)
                             for v in row) + "\n")


def write_metadata(path, cfg, extra):
    data = {"config": cfg.to_dict()}
    data.update(extra)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)
