"""Registration hyperparameters as one frozen dataclass + JSON round trip."""

import dataclasses
import json
from dataclasses import dataclass


@dataclass(frozen=True)
class RegConfig:
    """Everything the optimizer and its post-filter need.

    lambda0/lambda1 weight similarity vs smoothness in
    total = lambda0*(-ncc) + lambda1*reg.  levels lists
    (downsample_factor, iterations) pairs, coarse to fine, ending at
    factor 1.  learning_rate drives the Adam steps on the field, in
    voxels; network_learning_rate (4e-4) is the conventional value for
    training a predictor network — kept in the schema for reference,
    but far too small for moving voxels directly, so the field steps
    do not use it.
    """

    lambda0: float = 1.0
    lambda1: float = 6.0
    learning_rate: float = 0.1
    network_learning_rate: float = 4e-4
    levels: tuple = ((4, 100), (2, 60), (1, 30))
    ncc_window: int = 9
    ncc_mode: str = "local"   # "local" (windowed, default) or "global"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    bf_enabled: bool = True
    bf_per_level: bool = False
    bf_sigma_spatial: float = 1.5
    bf_sigma_range: float | None = None  # None -> 0.1 * guide intensity range
    bf_radius: int | None = None         # None -> ceil(3 * sigma_spatial)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.lambda0 < 0 or self.lambda1 < 0:
            raise ValueError("loss weights must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.ncc_window < 3 or self.ncc_window % 2 == 0:
            raise ValueError(f"ncc_window must be odd and >= 3, got {self.ncc_window}")
        if self.ncc_mode not in ("local", "global"):
            raise ValueError(f"ncc_mode must be 'local' or 'global', got {self.ncc_mode!r}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        levels = tuple((int(f), int(n)) for f, n in self.levels)
        if not levels or levels[-1][0] != 1:
            raise ValueError(f"levels must end at factor 1, got {levels}")
        factors = [f for f, _ in levels]
        if any(a <= b for a, b in zip(factors, factors[1:])):
            raise ValueError(f"level factors must be strictly descending, got {factors}")
        for f, n in levels:
            if f < 1 or (f & (f - 1)) != 0:
                raise ValueError(f"level factors must be powers of two, got {f}")
            if n <= 0:
                raise ValueError(f"iterations must be positive, got {n}")
        if self.bf_sigma_spatial <= 0:
            raise ValueError("bf_sigma_spatial must be positive")
        if self.bf_sigma_range is not None and self.bf_sigma_range <= 0:
            raise ValueError("bf_sigma_range must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        object.__setattr__(self, "levels", levels)

    def replace(self, **kw) -> "RegConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["levels"] = [list(lv) for lv in self.levels]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "levels" in d:
            d = dict(d, levels=tuple(tuple(lv) for lv in d["levels"]))
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "RegConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
