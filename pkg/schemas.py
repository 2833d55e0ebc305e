"""
Pydantic models for the despeckling toolkit's domain types.
"""

from pathlib import Path
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Estimation range for the equivalent number of looks
MIN_LOOKS = 0.5
MAX_LOOKS = 1000.0

METHODS = ("kl", "lee", "mean")
METRIC_NAMES = ("nel", "line_pres", "edge_grad", "edge_var", "q_index", "beta_rho")

# Label classes of the phantom
BACKGROUND, LINE, BLOCK, EDGE_BAND = 0, 1, 2, 3
LABEL_NAMES = {BACKGROUND: "background", LINE: "line", BLOCK: "block", EDGE_BAND: "edge-band"}


class GammaParams(BaseModel):
    """Shape L (equivalent number of looks) and mean backscatter λ of Γ(L, L/λ)."""
    model_config = ConfigDict(frozen=True)

    looks: float = Field(ge=MIN_LOOKS, le=MAX_LOOKS, description="Equivalent number of looks L")
    mean: float = Field(gt=0, description="Mean backscatter λ")


class RegionSample(BaseModel):
    """
    Flat list of positive intensities read through one window mask.

    A single value is a valid sample for the likelihood and for sampling
    (count 1). Estimation, ENL and the test statistic need at least 2 values
    and raise DomainError on fewer.
    """
    model_config = ConfigDict(frozen=True)

    values: list[float] = Field(min_length=1)

    @field_validator("values")
    @classmethod
    def _positive(cls, values: list[float]) -> list[float]:
        for index, value in enumerate(values):
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"value {value!r} at position {index} is not a positive intensity")
        return values

    @classmethod
    def from_array(cls, values) -> "RegionSample":
        return cls(values=np.asarray(values, dtype=np.float64).ravel().tolist())

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


class GammaFit(BaseModel):
    """Outcome of maximum-likelihood fitting, with convergence diagnostics."""
    params: GammaParams
    converged: bool
    iterations: int = Field(ge=0)
    method: Literal["newton", "moments"]


class DivergenceSpec(BaseModel):
    """An (h, φ)-divergence instance with the constants of its test statistic."""
    model_config = ConfigDict(frozen=True)

    name: str
    display_name: str
    description: str = ""
    scale_constant: float = Field(gt=0, description="k = (h'(0) φ''(1))^-1")
    degrees_of_freedom: int = Field(default=1, ge=1)
    phi: Callable[[float], float] = Field(exclude=True)
    h: Callable[[float], float] = Field(exclude=True)


class TestOutcome(BaseModel):
    """Result of one chi-square goodness-of-fit decision."""
    __test__ = False

    statistic: float = Field(ge=0)
    p_value: float = Field(ge=0, le=1)
    accepted: bool
    degrees_of_freedom: int = Field(ge=1)
    significance: float = Field(gt=0, lt=1)

    @model_validator(mode="after")
    def _decision_matches_p_value(self) -> "TestOutcome":
        if self.accepted != (self.p_value >= self.significance):
            raise ValueError("accepted must hold exactly when p_value >= significance")
        return self


Offset = tuple[int, int]


class WindowMaskSet(BaseModel):
    """Nine offset lists inside a 5x5 window: the central 3x3 then eight 7-pixel regions."""
    model_config = ConfigDict(frozen=True)

    names: tuple[str, ...]
    masks: tuple[tuple[Offset, ...], ...]

    @model_validator(mode="after")
    def _check_shapes(self) -> "WindowMaskSet":
        if len(self.masks) != 9 or len(self.names) != 9:
            raise ValueError("a window mask set holds exactly nine masks")
        expected = [9] + [7] * 8
        for name, mask, size in zip(self.names, self.masks, expected):
            if len(mask) != size or len(set(mask)) != size:
                raise ValueError(f"mask {name} must hold {size} distinct offsets")
            if any(abs(r) > 2 or abs(c) > 2 for r, c in mask):
                raise ValueError(f"mask {name} leaves the 5x5 window")
        central = {(r, c) for r in (-1, 0, 1) for c in (-1, 0, 1)}
        if set(self.masks[0]) != central:
            raise ValueError("mask 0 must be the central 3x3")
        return self

    @property
    def region_sizes(self) -> list[int]:
        return [len(mask) for mask in self.masks]


class FilterConfig(BaseModel):
    """Parameters of one filtering pass."""
    method: Literal["kl", "lee", "mean"] = "kl"
    significance: float = Field(default=0.05, gt=0, lt=1, description="Test level η")
    looks_mode: Literal["pooled-mle", "fixed"] = "pooled-mle"
    nominal_looks: float = Field(default=1.0, gt=0, description="Acquisition looks for fixed mode and Lee")
    border_policy: Literal["mirror"] = "mirror"
    dedupe: bool = Field(default=False, description="Average the deduplicated union of accepted pixels")
    degrees_of_freedom: int = Field(default=1, ge=1)
    min_looks: float = Field(default=MIN_LOOKS, gt=0)
    max_looks: float = Field(default=MAX_LOOKS, gt=0)
    lee_window: Literal[3, 5, 7] = 5
    mean_window: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "FilterConfig":
        if self.min_looks >= self.max_looks:
            raise ValueError("min_looks must be below max_looks")
        if self.mean_window % 2 == 0:
            raise ValueError("mean_window must be odd")
        return self


class PhantomSpec(BaseModel):
    """Two-level phantom: background, 1-pixel lines and a centered block."""
    side: int = Field(default=256, ge=64)
    background_mean: float = Field(default=30.0, gt=0)
    line_mean: float = Field(default=120.0, gt=0)
    geometry: Literal["lines-block-v1"] = "lines-block-v1"

    @model_validator(mode="after")
    def _distinct_levels(self) -> "PhantomSpec":
        if self.line_mean == self.background_mean:
            raise ValueError("line_mean must differ from background_mean")
        return self


class PhantomGeometry(BaseModel):
    """Resolved pixel layout of a phantom."""
    side: int
    block_start: int
    block_stop: int
    band_width: int
    vertical_col: int
    horizontal_row: int
    diagonal_offset: int
    diagonal_length: int
    patch_rows: tuple[int, int]
    patch_cols: tuple[int, int]
    label_counts: dict[int, int]


class MetricsRecord(BaseModel):
    """One replicate's six quality measures plus run metadata."""
    replicate: int
    looks: float
    filter_name: str
    nel: float
    line_pres: float
    edge_grad: float
    edge_var: float
    q_index: float
    beta_rho: float
    flags: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_ranges(self) -> "MetricsRecord":
        for name in ("q_index", "beta_rho"):
            value = getattr(self, name)
            if np.isfinite(value) and not -1.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1]")
        if not np.isnan(self.nel) and self.nel <= 0:
            raise ValueError("nel must be positive")
        return self

    @property
    def failed(self) -> bool:
        return any(flag.startswith("failed") for flag in self.flags)


def check_filter_identifiers(filters: list[str]) -> list[str]:
    """
    Validate filter identifiers: a method name, optionally "kl@<level>".

    Raises:
        ValueError: on an unknown method, a bad suffix or a repeated identifier
    """
    for identifier in filters:
        method, _, level = identifier.partition("@")
        if method not in METHODS:
            raise ValueError(f"unknown filter method {method!r}")
        if level:
            if method != "kl":
                raise ValueError(f"only kl accepts a significance suffix, got {identifier!r}")
            try:
                eta = float(level)
            except ValueError:
                raise ValueError(f"bad significance suffix in {identifier!r}") from None
            if not 0 < eta < 1:
                raise ValueError(f"significance suffix must lie in (0, 1), got {identifier!r}")
    if len(set(filters)) != len(filters):
        raise ValueError("filter identifiers must be unique")
    return filters


class RunConfig(BaseModel):
    """Monte Carlo protocol parameters."""
    replicates: int = Field(default=100, ge=1)
    looks_list: list[float] = Field(default_factory=lambda: [1.0, 4.0], min_length=1)
    filters: list[str] = Field(default_factory=lambda: ["kl", "lee"], min_length=1)
    significance: float = Field(default=0.05, gt=0, lt=1)
    base_seed: int = 0
    phantom: PhantomSpec = Field(default_factory=PhantomSpec)
    workers: int = Field(default=1, ge=1)
    looks_mode: Literal["pooled-mle", "fixed"] = "pooled-mle"
    dedupe: bool = False
    lee_window: Literal[3, 5, 7] = 5
    output: Optional[Path] = None

    @field_validator("looks_list")
    @classmethod
    def _looks_at_least_one(cls, looks_list: list[float]) -> list[float]:
        if any(looks < 1 for looks in looks_list):
            raise ValueError("every looks value must be >= 1")
        return looks_list

    @field_validator("filters")
    @classmethod
    def _known_filters(cls, filters: list[str]) -> list[str]:
        return check_filter_identifiers(filters)


class SummaryRow(BaseModel):
    """Per (looks, filter, metric) summary statistics over replicates."""
    looks: float
    filter_name: str
    metric_name: str
    count: int = Field(ge=1)
    mean: float
    sd: float
    median: float
    q1: float
    q3: float
    min: float
    max: float
    excluded: int = 0
    degenerate: bool = False

    @model_validator(mode="after")
    def _ordered_quartiles(self) -> "SummaryRow":
        if not self.min <= self.q1 <= self.median <= self.q3 <= self.max:
            raise ValueError("quartiles must satisfy min <= q1 <= median <= q3 <= max")
        return self


class ComparisonRow(BaseModel):
    """Paired test of one metric between two filters at one looks level."""
    looks: float
    metric_name: str
    first: str
    second: str
    alternative: Literal["greater", "less", "two-sided"]
    n: int
    mean_difference: float
    statistic: float
    p_value: float
