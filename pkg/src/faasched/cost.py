"""Per-millisecond billing model for function invocations.

Pricing follows the serverless convention: execution time is rounded up to a
billing granularity (1 ms by default) and multiplied by a per-millisecond rate
that scales linearly with the memory allocation.  All money is Decimal; rates
come from a small text table so alternative price sheets can be swapped in.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from importlib import resources
from pathlib import Path

from .core import SimTime, SimulatorError

US_PER_MS = 1_000


class CostModelError(SimulatorError):
    pass


@dataclass(frozen=True)
class CostModel:
    """Price table: memory size (MB) -> USD per millisecond, plus granularity.

    Memory sizes between two table keys are priced by linear interpolation,
    which matches a flat per-GB rate whenever the table itself is
    proportional.  Sizes above the largest key extend the last segment's
    slope; sizes below the smallest key are rejected.
    """

    granularity_ms: int
    prices: dict[int, Decimal]

    def __post_init__(self) -> None:
        if self.granularity_ms <= 0:
            raise CostModelError(f"granularity_ms must be positive, got {self.granularity_ms}")
        if not self.prices:
            raise CostModelError("cost table has no rows")

    def price_per_ms(self, memory_mb: int) -> Decimal:
        keys = sorted(self.prices)
        if memory_mb < keys[0]:
            raise CostModelError(
                f"memory {memory_mb} MB below smallest table key {keys[0]} MB"
            )
        if memory_mb in self.prices:
            return self.prices[memory_mb]
        # find the surrounding segment; past the end, reuse the last one
        lo = keys[0]
        for k in keys:
            if k > memory_mb:
                hi = k
                break
            lo = k
        else:
            lo, hi = keys[-2] if len(keys) > 1 else keys[-1], keys[-1]
        if lo == hi:
            return self.prices[lo]
        frac = Decimal(memory_mb - lo) / Decimal(hi - lo)
        return self.prices[lo] + (self.prices[hi] - self.prices[lo]) * frac

    def save(self, path: str | Path) -> None:
        lines = [f"granularity_ms={self.granularity_ms}"]
        for k in sorted(self.prices):
            lines.append(f"{k},{self.prices[k]}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CostModel":
        granularity: int | None = None
        prices: dict[int, Decimal] = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line and "," not in line:
                key, _, value = line.partition("=")
                if key.strip() != "granularity_ms":
                    raise CostModelError(f"{path}:{lineno}: unknown header key {key.strip()!r}")
                granularity = int(value)
                continue
            try:
                mem_s, price_s = (part.strip() for part in line.split(","))
                prices[int(mem_s)] = Decimal(price_s)
            except (ValueError, ArithmeticError) as exc:
                raise CostModelError(f"{path}:{lineno}: bad table row {line!r}") from exc
        if granularity is None:
            raise CostModelError(f"{path}: missing granularity_ms header")
        return cls(granularity_ms=granularity, prices=prices)


def default_cost_model() -> CostModel:
    """Table shipped with the package, seeded from public per-GB-second pricing."""
    with resources.as_file(resources.files("faasched.data") / "lambda_prices.csv") as p:
        return CostModel.load(p)


def invocation_cost(execution: SimTime, memory_mb: int, model: CostModel) -> Decimal:
    """Billed cost of one invocation that executed for `execution` microseconds.

    Zero execution bills zero.  Anything positive rounds up to a whole number
    of granularity units.
    """
    if execution < 0:
        raise CostModelError(f"negative execution time {execution}")
    gran_us = model.granularity_ms * US_PER_MS
    units = (execution + gran_us - 1) // gran_us
    billed_ms = units * model.granularity_ms
    return Decimal(billed_ms) * model.price_per_ms(memory_mb)
