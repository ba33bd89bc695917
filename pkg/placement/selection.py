"""Budgeted greedy selection of denoiser insertion points."""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional

from denoiser.block import DEFAULT_RATIO, denoiser_param_count
from utils.errors import PlacementError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlanEntry:
    layer_index: int
    channels: int
    param_cost: int
    score: float


@dataclass
class PlacementPlan:
    """Selected layers in descending score order, within the parameter budget."""

    entries: List[PlanEntry]
    budget: int
    scores: Dict[int, float] = field(default_factory=dict)
    eta_pct: Optional[float] = None

    @property
    def total_cost(self) -> int:
        return sum(entry.param_cost for entry in self.entries)

    @property
    def layer_indices(self) -> List[int]:
        return [entry.layer_index for entry in self.entries]

    def to_text(self, seed: Optional[int] = None) -> str:
        """Plan file: comment header then ``layer_index score cost cumulative channels`` rows."""
        eta = "all" if self.eta_pct is None else f"{self.eta_pct:g}"
        lines = []
        if seed is not None:
            lines.append(f"# seed={seed}")
        lines.append(f"# eta_pct={eta} budget={self.budget} total_cost={self.total_cost}")
        lines.append("# layer_index score cost cumulative channels")
        cumulative = 0
        for entry in self.entries:
            cumulative += entry.param_cost
            lines.append(f"{entry.layer_index} {entry.score!r} {entry.param_cost} {cumulative} {entry.channels}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PlacementPlan":
        budget = 0
        eta_pct = None
        entries = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if key == "budget":
                        budget = int(value)
                    elif key == "eta_pct" and value != "all":
                        eta_pct = float(value)
                continue
            fields = line.split()
            if len(fields) != 5:
                raise PlacementError(f"Malformed plan row: '{line}'")
            entries.append(PlanEntry(layer_index=int(fields[0]), score=float(fields[1]),
                                     param_cost=int(fields[2]), channels=int(fields[4])))
        return cls(entries=entries, budget=budget, scores={e.layer_index: e.score for e in entries},
                   eta_pct=eta_pct)


def select_layers(scores: Dict[int, float], eta_pct: Optional[float], backbone_param_count: int,
                  channel_map: Dict[int, int], ratio: float = DEFAULT_RATIO, mode: str = "skip",
                  cost_fn: Optional[Callable[[int], int]] = None) -> PlacementPlan:
    """Greedy first-fit-decreasing selection under budget floor(eta% * params).

    Layers are visited by descending score (ties: lower index first). In
    ``skip`` mode a layer that does not fit is skipped and the walk continues;
    in ``stop`` mode the walk ends at the first layer that does not fit.
    ``eta_pct=None`` lifts the budget and selects every scored layer.
    """
    if mode not in ("skip", "stop"):
        raise PlacementError(f"Unknown selection mode: {mode}")
    if eta_pct is not None and eta_pct < 0:
        raise PlacementError(f"eta_pct must be >= 0, got {eta_pct}")
    cost_fn = cost_fn or (lambda channels: denoiser_param_count(channels, ratio))

    costs = {index: cost_fn(channel_map[index]) for index in scores}
    if eta_pct is None:
        budget = sum(costs.values())
    else:
        # eta is read as its decimal literal so 29% of 100 is exactly 29
        budget = int(Fraction(str(eta_pct)) * backbone_param_count // 100)

    ranked = sorted(scores, key=lambda index: (-scores[index], index))
    entries = []
    remaining = budget
    for index in ranked:
        if costs[index] <= remaining:
            entries.append(PlanEntry(layer_index=index, channels=channel_map[index],
                                     param_cost=costs[index], score=scores[index]))
            remaining -= costs[index]
        elif mode == "stop":
            break

    plan = PlacementPlan(entries=entries, budget=budget, scores=dict(scores), eta_pct=eta_pct)
    logger.info(f"Selected layers {plan.layer_indices}: cost {plan.total_cost} / budget {budget}")
    return plan
