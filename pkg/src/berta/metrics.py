"""Operational aggregates and the parameterized per-physician cost estimator.

Sessions bucket into the UTC calendar month of their created_at. "Customized"
means owning at least one custom template at any time up to the period end
(cumulative, not per-month).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

from .errors import NoUsers


@dataclass(frozen=True)
class UsageMetrics:
    period: str  # "YYYY-MM", or a label such as "all" for an open range
    session_count: int
    unique_users: int
    unique_facilities: int
    total_audio_s: float
    mean_session_audio_s: float
    total_prompt_tokens: int
    total_completion_tokens: int
    users_with_custom_templates: int
    customization_rate: float


@dataclass(frozen=True)
class CostModel:
    server_cost_per_month: float
    token_cost_per_1k: float
    storage_cost_per_gb_month: float

    def check(self) -> List[str]:
        bad = [
            name
            for name, v in (
                ("server_cost_per_month", self.server_cost_per_month),
                ("token_cost_per_1k", self.token_cost_per_1k),
                ("storage_cost_per_gb_month", self.storage_cost_per_gb_month),
            )
            if v < 0
        ]
        return [f"{n} negative" for n in bad]


def _month_of(created_at: str) -> str:
    return created_at[:7]


def aggregate(period: str, store) -> UsageMetrics:
    """Metrics over sessions created in the given month ("all" for no filter)."""
    sessions = [
        s
        for s in store.iter_entities("session")
        if period == "all" or _month_of(s.created_at) == period
    ]
    durations: Dict[str, float] = {}
    for rec in store.iter_entities("recording"):
        durations[rec.id] = rec.duration_s
    session_ids = {s.id for s in sessions}
    prompt_tokens = 0
    completion_tokens = 0
    for note in store.iter_entities("note"):
        if note.session_id in session_ids:
            prompt_tokens += note.token_usage[0]
            completion_tokens += note.token_usage[1]

    total_audio = 0.0
    users = set()
    facilities = set()
    for s in sessions:
        users.add(s.owner_id)
        if s.facility_id:
            facilities.add(s.facility_id)
        total_audio += sum(durations.get(rid, 0.0) for rid in s.recording_ids)

    customized_owners = set()
    for template in store.list_templates():
        if template.kind == "custom" and template.owner_id in users:
            if period == "all" or _month_of(template.created_at) <= period:
                customized_owners.add(template.owner_id)

    count = len(sessions)
    return UsageMetrics(
        period=period,
        session_count=count,
        unique_users=len(users),
        unique_facilities=len(facilities),
        total_audio_s=total_audio,
        mean_session_audio_s=total_audio / count if count else 0.0,
        total_prompt_tokens=prompt_tokens,
        total_completion_tokens=completion_tokens,
        users_with_custom_templates=len(customized_owners),
        customization_rate=len(customized_owners) / len(users) if users else 0.0,
    )


def _iter_months(start: str, end: str) -> List[str]:
    y, m = int(start[:4]), int(start[5:7])
    ey, em = int(end[:4]), int(end[5:7])
    months = []
    while (y, m) <= (ey, em):
        months.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return months


def monthly_series(start: str, end: str, store) -> List[Tuple[str, int]]:
    """Per-month session counts over [start, end], zero-filled for empty months."""
    months = _iter_months(start, end)
    if not months:
        raise ValueError(f"empty month range {start}..{end}")
    counts = {m: 0 for m in months}
    for s in store.iter_entities("session"):
        month = _month_of(s.created_at)
        if month in counts:
            counts[month] += 1
    return [(m, counts[m]) for m in months]


def cost_per_physician_month(
    metrics: UsageMetrics, cost_model: CostModel, storage_gb: float
) -> float:
    """(server + token + storage cost) split evenly across unique users."""
    if metrics.unique_users == 0:
        raise NoUsers("cannot attribute cost with zero unique users")
    total_tokens = metrics.total_prompt_tokens + metrics.total_completion_tokens
    total = (
        cost_model.server_cost_per_month
        + (total_tokens / 1000.0) * cost_model.token_cost_per_1k
        + storage_gb * cost_model.storage_cost_per_gb_month
    )
    return total / metrics.unique_users
