"""
Central configuration – loaded once from environment / .env file.
Every variable is prefixed with FLOWSCHED_ (e.g. FLOWSCHED_SEED=7).
"""
from __future__ import annotations

import json
from functools import lru_cache
from typing import List, Literal, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class SuiteEntry(BaseSettings):
    """One generator invocation inside a bench suite."""
    kind: Literal["random-cossp", "random-pcsp", "dks", "makespan-gap"]
    count: int = 1          # instances drawn with consecutive seeds
    n: int = 4
    m: int = 1
    pmax: int = 3
    cost_kind: str = "flow"
    edge_prob: float = 0.3
    oracle: bool = False    # also emit an exact-oracle row

    model_config = SettingsConfigDict(extra="ignore")


_DEFAULT_SUITES = {
    "tiny": [
        {"kind": "random-cossp", "count": 4, "n": 3, "m": 2, "pmax": 2, "oracle": True},
        {"kind": "random-pcsp", "count": 4, "n": 4, "m": 2, "pmax": 2, "oracle": True},
    ],
    "small": [
        {"kind": "random-cossp", "count": 6, "n": 6, "m": 2, "pmax": 3},
        {"kind": "random-cossp", "count": 4, "n": 8, "m": 3, "pmax": 3, "cost_kind": "mixed"},
        {"kind": "random-pcsp", "count": 6, "n": 6, "m": 2, "pmax": 3, "edge_prob": 0.3},
    ],
    "hardness": [
        {"kind": "dks", "count": 2, "n": 5, "m": 1},
        {"kind": "makespan-gap", "count": 2, "n": 2, "m": 1},
    ],
}


class Settings(BaseSettings):
    # ── Reproducibility ─────────────────────────────────────────────────────
    seed: int = 0

    # ── LP solver ───────────────────────────────────────────────────────────
    lp_mode: Literal["rational", "float", "auto"] = "auto"
    # auto → rational only while rows × columns stays below this
    lp_rational_cell_limit: int = 6000
    lp_float_tolerance: float = 1e-7
    lp_max_iterations: int = 50     # row-generation rounds
    lp_max_pivots: int = 50_000

    # ── COSSP rounding ──────────────────────────────────────────────────────
    kc_scale: int = 12
    kc_max_rounds: int = 20
    cover_solver: Literal["greedy", "exact"] = "greedy"
    cover_exact_object_limit: int = 22

    # ── PCSP ────────────────────────────────────────────────────────────────
    pcsp_alpha: int = 3
    speed_step: float = 0.5
    speed_max: float = 8.0

    # ── Bench ───────────────────────────────────────────────────────────────
    bench_workers: int = 4
    bench_timings: bool = False   # wall-clock ms makes reports differ run to run
    # If set, bench rows are archived here, e.g. sqlite+aiosqlite:///bench.db
    database_url: Optional[str] = None
    bench_suites_json: Optional[str] = None   # raw JSON {"name": [entries]}
    bench_suites: dict[str, List[SuiteEntry]] = {}   # parsed at startup

    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        env_prefix="FLOWSCHED_",
    )

    def model_post_init(self, __context) -> None:
        raw = dict(_DEFAULT_SUITES)
        if self.bench_suites_json:
            raw.update(json.loads(self.bench_suites_json))
        object.__setattr__(
            self,
            "bench_suites",
            {name: [SuiteEntry(**e) for e in entries] for name, entries in raw.items()},
        )

    @property
    def speed_grid(self) -> list[float]:
        steps = int(round((self.speed_max - 1.0) / self.speed_step))
        return [1.0 + k * self.speed_step for k in range(steps + 1)]


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
