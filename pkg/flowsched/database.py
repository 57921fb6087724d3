"""
Async SQLAlchemy archive for benchmark rows.
"""
from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from datetime import datetime, timezone
from typing import AsyncGenerator, Dict, Iterable, Optional

from sqlalchemy import DateTime, Integer, Text, select
from sqlalchemy.ext.asyncio import (
    AsyncEngine,
    AsyncSession,
    async_sessionmaker,
    create_async_engine,
)
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column

from flowsched.schemas import BenchRow

logger = logging.getLogger(__name__)


def _now() -> datetime:
    return datetime.now(timezone.utc)


class Base(DeclarativeBase):
    pass


class BenchRecord(Base):
    __tablename__ = "bench_rows"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    run_id: Mapped[str] = mapped_column(Text, nullable=False, index=True)
    instance_id: Mapped[str] = mapped_column(Text, nullable=False)
    n: Mapped[int] = mapped_column(Integer, nullable=False)
    m: Mapped[int] = mapped_column(Integer, nullable=False)
    P: Mapped[str] = mapped_column(Text, nullable=False)
    solver: Mapped[str] = mapped_column(Text, nullable=False)
    cost: Mapped[str] = mapped_column(Text, nullable=False, default="")
    lp_bound: Mapped[str] = mapped_column(Text, nullable=False, default="")
    ratio: Mapped[str] = mapped_column(Text, nullable=False, default="")
    speed: Mapped[str] = mapped_column(Text, nullable=False, default="")
    ms: Mapped[int] = mapped_column(Integer, nullable=False, default=0)
    status: Mapped[str] = mapped_column(Text, nullable=False, default="ok")
    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), nullable=False, default=_now
    )


_engines: Dict[str, AsyncEngine] = {}


def get_engine(url: str) -> AsyncEngine:
    if url not in _engines:
        _engines[url] = create_async_engine(url, echo=False)
    return _engines[url]


async def dispose_engines() -> None:
    for engine in _engines.values():
        await engine.dispose()
    _engines.clear()


@asynccontextmanager
async def get_db_ctx(url: str) -> AsyncGenerator[AsyncSession, None]:
    """Session that commits on success and rolls back on error."""
    factory = async_sessionmaker(get_engine(url), class_=AsyncSession,
                                 expire_on_commit=False, autoflush=False)
    async with factory() as session:
        try:
            yield session
            await session.commit()
        except Exception:
            await session.rollback()
            raise


async def create_tables(url: str) -> None:
    async with get_engine(url).begin() as conn:
        await conn.run_sync(Base.metadata.create_all)


async def archive_rows(url: str, run_id: str, rows: Iterable[BenchRow]) -> int:
    await create_tables(url)
    count = 0
    async with get_db_ctx(url) as session:
        for row in rows:
            session.add(BenchRecord(
                run_id=run_id, instance_id=row.id, n=row.n, m=row.m, P=row.P,
                solver=row.solver, cost=row.cost, lp_bound=row.lp_bound,
                ratio=row.ratio, speed=row.speed, ms=row.ms, status=row.status,
            ))
            count += 1
    logger.info("archived %d bench rows under run %s", count, run_id)
    return count


async def fetch_rows(url: str, run_id: Optional[str] = None) -> list[BenchRecord]:
    async with get_db_ctx(url) as session:
        stmt = select(BenchRecord).order_by(BenchRecord.id)
        if run_id:
            stmt = stmt.where(BenchRecord.run_id == run_id)
        return list((await session.execute(stmt)).scalars().all())
