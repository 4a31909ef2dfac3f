"""
구조화된 로깅 및 실행 진단 유틸리티
"""
import logging
import sys
import time
from contextlib import contextmanager
from enum import Enum
from typing import Any, Dict, Iterator, Mapping

import structlog


class LogCategory(str, Enum):
    """로그 카테고리 정의"""
    SOLVER = "SOLVER"
    MESH = "MESH"
    REMAP = "REMAP"
    LIMITER = "LIMITER"
    IO = "IO"
    SYSTEM = "SYSTEM"
    PERFORMANCE = "PERFORMANCE"


def setup_structured_logging(
    log_level: str = "INFO",
    enable_json: bool = True,
    enable_console: bool = True,
) -> None:
    """structlog 을 stdlib logging 위에 설정 (JSON 또는 콘솔 렌더러)"""
    level = getattr(logging, log_level.upper())
    renderer = structlog.processors.JSONRenderer() if enable_json else structlog.dev.ConsoleRenderer(colors=False)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.format_exc_info,
            renderer,
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )

    # 진단 출력은 stderr 로 (stdout 은 CLI 표 출력용)
    handlers = [logging.StreamHandler(sys.stderr)] if enable_console else [logging.NullHandler()]
    logging.basicConfig(format="%(message)s", handlers=handlers, level=level, force=True)


class ContextLogger:
    """카테고리와 바인딩된 컨텍스트를 함께 기록하는 로거"""

    def __init__(self, name: str, category: LogCategory = LogCategory.SYSTEM):
        self.name = name
        self.category = category
        self.logger = structlog.get_logger(name)
        self.context: Dict[str, Any] = {"category": category.value}

    def bind(self, **kwargs) -> "ContextLogger":
        bound = ContextLogger(self.name, self.category)
        bound.context = {**self.context, **kwargs}
        return bound

    def _emit(self, method: str, msg: str, kwargs: Mapping[str, Any]) -> None:
        getattr(self.logger, method)(msg, **{**self.context, **kwargs})

    def debug(self, msg: str, **kwargs):
        self._emit("debug", msg, kwargs)

    def info(self, msg: str, **kwargs):
        self._emit("info", msg, kwargs)

    def warning(self, msg: str, **kwargs):
        self._emit("warning", msg, kwargs)

    def error(self, msg: str, **kwargs):
        self._emit("error", msg, kwargs)

    def log_step(self, step: int, t: float, dt: float, **kwargs):
        """시간 스텝 진행 (DEBUG)"""
        self.debug("time step", event_type="time_step", step=step, t=t, dt=dt, **kwargs)

    def log_diagnostics(self, diagnostics: Mapping[str, Any]):
        """실행 종료 시 진단 요약 (INFO)"""
        self.info("run diagnostics", event_type="diagnostics", **dict(diagnostics))

    def log_performance_metric(self, operation: str, duration_ms: float, success: bool = True, **kwargs):
        """작업 소요 시간"""
        self.debug(
            f"{operation} finished",
            event_type="performance_metric",
            operation=operation,
            duration_ms=round(duration_ms, 3),
            success=success,
            **kwargs,
        )


@contextmanager
def log_operation(logger: ContextLogger, operation: str, **context) -> Iterator[ContextLogger]:
    """작업 시작, 소요 시간, 실패(에러 타입 포함)를 기록"""
    start = time.perf_counter()
    logger.debug(f"{operation} started", operation=operation, **context)
    try:
        yield logger.bind(operation=operation, **context)
    except Exception as e:
        logger.error(
            f"{operation} failed",
            operation=operation,
            error=str(e),
            error_type=type(e).__name__,
            duration_ms=round((time.perf_counter() - start) * 1000.0, 3),
            **context,
        )
        raise
    logger.log_performance_metric(operation, (time.perf_counter() - start) * 1000.0, **context)


class MetricsCollector:
    """실행 진단 수집기: 카운터(누적)와 최소값"""

    def __init__(self):
        self.counters: Dict[str, int] = {}
        self.minima: Dict[str, float] = {}

    def increment_counter(self, name: str, value: int = 1):
        self.counters[name] = self.counters.get(name, 0) + int(value)

    def record_minimum(self, name: str, value: float):
        current = self.minima.get(name)
        if current is None or value < current:
            self.minima[name] = float(value)

    def get_metrics(self) -> Dict[str, Any]:
        """카운터와 최소값을 합친 평면 사전 (복사본)"""
        return {**self.counters, **self.minima}


def create_logger(name: str, category: LogCategory = LogCategory.SYSTEM) -> ContextLogger:
    """로거 생성 팩토리 함수"""
    return ContextLogger(name, category)
