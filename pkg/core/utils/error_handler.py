"""
표준화된 에러 핸들링 유틸리티
"""
import functools
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Dict, Optional, Tuple, Type, TypeVar

from ..exceptions import (
    ErrorCode,
    InternalError,
    NonFiniteError,
    OutputError,
    RipaSolverError,
    ValidationError,
)
from .logging import LogCategory, create_logger

logger = create_logger(__name__, LogCategory.SYSTEM)

T = TypeVar("T")

# 외부 예외 -> 솔버 예외 (먼저 맞는 항목 사용)
_CONVERSIONS: Tuple[Tuple[Tuple[Type[BaseException], ...], Callable[[Exception], RipaSolverError]], ...] = (
    ((FloatingPointError,), lambda e: NonFiniteError(f"non-finite arithmetic: {e}", cause=e)),
    ((ValueError, TypeError), lambda e: ValidationError(f"invalid value: {e}", cause=e)),
    ((OSError,), lambda e: OutputError(f"I/O error: {e}", path=getattr(e, "filename", None), cause=e)),
)

# 심각도별 로그 레벨
_SEVERITY: Dict[ErrorCode, str] = {
    ErrorCode.INTERNAL_ERROR: "error",
    ErrorCode.NON_FINITE: "error",
    ErrorCode.METRIC_ERROR: "error",
    ErrorCode.POSITIVITY_VIOLATION: "warning",
    ErrorCode.MESH_TANGLING: "warning",
    ErrorCode.MESH_ERROR: "warning",
    ErrorCode.OUTPUT_ERROR: "warning",
}


@dataclass
class ErrorContext:
    """에러가 난 작업과 시뮬레이션 위치 (스텝, 시간)"""

    operation: str
    step: Optional[int] = None
    time: Optional[float] = None
    additional_context: Dict[str, Any] = field(default_factory=dict)
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "operation": self.operation,
            "step": self.step,
            "time": self.time,
            "timestamp": self.timestamp.isoformat(),
            "additional_context": self.additional_context,
        }


class StandardizedErrorHandler:
    """외부 예외를 솔버 예외로 바꾸고 가장 안쪽 컨텍스트를 붙여 한 번만 기록"""

    def __init__(self, logger_name: Optional[str] = None):
        self.logger = create_logger(logger_name or __name__, LogCategory.SYSTEM)

    def standardize(self, error: Exception) -> RipaSolverError:
        if isinstance(error, RipaSolverError):
            return error
        for types, convert in _CONVERSIONS:
            if isinstance(error, types):
                return convert(error)
        return InternalError(f"internal error: {error}", cause=error)

    def handle_error(
        self,
        error: Exception,
        context: Optional[ErrorContext] = None,
        reraise: bool = True,
    ) -> Optional[RipaSolverError]:
        standardized = self.standardize(error)
        if context is not None:
            standardized.details.setdefault("context", context.to_dict())
        if not getattr(standardized, "_logged", False):
            self._log(standardized)
            standardized._logged = True  # type: ignore[attr-defined]

        if not reraise:
            return standardized
        if standardized is error:
            raise standardized
        raise standardized from error

    def _log(self, error: RipaSolverError) -> None:
        level = _SEVERITY.get(error.error_code, "info")
        getattr(self.logger, level)(
            f"{error.error_code.value}: {error.message}",
            error_code=error.error_code.value,
            exit_code=error.exit_code,
            details=error.details,
            cause=type(error.cause).__name__ if error.cause else None,
        )


_global_error_handler = StandardizedErrorHandler()


def handle_errors(
    operation: str,
    reraise: bool = True,
    context_factory: Optional[Callable[..., ErrorContext]] = None,
):
    """에러 핸들링 데코레이터"""

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> T:
            try:
                return func(*args, **kwargs)
            except Exception as e:
                context = context_factory(*args, **kwargs) if context_factory else ErrorContext(operation)
                return _global_error_handler.handle_error(e, context, reraise)  # type: ignore[return-value]

        return wrapper

    return decorator
