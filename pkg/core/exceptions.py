"""
Ripa MM-DG 솔버 표준화된 예외 시스템
"""
from typing import Optional, Dict, Any
from enum import Enum


class ErrorCode(str, Enum):
    """에러 코드 정의"""
    # 입력/설정 에러
    VALIDATION_ERROR = "VALIDATION_ERROR"
    CONFIGURATION_ERROR = "CONFIGURATION_ERROR"

    # 메쉬 에러
    MESH_ERROR = "MESH_ERROR"
    MESH_TANGLING = "MESH_TANGLING"

    # 수치 에러
    POSITIVITY_VIOLATION = "POSITIVITY_VIOLATION"
    NON_FINITE = "NON_FINITE"
    METRIC_ERROR = "METRIC_ERROR"

    # 시스템 에러
    OUTPUT_ERROR = "OUTPUT_ERROR"
    INTERNAL_ERROR = "INTERNAL_ERROR"


# CLI 종료 코드 (카테고리별)
EXIT_CODES: Dict[ErrorCode, int] = {
    ErrorCode.VALIDATION_ERROR: 2,
    ErrorCode.CONFIGURATION_ERROR: 2,
    ErrorCode.MESH_ERROR: 3,
    ErrorCode.MESH_TANGLING: 3,
    ErrorCode.POSITIVITY_VIOLATION: 4,
    ErrorCode.NON_FINITE: 5,
    ErrorCode.METRIC_ERROR: 5,
    ErrorCode.OUTPUT_ERROR: 6,
    ErrorCode.INTERNAL_ERROR: 1,
}


class RipaSolverError(Exception):
    """애플리케이션 기본 예외 클래스"""

    def __init__(
        self,
        message: str,
        error_code: ErrorCode,
        details: Optional[Dict[str, Any]] = None,
        cause: Optional[Exception] = None
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        self.cause = cause

    @property
    def exit_code(self) -> int:
        """CLI 종료 코드"""
        return EXIT_CODES.get(self.error_code, 1)

    def to_dict(self) -> Dict[str, Any]:
        """예외를 딕셔너리로 변환"""
        return {
            "error_code": self.error_code.value,
            "message": self.message,
            "details": self.details,
            "cause": str(self.cause) if self.cause else None
        }


class ValidationError(RipaSolverError):
    """입력 검증 에러"""
    def __init__(self, message: str, field: Optional[str] = None, **kwargs):
        super().__init__(
            message,
            ErrorCode.VALIDATION_ERROR,
            details={"field": field} if field else None,
            **kwargs
        )


class ConfigurationError(RipaSolverError):
    """설정 에러"""
    def __init__(self, message: str, config_key: Optional[str] = None, **kwargs):
        super().__init__(
            message,
            ErrorCode.CONFIGURATION_ERROR,
            details={"config_key": config_key} if config_key else None,
            **kwargs
        )


class MeshError(RipaSolverError):
    """메쉬 구성 에러 (퇴화 요소, 짝없는 주기 경계 등)"""
    def __init__(self, message: str, element: Optional[int] = None, **kwargs):
        super().__init__(
            message,
            ErrorCode.MESH_ERROR,
            details={"element": element} if element is not None else None,
            **kwargs
        )


class MeshTanglingError(RipaSolverError):
    """메쉬 보간 중 요소 반전 에러"""
    def __init__(
        self,
        message: str,
        element: Optional[int] = None,
        varsigma: Optional[float] = None,
        **kwargs
    ):
        super().__init__(
            message,
            ErrorCode.MESH_TANGLING,
            details={"element": element, "varsigma": varsigma},
            **kwargs
        )


class PositivityError(RipaSolverError):
    """양성 보존 전제 조건 위반"""
    def __init__(
        self,
        message: str = "PP precondition violated; reduce CFL",
        element: Optional[int] = None,
        average: Optional[float] = None,
        **kwargs
    ):
        super().__init__(
            message,
            ErrorCode.POSITIVITY_VIOLATION,
            details={"element": element, "average": average},
            **kwargs
        )


class NonFiniteError(RipaSolverError):
    """NaN/Inf 발생 에러"""
    def __init__(
        self,
        message: str,
        element: Optional[int] = None,
        edge: Optional[int] = None,
        **kwargs
    ):
        details = {}
        if element is not None:
            details["element"] = element
        if edge is not None:
            details["edge"] = edge
        super().__init__(message, ErrorCode.NON_FINITE, details=details, **kwargs)


class MetricError(RipaSolverError):
    """메트릭 텐서 에러 (비 SPD 입력 등)"""
    def __init__(self, message: str, element: Optional[int] = None, **kwargs):
        super().__init__(
            message,
            ErrorCode.METRIC_ERROR,
            details={"element": element} if element is not None else None,
            **kwargs
        )


class OutputError(RipaSolverError):
    """출력 파일 쓰기 에러"""
    def __init__(self, message: str, path: Optional[str] = None, **kwargs):
        super().__init__(
            message,
            ErrorCode.OUTPUT_ERROR,
            details={"path": path} if path else None,
            **kwargs
        )


class InternalError(RipaSolverError):
    """내부 시스템 에러"""
    def __init__(self, message: str, component: Optional[str] = None, **kwargs):
        super().__init__(
            message,
            ErrorCode.INTERNAL_ERROR,
            details={"component": component} if component else None,
            **kwargs
        )
