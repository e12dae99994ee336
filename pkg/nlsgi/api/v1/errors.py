"""
HTTP mapping of engine errors
"""

from fastapi import HTTPException, status

from nlsgi.core.errors import ConfigError, InputError, NLSGIError, SolitonGateError


def to_http_exception(error: NLSGIError) -> HTTPException:
    """400 for config/input, 422 for the soliton gate, 500 for numerical failures"""
    if isinstance(error, (ConfigError, InputError)):
        return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(error))
    if isinstance(error, SolitonGateError):
        return HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail={"message": str(error), "min_abs_a": error.min_abs_a, "zero_count": error.zero_count},
        )
    return HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(error))
