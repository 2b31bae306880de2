"""Error types shared by the platform server, the client and the CLI."""

from typing import Optional


class YTwinError(Exception):
    """Base error. ``code`` travels on the wire, ``status`` is the HTTP status."""

    status = 400

    def __init__(self, detail: str = ""):
        super().__init__(detail)
        self.detail = detail

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_payload(self) -> dict[str, str]:
        return {"error": self.code, "detail": self.detail}


class InvalidRequest(YTwinError):
    status = 400


class InvalidRecipe(YTwinError):
    status = 400


class DuplicateName(YTwinError):
    status = 409


class InvalidProfile(YTwinError):
    status = 422


class UnknownAuthor(YTwinError):
    status = 404


class UnknownAgent(YTwinError):
    status = 404


class UnknownContent(YTwinError):
    status = 404


class DanglingReference(YTwinError):
    status = 404


class KindFieldMismatch(YTwinError):
    status = 422


class InvalidEmotion(YTwinError):
    status = 422


class SelfFollow(YTwinError):
    status = 422


class UnknownRecommender(YTwinError):
    status = 422


class EmptyPool(YTwinError):
    status = 404


class UnknownClient(YTwinError):
    status = 403


class UnauthorizedAdvance(YTwinError):
    status = 403


class BarrierPending(YTwinError):
    status = 409


class SettingsMismatch(YTwinError):
    status = 409


class UnparseableFeed(YTwinError):
    status = 422


class EmptyStore(YTwinError):
    status = 404


class EndpointUnavailable(YTwinError):
    status = 503


class MalformedResponse(YTwinError):
    status = 502


class UnrecognizedTemplate(YTwinError):
    status = 400


class ServerUnreachable(YTwinError):
    status = 503


class ClockDesync(YTwinError):
    status = 409


_REGISTRY: dict[str, type[YTwinError]] = {
    cls.__name__: cls
    for cls in (
        InvalidRequest,
        InvalidRecipe,
        DuplicateName,
        InvalidProfile,
        UnknownAuthor,
        UnknownAgent,
        UnknownContent,
        DanglingReference,
        KindFieldMismatch,
        InvalidEmotion,
        SelfFollow,
        UnknownRecommender,
        EmptyPool,
        UnknownClient,
        UnauthorizedAdvance,
        BarrierPending,
        SettingsMismatch,
        UnparseableFeed,
        EmptyStore,
        EndpointUnavailable,
        MalformedResponse,
        UnrecognizedTemplate,
        ServerUnreachable,
        ClockDesync,
    )
}


def error_from_payload(payload: Optional[dict], status: int = 400) -> YTwinError:
    """Rebuild the server-side error from an error response body."""
    payload = payload or {}
    code = str(payload.get("error", ""))
    detail = str(payload.get("detail", ""))
    cls = _REGISTRY.get(code)
    if cls is None:
        err = YTwinError(f"{code or 'HTTP ' + str(status)}: {detail}")
        err.status = status
        return err
    return cls(detail)
