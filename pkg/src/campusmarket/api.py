"""HTTP surface: JSON endpoints over the services, bearer-token protected.

Only four routes are public (register, verify-otp, login, healthz);
everything else requires `Authorization: Bearer <token>`. Domain errors map
to a fixed (status, code) table so no module exception ever leaks as a bare
500, and malformed input of any shape comes back as a 400.
"""

from __future__ import annotations

import json
from typing import Iterator

from fastapi import Depends, FastAPI, File, Form, Request, Response, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.security.utils import get_authorization_scheme_param

from . import __version__, errors
from .auth import TokenClaims
from .bootstrap import Runtime
from .catalog import ListingDetail, ProductListing, SearchResult
from .errors import MarketError, Unauthorized, ValidationFailed
from .reputation import AccountSnapshot
from .transactions import (
    ContactExchange,
    PartyContact,
    PromptEntry,
    PurchaseRequest,
    RequestView,
)

MAX_BODY_BYTES = 3 * 1024 * 1024
DEFAULT_PAGE = 20
MAX_PAGE = 100

# Every raisable domain error appears here or inherits from a class that does;
# the mapper walks the MRO so subclasses ride on their parents.
STATUS_BY_ERROR: dict[type, int] = {
    errors.ValidationFailed: 400,
    errors.DomainNotAllowed: 400,
    errors.WeakPassword: 400,
    errors.OtpMismatch: 400,
    errors.OtpExpired: 400,
    errors.OtpAlreadyConsumed: 400,
    errors.WrongTiming: 400,
    errors.UnknownCategory: 400,
    errors.InvalidCredentials: 401,
    errors.TokenInvalid: 401,
    errors.TokenExpired: 401,
    errors.Unauthorized: 401,
    errors.Forbidden: 403,
    errors.SelfRequestForbidden: 403,
    errors.NotFound: 404,
    errors.OtpNotFound: 404,
    errors.UnknownAccount: 404,
    errors.EmailTaken: 409,
    errors.AccountExists: 409,
    errors.AlreadyExists: 409,
    errors.AlreadyReserved: 409,
    errors.ReservedCannotDelete: 409,
    errors.AlreadyResolved: 409,
    errors.VersionConflict: 409,
    errors.NothingPending: 409,
    errors.NonCompliant: 422,
    errors.StoreUnavailable: 503,
}


def status_for(error: MarketError) -> int:
    for klass in type(error).__mro__:
        if klass in STATUS_BY_ERROR:
            return STATUS_BY_ERROR[klass]
    return 500


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


# --- wire shapes (camelCase, per the endpoint contract) ---


def _listing_summary(result: SearchResult) -> dict:
    return {
        "id": result.listing.id,
        "name": result.listing.name,
        "price": result.listing.price,
        "category": result.category_name,
        "sellerName": result.seller_name,
        "sellerPoints": result.seller_points,
        "createdAt": result.listing.created_at,
    }


def _listing_detail(detail: ListingDetail) -> dict:
    listing: ProductListing = detail.listing
    return {
        "id": listing.id,
        "name": listing.name,
        "description": listing.description,
        "price": listing.price,
        "category": detail.category_name,
        "categoryId": listing.category_id,
        "quantity": listing.quantity,
        "shipping": listing.shipping,
        "status": listing.status,
        "priceAward": listing.price_award.value,
        "idealPrice": listing.ideal.value if listing.ideal else None,
        "sellerId": listing.seller_id,
        "sellerName": detail.seller_name,
        "sellerPoints": detail.seller_points,
        "hasPhoto": listing.has_photo,
        "createdAt": listing.created_at,
        "updatedAt": listing.updated_at,
    }


def _request_record(request: PurchaseRequest) -> dict:
    return {
        "id": request.id,
        "productId": request.product_id,
        "buyerId": request.buyer_id,
        "sellerId": request.seller_id,
        "state": request.state,
        "createdAt": request.created_at,
        "resolvedAt": request.resolved_at,
    }


def _party(contact: PartyContact) -> dict:
    return {"name": contact.name, "email": contact.email, "phone": contact.phone}


def _contact_exchange(exchange: ContactExchange) -> dict:
    return {"buyer": _party(exchange.buyer), "seller": _party(exchange.seller)}


def _request_view(view: RequestView) -> dict:
    return {
        "request": _request_record(view.request),
        "product": {"id": view.product.id, "name": view.product.name, "price": view.product.price},
    }


def _prompt_entry(entry: PromptEntry) -> dict:
    return {
        "request": _request_record(entry.request),
        "product": {
            "id": entry.product.id,
            "name": entry.product.name,
            "price": entry.product.price,
        },
        "buyer": _party(entry.buyer),
    }


def _reputation_view(snapshot: AccountSnapshot, boost: float) -> dict:
    return {
        "userId": snapshot.user_id,
        "credited": snapshot.credited,
        "boost": boost,
        "pending": [
            {
                "listingId": listing_id,
                "modifiers": [{"kind": m.kind.value, "magnitude": m.magnitude} for m in mods],
            }
            for listing_id, mods in sorted(snapshot.pending.items())
        ],
    }


# --- request plumbing ---


async def _json_body(request: Request) -> dict:
    try:
        data = json.loads(await request.body())
    except (ValueError, UnicodeDecodeError):
        raise ValidationFailed("body", "request body must be a JSON object") from None
    if not isinstance(data, dict):
        raise ValidationFailed("body", "request body must be a JSON object")
    return data


def _field(data: dict, name: str, default=None, required: bool = True) -> str:
    value = data.get(name, default)
    if value is None and required:
        raise ValidationFailed(name, f"{name} is required")
    if value is not None and not isinstance(value, str):
        raise ValidationFailed(name, f"{name} must be a string")
    return value


def _page_args(limit: int | None, offset: int) -> tuple[int, int]:
    if limit is None:
        limit = DEFAULT_PAGE
    if not 1 <= limit <= MAX_PAGE:
        raise ValidationFailed("limit", f"limit must be between 1 and {MAX_PAGE}")
    if offset < 0:
        raise ValidationFailed("offset", "offset must be non-negative")
    return limit, offset


def create_app(runtime: Runtime) -> FastAPI:
    app = FastAPI(title="campus market", version=__version__, docs_url=None, redoc_url=None)
    app.state.runtime = runtime

    def require_claims(request: Request) -> TokenClaims:
        scheme, token = get_authorization_scheme_param(request.headers.get("Authorization", ""))
        if scheme.lower() != "bearer" or not token:
            raise Unauthorized("missing bearer token")
        return runtime.auth.verify_token(token)

    # --- error handling ---

    @app.exception_handler(MarketError)
    async def handle_market_error(request: Request, exc: MarketError):
        return _error_response(status_for(exc), exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    async def handle_request_validation(request: Request, exc: RequestValidationError):
        # covers unparseable query params and missing multipart fields
        return _error_response(400, "malformed_body", "request did not match the endpoint schema")

    @app.middleware("http")
    async def cap_body_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and length.isdigit() and int(length) > MAX_BODY_BYTES:
            return _error_response(413, "body_too_large", "request body exceeds 3 MiB")
        return await call_next(request)

    if runtime.config.cors_allow_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[runtime.config.cors_allow_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    # --- public: auth + health ---

    @app.post("/auth/register")
    async def register(request: Request):
        data = await _json_body(request)
        issued = runtime.auth.register_begin(
            name=_field(data, "name"),
            email=_field(data, "email"),
            phone=_field(data, "phone"),
            college_id=_field(data, "collegeId"),
            password=_field(data, "password"),
        )
        return {"email": issued.email, "otpTtlSeconds": issued.ttl_seconds}

    @app.post("/auth/verify-otp")
    async def verify_otp(request: Request):
        data = await _json_body(request)
        account = runtime.auth.verify_otp(_field(data, "email"), _field(data, "code"))
        return {"userId": account.id, "name": account.name, "email": account.email}

    @app.post("/auth/login")
    async def login(request: Request):
        data = await _json_body(request)
        session = runtime.auth.login(_field(data, "email"), _field(data, "password"))
        account = runtime.auth.get_account(session.subject)
        snapshot = runtime.reputation.get_account(session.subject)
        return {
            "token": session.token,
            "expiresAt": session.expires_at,
            "profile": {
                "id": account.id,
                "name": account.name,
                "email": account.email,
                "creditedPoints": snapshot.credited,
            },
        }

    @app.get("/healthz")
    async def healthz():
        if not runtime.store.healthcheck():
            return _error_response(503, "store_unavailable", "document store is not reachable")
        return {"status": "ok", "version": __version__}

    # --- catalog ---

    @app.get("/categories")
    async def categories(claims: TokenClaims = Depends(require_claims)):
        return [{"id": c.id, "name": c.name} for c in runtime.catalog.list_categories()]

    @app.get("/products")
    async def search_products(
        q: str = "",
        category: str | None = None,
        min_price: int | None = None,
        max_price: int | None = None,
        limit: int | None = None,
        offset: int = 0,
        claims: TokenClaims = Depends(require_claims),
    ):
        limit, offset = _page_args(limit, offset)
        results = runtime.catalog.search(
            query=q,
            category_id=category,
            min_price=min_price,
            max_price=max_price,
            limit=limit,
            offset=offset,
        )
        return [_listing_summary(r) for r in results]

    @app.post("/products", status_code=201)
    async def create_product(
        name: str = Form(...),
        description: str = Form(""),
        price: int = Form(...),
        categoryId: str = Form(...),
        quantity: int = Form(1),
        shipping: bool = Form(False),
        photo: UploadFile | None = File(None),
        claims: TokenClaims = Depends(require_claims),
    ):
        photo_bytes = await photo.read() if photo is not None else None
        listing = runtime.catalog.create_listing(
            claims.subject,
            name=name,
            description=description,
            price=price,
            category_id=categoryId,
            quantity=quantity,
            photo=photo_bytes,
            photo_media_type=photo.content_type if photo is not None else None,
            shipping=shipping,
        )
        return _listing_detail(runtime.catalog.get_listing(listing.id))

    @app.get("/products/{product_id}")
    async def get_product(product_id: str, claims: TokenClaims = Depends(require_claims)):
        return _listing_detail(runtime.catalog.get_listing(product_id))

    @app.get("/products/{product_id}/photo")
    async def get_product_photo(product_id: str, claims: TokenClaims = Depends(require_claims)):
        blob, media_type = runtime.catalog.get_photo(product_id)
        return Response(content=blob, media_type=media_type)

    @app.delete("/products/{product_id}", status_code=204)
    async def delete_product(product_id: str, claims: TokenClaims = Depends(require_claims)):
        runtime.catalog.delete_listing(claims.subject, product_id)
        return Response(status_code=204)

    # --- transactions ---

    @app.post("/products/{product_id}/request")
    async def request_product(product_id: str, claims: TokenClaims = Depends(require_claims)):
        record, exchange = runtime.transactions.request_product(claims.subject, product_id)
        return {"request": _request_record(record), "contact": _contact_exchange(exchange)}

    @app.post("/requests/{request_id}/resolve")
    async def resolve_request(
        request_id: str, request: Request, claims: TokenClaims = Depends(require_claims)
    ):
        data = await _json_body(request)
        record = runtime.transactions.resolve(
            claims.subject, request_id, _field(data, "outcome")
        )
        return _request_record(record)

    @app.get("/me/requests")
    async def my_requests(claims: TokenClaims = Depends(require_claims)):
        return [_request_view(v) for v in runtime.transactions.my_requests(claims.subject)]

    @app.get("/me/prompts")
    async def my_prompts(claims: TokenClaims = Depends(require_claims)):
        return [_prompt_entry(e) for e in runtime.transactions.pending_prompts(claims.subject)]

    @app.get("/me/reputation")
    async def my_reputation(claims: TokenClaims = Depends(require_claims)):
        snapshot = runtime.reputation.get_account(claims.subject)
        return _reputation_view(snapshot, runtime.reputation.boost(snapshot.credited))

    return app


def public_route_names() -> set[tuple[str, str]]:
    """The audited allow-list: (method, path) pairs served without a token."""
    return {
        ("POST", "/auth/register"),
        ("POST", "/auth/verify-otp"),
        ("POST", "/auth/login"),
        ("GET", "/healthz"),
    }


def iter_api_routes(app: FastAPI) -> Iterator[tuple[str, str, object]]:
    """(method, path, route) for every application route, for audit tests."""
    from fastapi.routing import APIRoute

    for route in app.routes:
        if isinstance(route, APIRoute):
            for method in route.methods:
                yield method, route.path, route


def route_requires_auth(route) -> bool:
    """True when the route resolves bearer claims before its handler runs."""

    def uses_claims(dependant) -> bool:
        for dep in dependant.dependencies:
            if getattr(dep.call, "__name__", "") == "require_claims" or uses_claims(dep):
                return True
        return False

    return uses_claims(route.dependant)
