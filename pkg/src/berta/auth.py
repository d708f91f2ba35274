"""Pluggable request authentication: static tokens, a signed-token stub, or a
fixed dev user. Returns the actor's user id; raises Unauthorized otherwise."""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
from typing import Optional

from .config import ApiConfig
from .errors import Unauthorized

DEV_USER_ID = "dev-user"


def _b64u(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _b64u_decode(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + pad)


def mint_stub_token(user_id: str, key: str) -> str:
    """Issue a signed bearer token for the oidc_stub verifier (test helper)."""
    payload = _b64u(json.dumps({"sub": user_id}, separators=(",", ":")).encode())
    sig = _b64u(hmac.new(key.encode(), payload.encode(), hashlib.sha256).digest())
    return f"{payload}.{sig}"


def _verify_stub_token(token: str, key: str) -> str:
    try:
        payload_b64, sig_b64 = token.split(".", 1)
    except ValueError:
        raise Unauthorized("malformed token")
    expected = hmac.new(key.encode(), payload_b64.encode(), hashlib.sha256).digest()
    if not hmac.compare_digest(expected, _b64u_decode(sig_b64)):
        raise Unauthorized("bad signature")
    try:
        payload = json.loads(_b64u_decode(payload_b64))
        return str(payload["sub"])
    except (ValueError, KeyError) as exc:
        raise Unauthorized("malformed token payload") from exc


def authenticate(authorization_header: Optional[str], config: ApiConfig) -> str:
    """Map request credentials to an actor id per the configured auth mode."""
    if config.auth_mode == "none_dev":
        return DEV_USER_ID
    if not authorization_header or not authorization_header.startswith("Bearer "):
        raise Unauthorized("missing bearer credential")
    token = authorization_header[len("Bearer "):].strip()
    if config.auth_mode == "static_token":
        user_id = config.static_tokens.get(token)
        if user_id is None:
            raise Unauthorized("unknown token")
        return user_id
    if config.auth_mode == "oidc_stub":
        return _verify_stub_token(token, config.oidc_verification_key or "")
    raise Unauthorized(f"unsupported auth mode {config.auth_mode!r}")
