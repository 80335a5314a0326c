"""Shared HTTP plumbing for the embed / rerank / generate providers."""

from __future__ import annotations

import os
import time

import requests

from .errors import ProviderContractError, ProviderTransportError

AUTH_TOKEN_ENV = "RAGQA_API_TOKEN"


def post_json(url: str, payload: dict, timeout: float = 60.0, retries: int = 2) -> dict:
    """POST JSON and return the decoded JSON body.

    Network failures and 5xx responses are retried with a short backoff,
    then raised as ProviderTransportError; 4xx responses and undecodable
    bodies are ProviderContractError (fatal, no retry).
    """
    headers = {}
    token = os.environ.get(AUTH_TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"

    last_error: Exception | None = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(min(0.2 * 2 ** (attempt - 1), 1.0))
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
            continue
        if resp.status_code >= 500:
            last_error = RuntimeError(f"HTTP {resp.status_code}")
            continue
        if resp.status_code >= 400:
            raise ProviderContractError(
                f"{url} returned {resp.status_code}: {resp.text[:200]}"
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderContractError(f"{url} returned non-JSON body") from exc
    raise ProviderTransportError(f"cannot reach {url}: {last_error}")
