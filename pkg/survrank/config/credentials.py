"""API key lookup for the remote comparator endpoint."""

import json
import os
from typing import Optional

from survrank.config.settings import get_settings

ENV_VARS = ("SURVRANK_API_KEY", "OPENAI_API_KEY")


def get_api_key() -> Optional[str]:
    """Get the API key for the remote endpoint.

    Checks in order:
    1. Environment variable (SURVRANK_API_KEY, then OPENAI_API_KEY)
    2. Credentials file (~/.survrank/credentials.json, {"remote": {"api_key": ...}})

    Local endpoints usually need no key, so None is a valid answer.
    """
    settings = get_settings()

    for env_var in ENV_VARS:
        key = os.environ.get(env_var)
        if key:
            return key

    creds_path = settings.credentials_path
    if creds_path.exists():
        try:
            with open(creds_path, "r") as f:
                creds = json.load(f)
            return creds.get("remote", {}).get("api_key")
        except (OSError, json.JSONDecodeError, AttributeError):
            pass

    return None
