"""Run the service: python -m scorer_service (port from SCORER_PORT)."""
import os

import uvicorn

from .app import app_from_env


def main() -> None:
    uvicorn.run(app_from_env(), host=os.environ.get("SCORER_HOST", "127.0.0.1"),
                port=int(os.environ.get("SCORER_PORT", "8400")))


if __name__ == "__main__":
    main()
