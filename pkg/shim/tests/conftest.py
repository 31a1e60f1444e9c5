"""Spins up one shim instance (small local models) for the whole session.

Tests run offline against the local HF cache; pre-download the two test
models once, or unset HF_HUB_OFFLINE to allow downloads. Override the model
choices with SHIM_TEST_NLI_MODEL / SHIM_TEST_EMBED_MODEL.
"""

import os
import threading
import time

# must be set before transformers imports
os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

import pytest
import uvicorn

from nli_shim import ShimConfig, create_app

TEST_NLI_MODEL = os.environ.get("SHIM_TEST_NLI_MODEL",
                                "cross-encoder/nli-deberta-v3-xsmall")
TEST_EMBED_MODEL = os.environ.get("SHIM_TEST_EMBED_MODEL",
                                  "sentence-transformers/all-MiniLM-L6-v2")


@pytest.fixture(scope="session")
def shim_url():
    config = ShimConfig(nli_model_id=TEST_NLI_MODEL,
                        embed_model_id=TEST_EMBED_MODEL,
                        batch_size=8)
    app = create_app(config)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0,
                                           log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 300
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("shim did not start within 300s")
        if not thread.is_alive():
            raise RuntimeError("shim server thread died during startup")
        time.sleep(0.1)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)
