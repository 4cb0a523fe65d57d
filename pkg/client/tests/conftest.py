"""Shared fixtures: a live daemon spawned through its CLI."""

from __future__ import annotations

import json
import shutil
import signal
import subprocess

import pytest


@pytest.fixture(scope="module")
def daemon(tmp_path_factory):
    """Spawn hubd on an ephemeral port; yields its host:port target."""
    exe = shutil.which("hubd")
    assert exe, "hubd must be installed and on PATH"
    config = tmp_path_factory.mktemp("daemon") / "hub.json"
    config.write_text(json.dumps({
        "server": {"listen": "127.0.0.1:0"},
        "plugins": [
            {"name": "register", "library": "builtin:register"},
            {"name": "attr", "library": "builtin:attr"},
            {"name": "stream", "library": "builtin:stream"},
            {"name": "monitor", "library": "builtin:monitor"},
        ],
    }))
    proc = subprocess.Popen(
        [exe, "--config", str(config), "--log-level", "warn"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        banner = proc.stdout.readline().strip()
        if not banner.startswith("listening on "):
            proc.kill()
            _, err = proc.communicate(timeout=5)
            pytest.fail(f"daemon failed to start: {banner!r}\n{err}")
        yield banner.removeprefix("listening on ")
    finally:
        if proc.poll() is None:
            proc.send_signal(signal.SIGTERM)
            proc.wait(timeout=10)
