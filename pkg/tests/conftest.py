import time

import pytest

from tidbus.client import TidClient
from tidbus.server import DispatchHub, FixedBlockSource


@pytest.fixture
def wait_until():
    def _wait(condition, timeout=5.0, interval=0.005, message="condition not met"):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if condition():
                return
            time.sleep(interval)
        raise AssertionError(f"timed out after {timeout}s: {message}")

    return _wait


@pytest.fixture
def start_hub():
    hubs = []

    def _start(**kwargs):
        kwargs.setdefault("port", 0)
        kwargs.setdefault("block_source", FixedBlockSource(0))
        hub = DispatchHub(**kwargs).start()
        hubs.append(hub)
        return hub

    yield _start
    for hub in hubs:
        hub.stop()


@pytest.fixture
def connect_client():
    clients = []

    def _connect(hub, **kwargs):
        client = TidClient.connect("127.0.0.1", hub.port, **kwargs)
        clients.append(client)
        return client

    yield _connect
    for client in clients:
        client.close()
