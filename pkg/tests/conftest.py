from __future__ import annotations

import random

import pytest

from modalflow.adapters import AdapterRegistry, build_mock_registry
from modalflow.mock_backend import MockBackend, MockSettings


@pytest.fixture()
def no_sleep_registry_factory():
    """Builds mock registries whose retry loop never really sleeps."""

    def factory(settings: MockSettings | None = None) -> AdapterRegistry:
        return build_mock_registry(settings, sleeper=lambda ms: None, rng=random.Random(0))

    return factory


@pytest.fixture()
def mock_registry(no_sleep_registry_factory) -> AdapterRegistry:
    return no_sleep_registry_factory()


@pytest.fixture()
def mock_backend_of():
    """Digs the shared MockBackend instance out of a registry for call counting."""

    def get(registry: AdapterRegistry) -> MockBackend:
        backend = registry._registration("llm.chat").backend
        assert isinstance(backend, MockBackend)
        return backend

    return get
