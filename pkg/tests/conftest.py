from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
REPO_DIR = TESTS_DIR.parent
FIXTURES = REPO_DIR / "fixtures"

sys.path.insert(0, str(TESTS_DIR))

from specmine.gateway import Cassette, LlmGateway
from specmine.protocol import ChatSession, Protocol, PromptStore


class ScriptedTransport:
    """Returns canned response texts in call order; records every request."""

    def __init__(self, responses: list[str]) -> None:
        self.responses = list(responses)
        self.requests: list[dict] = []

    def __call__(self, payload: dict) -> dict:
        self.requests.append(payload)
        if not self.responses:
            raise AssertionError("scripted transport ran out of responses")
        text = self.responses.pop(0)
        return {
            "choices": [{"message": {"role": "assistant", "content": text}}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 3},
        }

    def last_user_message(self, request_index: int = -1) -> str:
        return self.requests[request_index]["messages"][-1]["content"]


def envelope(actions: list, analysis: str = "ok") -> str:
    return json.dumps({"analysis": analysis, "actions": actions})


def make_session(responses: list[str], temperature: float = 0.8) -> tuple[ChatSession, ScriptedTransport]:
    transport = ScriptedTransport(responses)
    gateway = LlmGateway(model="test-model", transport=transport, temperature=temperature)
    cassette = Cassette(mode="passthrough")
    return ChatSession(gateway=gateway, cassette=cassette, temperature=temperature), transport


def session_factory_for(responses: list[str]) -> tuple[object, ScriptedTransport]:
    """One shared transport feeding any number of fresh sessions."""
    transport = ScriptedTransport(responses)
    gateway = LlmGateway(model="test-model", transport=transport)
    cassette = Cassette(mode="passthrough")

    def factory() -> ChatSession:
        return ChatSession(gateway=gateway, cassette=cassette, temperature=0.8)

    return factory, transport


@pytest.fixture(scope="session")
def store() -> PromptStore:
    return PromptStore()


@pytest.fixture(scope="session")
def protocol(store: PromptStore) -> Protocol:
    return Protocol(store)


@pytest.fixture(scope="session")
def erc20_doc_path() -> Path:
    return FIXTURES / "erc20" / "erc20_excerpt.txt"


@pytest.fixture(scope="session")
def erc20_cassette_path() -> Path:
    return FIXTURES / "erc20" / "cassette.jsonl"


@pytest.fixture(scope="session")
def erc20_gold_path() -> Path:
    return FIXTURES / "erc20" / "gold.json"
