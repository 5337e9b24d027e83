"""Multi-turn conversational sessions over the pipeline operations.

Turn flow: an optional image is first described and rendered into the
standard description block; the prompt is then assembled as

    system prompt
    [description block]          (only when an image came with the turn)
    [rendered prior turns]       (only when history is non-empty)
    User: <current text>
    Assistant:

joined with single newlines. Prior turns render as
``User: {u}\\nAssistant: {r}`` and are truncated as whole turns: the
longest suffix of the history whose rendering fits the character budget is
kept; the current turn is never truncated. The exact prompt sent to the
model is stored on the turn, so any turn can be replayed verbatim later.

One turn at a time per session: a second concurrent post fails fast with
:class:`BusyError` instead of queueing. A failed stage (vision or model)
surfaces as :class:`AgentStageError` and leaves the session history
untouched.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .adapters import AdapterRegistry
from .errors import AgentStageError, BusyError, ConfigError, ModalflowError, UnknownSessionError
from .payload import Modality, Payload, vision_description_block


@dataclass(frozen=True)
class AgentConfig:
    system_prompt: str = "You are a helpful multimodal assistant."
    history_char_budget: int = 4000
    chat_operation: str = "llm.chat"
    vision_operation: str = "vision.describe"

    def __post_init__(self) -> None:
        if self.history_char_budget < 0:
            raise ConfigError("history_char_budget must be >= 0")


@dataclass(frozen=True)
class Turn:
    user_text: str
    assistant_text: str
    prompt_used: str
    had_image: bool = False


@dataclass
class Session:
    id: str
    system_prompt: str
    turns: list[Turn] = field(default_factory=list)


def render_history_turn(turn: Turn) -> str:
    return f"User: {turn.user_text}\nAssistant: {turn.assistant_text}"


def truncate_history(turns: list[Turn], budget: int) -> list[Turn]:
    """Longest suffix of whole turns whose joined rendering fits the budget."""
    kept: list[Turn] = []
    used = 0
    for turn in reversed(turns):
        cost = len(render_history_turn(turn)) + (1 if kept else 0)  # newline between turns
        if used + cost > budget:
            break
        kept.append(turn)
        used += cost
    kept.reverse()
    return kept


def assemble_prompt(
    system_prompt: str,
    history: list[Turn],
    user_text: str,
    *,
    budget: int,
    vision_block: str | None = None,
) -> str:
    parts = [system_prompt]
    if vision_block is not None:
        parts.append(vision_block)
    kept = truncate_history(history, budget)
    if kept:
        parts.append("\n".join(render_history_turn(t) for t in kept))
    parts.append(f"User: {user_text}\nAssistant:")
    return "\n".join(parts)


@dataclass(frozen=True)
class TurnResult:
    turn_index: int
    reply: str
    prompt_used: str


class AgentService:
    """Session store plus the turn pipeline; safe for concurrent callers."""

    def __init__(self, registry: AdapterRegistry, config: AgentConfig | None = None) -> None:
        self.registry = registry
        self.config = config or AgentConfig()
        self._sessions: dict[str, Session] = {}
        self._session_locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()
        self._listeners: dict[str, list[Callable[[str, Mapping[str, Any]], None]]] = {}

    def create_session(self, system_prompt: str | None = None) -> Session:
        session = Session(id=uuid.uuid4().hex, system_prompt=system_prompt or self.config.system_prompt)
        with self._store_lock:
            self._sessions[session.id] = session
            self._session_locks[session.id] = threading.Lock()
            self._listeners[session.id] = []
        return session

    def session(self, session_id: str) -> Session:
        with self._store_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        return session

    def history(self, session_id: str) -> list[Turn]:
        return list(self.session(session_id).turns)

    def add_listener(self, session_id: str, listener: Callable[[str, Mapping[str, Any]], None]) -> None:
        self.session(session_id)
        with self._store_lock:
            self._listeners[session_id].append(listener)

    def _emit(self, session_id: str, event: str, data: Mapping[str, Any]) -> None:
        with self._store_lock:
            listeners = list(self._listeners.get(session_id, ()))
        for listener in listeners:
            listener(event, data)

    def _vision_block(self, image: Payload) -> str:
        if image.modality != Modality.IMAGE_REF:
            raise AgentStageError("vision", ConfigError("turn image must be an image_ref payload"))
        try:
            described = self.registry.invoke(self.config.vision_operation, {"image": image})
        except ModalflowError as e:
            raise AgentStageError("vision", e) from e
        return vision_description_block(described.body)

    def post_turn(self, session_id: str, user_text: str, *, image: Payload | None = None) -> TurnResult:
        session = self.session(session_id)
        with self._store_lock:
            lock = self._session_locks[session_id]
        if not lock.acquire(blocking=False):
            raise BusyError(f"session {session_id} is already processing a turn")
        try:
            self._emit(session_id, "turn_started", {"user_text": user_text})
            vision_block = self._vision_block(image) if image is not None else None
            prompt = assemble_prompt(
                session.system_prompt,
                session.turns,
                user_text,
                budget=self.config.history_char_budget,
                vision_block=vision_block,
            )
            try:
                reply = self.registry.invoke(self.config.chat_operation, {"prompt": Payload.text(prompt)})
            except ModalflowError as e:
                raise AgentStageError("llm", e) from e
            turn = Turn(
                user_text=user_text,
                assistant_text=reply.body.content,
                prompt_used=prompt,
                had_image=image is not None,
            )
            session.turns.append(turn)
            index = len(session.turns) - 1
            self._emit(
                session_id,
                "turn_completed",
                {"turn_index": index, "reply": turn.assistant_text},
            )
            return TurnResult(turn_index=index, reply=turn.assistant_text, prompt_used=prompt)
        except AgentStageError as e:
            self._emit(session_id, "turn_failed", {"stage": e.stage, "detail": str(e)})
            raise
        finally:
            lock.release()

    def replay_turn(self, session_id: str, turn_index: int) -> str:
        """Re-run the model on the stored prompt of an earlier turn."""
        session = self.session(session_id)
        try:
            turn = session.turns[turn_index]
        except IndexError:
            raise UnknownSessionError(f"session {session_id} has no turn {turn_index}") from None
        reply = self.registry.invoke(self.config.chat_operation, {"prompt": Payload.text(turn.prompt_used)})
        return reply.body.content
