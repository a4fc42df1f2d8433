"""Wire protocol records for the persistent client connection.

Each record is one tagged JSON object (the ``type`` field); on a byte
stream records are newline-delimited, over a WebSocket each text frame
carries exactly one record. Field names here are the protocol contract,
shared verbatim with the web client.

Client -> server: ``join {session_id, display_name}`` (optional
``participant_id`` + ``resume_from`` for reconnects, optional ``role``),
``chat {text}``, ``survey {answers}``.
Server -> client: ``welcome {participant_id, subgroup_id, roster}``,
``chat {message_id, author_kind, author_name, text, provenance,
timestamp}``, ``system {phase, remaining_seconds, task_prompt}``,
``ended {report_ref}``, plus ``error {reason}`` and, for facilitators,
``event {...}`` mirroring the session log.
"""

from __future__ import annotations

import json
from typing import Mapping

from swarmchat.model import ChatMessage


def encode(record: Mapping) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def decode(line: str) -> dict:
    record = json.loads(line)
    if not isinstance(record, dict) or "type" not in record:
        raise ValueError("wire records must be tagged objects")
    return record


def welcome(participant_id: str, subgroup_id: str, roster: list[dict]) -> dict:
    return {
        "type": "welcome",
        "participant_id": participant_id,
        "subgroup_id": subgroup_id,
        "roster": roster,
    }


def chat(message: ChatMessage, author_name: str, seq: int) -> dict:
    provenance: dict = {"kind": message.provenance.kind.value}
    if message.provenance.insight_id is not None:
        provenance["insight_id"] = message.provenance.insight_id
    return {
        "type": "chat",
        "message_id": message.message_id,
        "author_kind": message.author.kind.value,
        "author_name": author_name,
        "text": message.text,
        "provenance": provenance,
        "timestamp": message.timestamp,
        "seq": seq,
    }


def system(phase: str, remaining_seconds: float, task_prompt: str) -> dict:
    return {
        "type": "system",
        "phase": phase,
        "remaining_seconds": remaining_seconds,
        "task_prompt": task_prompt,
    }


def ended(report_ref: str) -> dict:
    return {"type": "ended", "report_ref": report_ref}


def error(reason: str) -> dict:
    return {"type": "error", "reason": reason}
