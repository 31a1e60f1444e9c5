"""Corpus ingestion and record-stream persistence.

Reads native QAItem JSONL or PubMedQA-style exports (both the original
dict-of-records JSON and row-per-line forms); malformed rows are collected
into an error report while valid rows proceed. All writes go through a
temp-file-then-rename step so a killed run never leaves a truncated
artifact in place.
"""

import json
import os
import tempfile
from typing import Any, Iterable

from .errors import CorpusError
from .models import HallucinationRecord, QAItem


def _first_key(row: dict[str, Any], *names: str) -> Any:
    for name in names:
        if name in row and row[name] is not None:
            return row[name]
    return None


def _row_to_item(row: dict[str, Any], fallback_id: str) -> QAItem:
    """Convert one native or PubMedQA-style row to a QAItem."""
    if "ground_truth" in row:
        return QAItem.from_dict(row)
    question = _first_key(row, "question", "QUESTION")
    answer = _first_key(row, "long_answer", "LONG_ANSWER")
    if question is None or answer is None:
        raise ValueError("row missing question or answer fields")
    contexts = _first_key(row, "contexts", "CONTEXTS")
    meshes = _first_key(row, "meshes", "MESHES", "mesh_terms")
    ctx = row.get("context")
    if isinstance(ctx, dict):
        contexts = contexts or ctx.get("contexts")
        meshes = meshes or ctx.get("meshes") or ctx.get("mesh_terms")
    item_id = _first_key(row, "id", "pubid", "PMID")
    return QAItem(
        id=str(item_id) if item_id is not None else fallback_id,
        question=str(question),
        ground_truth=str(answer),
        knowledge=tuple(str(c) for c in (contexts or ())),
        tags=tuple(str(m) for m in (meshes or ())),
        split=str(row.get("split", "")),
    )


def load_corpus(path: str) -> tuple[list[QAItem], list[dict[str, str]]]:
    """Load a corpus file; returns (valid items, per-row error report).

    Zero valid rows is fatal, as is a duplicate id.
    """
    if not os.path.exists(path):
        raise CorpusError(f"corpus file not found: {path}")
    with open(path, encoding="utf-8") as f:
        text = f.read()

    rows: list[tuple[str, dict[str, Any]]] = []
    errors: list[dict[str, str]] = []
    try:
        data = json.loads(text)
    except ValueError:
        data = None
    if isinstance(data, dict):
        if {"question", "QUESTION", "ground_truth"} & set(data):
            # a single record that happens to be the whole file
            rows.append(("row-0", data))
        else:
            # original PubMedQA release shape: {pmid: {QUESTION, CONTEXTS, ...}}
            for key, row in data.items():
                rows.append((str(key), row if isinstance(row, dict) else {}))
    elif isinstance(data, list):
        for i, row in enumerate(data):
            rows.append((f"row-{i}", row if isinstance(row, dict) else {}))
    else:
        for i, line in enumerate(text.splitlines()):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except ValueError as exc:
                errors.append({"row": f"line-{i + 1}", "error": f"bad JSON: {exc}"})
                continue
            rows.append((f"line-{i + 1}", row if isinstance(row, dict) else {}))

    items: list[QAItem] = []
    seen: set[str] = set()
    for row_id, row in rows:
        try:
            item = _row_to_item(row, fallback_id=row_id)
        except (ValueError, KeyError, TypeError) as exc:
            errors.append({"row": row_id, "error": str(exc)})
            continue
        if item.id in seen:
            raise CorpusError(f"duplicate item id {item.id!r} in {path}")
        seen.add(item.id)
        items.append(item)
    if not items:
        raise CorpusError(f"corpus {path}: zero valid rows")
    return items, errors


def load_items_jsonl(path: str) -> list[QAItem]:
    items, errors = load_corpus(path)
    if errors:
        raise CorpusError(f"{path}: {len(errors)} malformed rows")
    return items


def load_benchmark(path: str) -> list[HallucinationRecord]:
    """Load a HallucinationRecord JSONL stream."""
    records = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(HallucinationRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise CorpusError(f"{path} line {i + 1}: {exc}") from exc
    if not records:
        raise CorpusError(f"benchmark {path}: no records")
    return records


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl_atomic(path: str, dicts: Iterable[dict[str, Any]]) -> None:
    lines = [json.dumps(d, sort_keys=True, ensure_ascii=False) for d in dicts]
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def write_json_atomic(path: str, obj: Any) -> None:
    _atomic_write(path, json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n")


def write_text_atomic(path: str, text: str) -> None:
    _atomic_write(path, text)
