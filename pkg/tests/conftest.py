"""Shared fixtures: a small deterministic corpus with drafts, suggestion
sets, grades, and matching dependency-parse files."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from revlens import corpus

WORDS = [
    "学习", "写作", "老师", "同学", "非常", "快乐", "认真", "思考", "故事", "勇气",
    "坚持", "梦想", "春天", "花朵", "温暖", "阳光", "努力", "成长", "帮助", "感动",
]
POS_CYCLE = ("NOUN", "VERB", "ADJ", "ADV", "PRON", "PROPN")
DEPRELS = ("nsubj", "obj", "advmod", "amod", "nmod", "conj")


def make_sentence(rng: random.Random, n_words: int = 4) -> str:
    return "".join(rng.choice(WORDS) for _ in range(n_words))


def make_essay(rng: random.Random, n_sentences: int) -> str:
    marks = ["。", "！", "？"]
    return "".join(
        make_sentence(rng, rng.randint(3, 6)) + rng.choice(marks)
        for _ in range(n_sentences)
    )


def conllu_for(text: str, writing_id: str) -> str:
    """Chain-shaped dependency parse per segmented sentence."""
    blocks = []
    for sentence in corpus.segment_sentences(text, writing_id):
        tokens = corpus.tokenize(sentence.text)
        lines = [f"# sent = {sentence.sentence_id}"]
        for i, form in enumerate(tokens, start=1):
            pos = POS_CYCLE[(len(form) + i) % len(POS_CYCLE)]
            head = 0 if i == 1 else i - 1
            rel = "root" if i == 1 else DEPRELS[i % len(DEPRELS)]
            lines.append(f"{i}\t{form}\t{form}\t{pos}\t_\t_\t{head}\t{rel}\t_\t_")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def build_fixture_corpus(
    root: Path,
    n_students: int = 4,
    n_tasks: int = 2,
    seed: int = 7,
    revise: bool = True,
) -> dict:
    """Write corpus.jsonl plus conllu/ files; returns paths and ids."""
    rng = random.Random(seed)
    records = []
    conllu_dir = root / "conllu"
    conllu_dir.mkdir(parents=True, exist_ok=True)
    writing_ids = []
    for student in range(n_students):
        for task in range(n_tasks):
            sid, tid = f"s{student:03d}", f"t{task:02d}"
            teacher = f"T{student % 2}"
            school = f"school{student % 2}"
            base = make_essay(rng, rng.randint(4, 7))
            pre_id = f"w-{sid}-{tid}-pre"
            post_id = f"w-{sid}-{tid}-post"
            extra = make_sentence(rng, 5) + "。"
            post_text = base + extra if revise else base
            for wid, phase, text in ((pre_id, "pre", base), (post_id, "post", post_text)):
                records.append({
                    "writing_id": wid,
                    "student_id": sid,
                    "teacher_id": teacher,
                    "task_id": tid,
                    "school_id": school,
                    "phase": phase,
                    "text": text,
                    "timestamp": f"2024-03-{(student + 1):02d}T10:00:00",
                })
                (conllu_dir / f"{wid}.conllu").write_text(
                    conllu_for(text, wid), encoding="utf-8"
                )
                writing_ids.append(wid)
            suggestions_initial = [
                {"suggestion_id": f"{pre_id}-i{k}",
                 "text": f"Description: add sensory {make_sentence(rng, 2)}"}
                for k in range(2)
            ]
            suggestions_final = [
                {"suggestion_id": f"{pre_id}-f0",
                 "text": suggestions_initial[0]["text"]},
                {"suggestion_id": f"{pre_id}-f1",
                 "text": f"Emotion: show feeling about {extra[:-1]}"},
            ]
            records.append({"writing_id": pre_id, "stage": "initial",
                            "suggestions": suggestions_initial})
            records.append({"writing_id": pre_id, "stage": "final",
                            "suggestions": suggestions_final})
            for grader in ("llm", "teacher"):
                pre_grade = 55 + rng.random() * 25
                gain = rng.random() * 12
                records.append({"writing_id": pre_id, "grader": grader,
                                "phase": "pre", "value": round(pre_grade, 2)})
                records.append({"writing_id": post_id, "grader": grader,
                                "phase": "post", "value": round(min(100.0, pre_grade + gain), 2)})
    corpus_path = root / "corpus.jsonl"
    with corpus_path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return {
        "corpus": corpus_path,
        "conllu_dir": conllu_dir,
        "writing_ids": writing_ids,
    }


@pytest.fixture
def fixture_corpus(tmp_path):
    return build_fixture_corpus(tmp_path)
