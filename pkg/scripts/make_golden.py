#!/usr/bin/env python3
"""Regenerate the golden fixtures under tests/fixtures/.

Produces the synthetic 12-page deck, the scripted gateway fixtures for
planning and teaching, the scripted user events, and the golden agenda,
queue, and transcript the test suite compares against byte-for-byte.
Deterministic: running it twice changes nothing.
"""

from __future__ import annotations

import copy
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from pptxgen import build_pptx  # noqa: E402

from slidetutor.agenda import (  # noqa: E402
    Description,
    _merge_reply,
    agenda_to_dict,
    build_agenda,
    leaves,
    new_agenda,
    prune,
    render_outline,
)
from slidetutor.config import EngineConfig, RendererConfig  # noqa: E402
from slidetutor.deck import parse_deck, rasterize_deck  # noqa: E402
from slidetutor.engine import TutoringEngine, history_clock  # noqa: E402
from slidetutor.gateway import Gateway, ScriptedBackend  # noqa: E402
from slidetutor.harness import ScriptedUser, run_session  # noqa: E402
from slidetutor.jsonio import atomic_write_json  # noqa: E402
from slidetutor.planner import compile_queue  # noqa: E402

FIXTURES = REPO / "tests" / "fixtures"

SLIDES = [
    ["Intro to Machine Learning", "What learning from data means\nCourse roadmap"],
    ["What is Machine Learning?", "Programs that improve with experience\nData in, predictions out"],
    ["Supervised and Unsupervised", "Labeled data vs structure discovery\nExamples of each"],
    ["The Learning Pipeline", "Collect, split, train, evaluate\nIterate on errors"],
    ["Linear Regression", "Fit a line by minimizing squared error\nWeights and bias"],
    ["Logistic Regression", "Linear scores through a sigmoid\nDecision boundaries"],
    ["Regularization", "Penalize large weights\nRidge and lasso"],
    ["Perceptrons", "Weighted sums and activations\nFrom neurons to layers"],
    ["Backpropagation", "Chain rule over the network\nGradient descent updates"],
    ["Deep Architectures", "Stacked layers learn features\nDepth and capacity"],
    ["Train/Test Splits", "Hold out data to estimate generalization\nCross-validation"],
    ["Metrics", "Accuracy, precision, recall\nChoosing the right one"],
]

DESCRIPTIONS = [
    "Opening slide naming the course and sketching the roadmap for learning from data.",
    "Defines machine learning as programs improving with experience, turning data into predictions.",
    "Contrasts supervised learning on labeled data with unsupervised structure discovery.",
    "Walks through the learning pipeline: collect, split, train, evaluate, iterate.",
    "Introduces linear regression: fitting a line by minimizing squared error with weights and a bias.",
    "Covers logistic regression, passing linear scores through a sigmoid to form decision boundaries.",
    "Explains regularization, penalizing large weights with ridge and lasso.",
    "Presents the perceptron: weighted sums with activations, from single neurons to layers.",
    "Describes backpropagation, applying the chain rule across the network for gradient descent.",
    "Shows deep architectures where stacked layers learn features, relating depth to capacity.",
    "Explains train/test splits and cross-validation for estimating generalization.",
    "Surveys evaluation metrics: accuracy, precision, recall, and how to choose among them.",
]

SCRIPTS = [
    "Hello everyone and welcome to Intro to Machine Learning. Today we will see what it means for a program to learn from data, and here is the roadmap we will follow.",
    "So what is machine learning? It is the craft of writing programs that improve with experience: we feed them data, and they give us predictions.",
    "There are two big families. Supervised learning works from labeled data, while unsupervised learning hunts for structure without labels. Keep both in mind.",
    "Every project follows the same pipeline: collect data, split it, train a model, evaluate it, and iterate on the errors you find.",
    "Let us start with linear regression. We fit a line by minimizing squared error, adjusting weights and a bias until the fit is tight.",
    "Logistic regression takes the same linear score and pushes it through a sigmoid, which gives us clean decision boundaries for classification.",
    "To keep models honest we regularize: ridge and lasso both penalize large weights, each in its own way.",
    "Neural networks begin with the perceptron: a weighted sum passed through an activation. Stack a few and you have layers.",
    "Backpropagation is just the chain rule applied across the network, handing each weight its gradient for the descent update.",
    "Deep architectures stack many layers so features build on features; depth buys capacity when you have the data for it.",
    "Before trusting any model, split your data. The held-out test set, or better cross-validation, estimates how you will do on new data.",
    "Finally, metrics. Accuracy is a start, but precision and recall often matter more; pick the metric that matches the cost of mistakes.",
]

# (new section labels, per page) driving the segmentation replies
CHAINS: dict[int, list[str]] = {
    0: ["Foundations"],
    4: ["Models", "Linear Models"],
    7: ["Neural Networks"],
    10: ["Evaluation"],
}
# depth of the new leaf line per page
LEAF_DEPTHS = [3, 3, 3, 3, 4, 4, 4, 4, 4, 4, 3, 3]

QUIZ_FOUNDATIONS = """Question: Which family of machine learning works from labeled data? (single choice)
A. Unsupervised learning
B. Supervised learning
C. Random search
D. Data collection
Answer: B
Reference Text: Supervised learning works from labeled data, while unsupervised learning hunts for structure without labels.

Question: What is the last step of the learning pipeline before iterating? (single choice)
A. Collecting data
B. Splitting data
C. Training
D. Evaluating
Answer: D
Reference Text: Every project follows the same pipeline: collect data, split it, train a model, evaluate it.

Question: What do machine learning programs improve with? (single choice)
A. Experience
B. Hardware alone
C. Random chance
D. Longer code
Answer: A
Reference Text: It is the craft of writing programs that improve with experience.
"""

QUIZ_LINEAR = """Question: What does ridge regression remove from the dataset? (single choice)
A. Rows
B. Columns
Answer: G
Reference Text: This block is deliberately broken.

Question: What do we minimize when fitting linear regression? (single choice)
A. Squared error
B. The number of weights
C. The sigmoid
D. Recall
Answer: A
Reference Text: We fit a line by minimizing squared error, adjusting weights and a bias until the fit is tight.

Question: Which methods penalize large weights? (multiple choice)
A. Ridge
B. Lasso
C. Cross-validation
D. Accuracy
Answer: AB
Reference Text: Ridge and lasso both penalize large weights, each in its own way.
"""

QUIZ_NEURAL = """Question: Which of the following are true of neural networks? (multiple choice)
A. A perceptron computes a weighted sum passed through an activation
B. Backpropagation applies the chain rule across the network
C. Depth removes the need for data
D. Layers cannot be stacked
Answer: AB
Reference Text: Neural networks begin with the perceptron: a weighted sum passed through an activation. Backpropagation is just the chain rule applied across the network.

Question: What does backpropagation hand each weight? (single choice)
A. A new dataset
B. Its gradient
C. A label
D. A sigmoid
Answer: B
Reference Text: Backpropagation is just the chain rule applied across the network, handing each weight its gradient.

Question: What buys capacity in deep architectures? (single choice)
A. Depth
B. Lunch breaks
C. Fewer layers
D. Smaller datasets
Answer: A
Reference Text: Depth buys capacity when you have the data for it.
"""

QUIZ_MODELS = """Question: What does passing a linear score through a sigmoid produce? (single choice)
A. A regularizer
B. A random forest
C. A decision boundary for classification
D. A test split
Answer: C
Reference Text: Logistic regression takes the same linear score and pushes it through a sigmoid, which gives us clean decision boundaries for classification.

Question: Which model fits a line by minimizing squared error? (single choice)
A. Linear regression
B. A perceptron
C. Lasso
D. Cross-validation
Answer: A
Reference Text: We fit a line by minimizing squared error.

Question: What do stacked layers learn? (single choice)
A. Features
B. Labels
C. Splits
D. Metrics
Answer: A
Reference Text: Deep architectures stack many layers so features build on features.
"""

TEACH_ENTRIES = [
    {
        "expect": {"profile": "tutor", "max_history": 12,
                   "contains": ["difference between supervised"]},
        "text": "teacher",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12,
                   "system_contains": ["programs that improve with experience"]},
        "text": "Great question. Supervised learning uses labeled examples, so the model sees the right answer during training; unsupervised learning only sees the inputs and must find structure on its own.",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12,
                   "system_contains": ["Which family of machine learning works from labeled data?"]},
        "text": "Think back to which family of learning needs the right answers attached to its training data. One of the options names exactly that.",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12, "system_contains": ["(correct)"]},
        "text": "Exactly right, B. Supervised learning is the family that trains on labeled data; unsupervised learning has to find structure without labels.",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12, "contains": ["lunch"]},
        "text": "teaching_assistant",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12,
                   "system_contains": ["pushes it through a sigmoid"]},
        "text": "Let's keep lunch plans for after class; we are in the middle of the lecture. Back to logistic regression!",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12, "system_contains": ["(incorrect)"]},
        "text": "Not quite. The right answer is A: linear regression fits its line by minimizing squared error. The sigmoid belongs to logistic regression, which is a different model.",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12, "contains": ["slow down"]},
        "text": "user",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12, "system_contains": ["(correct)"]},
        "text": "Correct on both counts: a perceptron is a weighted sum through an activation, and backpropagation is the chain rule at network scale. Well done.",
    },
    {
        "expect": {"profile": "tutor", "max_history": 12, "system_contains": ["(correct)"]},
        "text": "Yes, C. The sigmoid squashes the linear score into a probability, which is what gives logistic regression its clean decision boundary.",
    },
]

USER_EVENTS = [
    {"type": "continue"},
    {"type": "say", "text": "Can you explain the difference between supervised and unsupervised learning?"},
    {"type": "continue"},
    {"type": "continue"},
    {"type": "continue"},
    {"type": "say", "text": "Could you give me a hint?"},
    {"type": "choose", "options": [1]},
    {"type": "continue"},
    {"type": "say", "text": "what should I eat for lunch later?"},
    {"type": "continue"},
    {"type": "continue"},
    {"type": "choose", "options": [2]},
    {"type": "continue"},
    {"type": "say", "text": "That was fast, can we slow down?"},
    {"type": "continue"},
    {"type": "continue"},
    {"type": "choose", "options": [0, 1]},
    {"type": "choose", "options": [2]},
    {"type": "continue"},
    {"type": "continue"},
]


def segmentation_replies() -> tuple[list[str], object]:
    """Compose outline replies page by page, tracking the evolving master."""
    replies = []
    master = new_agenda("Intro to Machine Learning")
    for index, text in enumerate(DESCRIPTIONS):
        existing = leaves(master)
        view = prune(master, existing[-1].node_id) if existing else copy.deepcopy(master)
        depth = LEAF_DEPTHS[index]
        sections = CHAINS.get(index, [])
        lines = render_outline(view).splitlines()
        start = depth - len(sections)
        for offset, label in enumerate(sections):
            lines.append("-" * (start + offset) + " " + label)
        lines.append("-" * depth + " " + text)
        reply = "\n".join(lines)
        replies.append(reply)
        master = _merge_reply(master, view, reply, Description(index, text))
    return replies, master


def plan_entries(replies: list[str]) -> list[dict]:
    entries: list[dict] = []
    for index, text in enumerate(DESCRIPTIONS):
        expect: dict = {"profile": "planner", "images": 1}
        if index == 5:
            # the f_des window is the k=3 immediately preceding descriptions
            expect["contains"] = [DESCRIPTIONS[2], DESCRIPTIONS[3], DESCRIPTIONS[4]]
            expect["not_contains"] = [DESCRIPTIONS[1]]
        entries.append({"expect": expect, "text": text})
    for index, reply in enumerate(replies):
        expect = {"profile": "planner", "images": 0, "contains": [DESCRIPTIONS[index]]}
        if index == 0:
            # the first call sees the next k=3 descriptions and nothing further
            expect["contains"] += [DESCRIPTIONS[1], DESCRIPTIONS[2], DESCRIPTIONS[3]]
            expect["not_contains"] = [DESCRIPTIONS[4]]
        entries.append({"expect": expect, "text": reply})
    for index, script in enumerate(SCRIPTS):
        expect = {"profile": "planner", "images": 1}
        if index == 5:
            expect["contains"] = [SCRIPTS[2], SCRIPTS[3], SCRIPTS[4]]
            expect["not_contains"] = [SCRIPTS[1]]
        entries.append({"expect": expect, "text": script})
    quiz_windows = {
        "foundations": (QUIZ_FOUNDATIONS, [SCRIPTS[0], SCRIPTS[1], SCRIPTS[2], SCRIPTS[3]], [SCRIPTS[4]]),
        "linear": (QUIZ_LINEAR, [SCRIPTS[3], SCRIPTS[4], SCRIPTS[5], SCRIPTS[6]], [SCRIPTS[2]]),
        "neural": (QUIZ_NEURAL, [SCRIPTS[6], SCRIPTS[7], SCRIPTS[8], SCRIPTS[9]], [SCRIPTS[5]]),
        "models": (QUIZ_MODELS, [SCRIPTS[6], SCRIPTS[7], SCRIPTS[8], SCRIPTS[9]], []),
    }
    for text, window, absent in quiz_windows.values():
        expect = {"profile": "planner", "images": 0, "contains": window}
        if absent:
            expect["not_contains"] = absent
        entries.append({"expect": expect, "text": text})
    return entries


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)

    archive = build_pptx(SLIDES)
    (FIXTURES / "golden_deck.pptx").write_bytes(archive)

    renderer = RendererConfig(
        command=f"{sys.executable} -m slidetutor.stub_renderer {{input}} {{outdir}}"
    )
    deck = rasterize_deck(parse_deck(archive, "Intro to Machine Learning"), renderer)

    replies, master = segmentation_replies()
    plan_fixture = {"scenario": "golden-plan", "entries": plan_entries(replies)}
    atomic_write_json(FIXTURES / "plan_fixture.json", plan_fixture)

    config = EngineConfig()
    gateway = Gateway(ScriptedBackend(plan_fixture))
    agenda = build_agenda(deck, gateway, config)
    assert agenda_to_dict(agenda) == agenda_to_dict(master), "fixture replies drifted"
    queue = compile_queue(agenda, deck, gateway, config, lecture_id="golden-lecture")
    kinds = [action.kind for action in queue.actions]
    assert kinds.count("ShowFile") == 12 and kinds.count("ReadScript") == 12
    assert kinds.count("AskQuestion") == 4
    assert gateway.log_records and all(r["status"] == "ok" for r in gateway.log_records)
    assert len(gateway.log_records) == 40

    atomic_write_json(FIXTURES / "golden_agenda.json", agenda_to_dict(agenda))
    atomic_write_json(FIXTURES / "golden_queue.json", queue.to_dict())

    teach_fixture = {"scenario": "golden-teach", "entries": TEACH_ENTRIES}
    atomic_write_json(FIXTURES / "teach_fixture.json", teach_fixture)
    atomic_write_json(FIXTURES / "user_script.json", {"events": USER_EVENTS})

    teach_gateway = Gateway(ScriptedBackend(teach_fixture))
    engine = TutoringEngine(queue, teach_gateway, config=config, clock=history_clock)
    session = engine.start_session("golden-lecture", "golden-student", session_id="golden-session")
    run_session(engine, session, ScriptedUser(USER_EVENTS))
    assert session.phase == "complete", session.phase
    assert len(session.step_log) == 38, len(session.step_log)
    assert len(session.history) == 55, len(session.history)
    assert teach_gateway.backend.remaining() == 0

    atomic_write_json(FIXTURES / "golden_transcript.json", session.to_dict())
    print(f"fixtures written to {FIXTURES}")
    print(f"queue: {len(queue.actions)} actions; transcript: {len(session.history)} utterances")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
