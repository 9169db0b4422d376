"""Story markup: parsing, linting, printing, and execution."""

from .diagnostics import Diagnostic, ParseErrors
from .lint import lint
from .model import StoryGraph
from .parser import parse, parse_file
from .printer import print_story
from .runtime import (
    BranchTaken,
    ChoicePresented,
    Choose,
    EngineEvent,
    IllegalEvent,
    NextPage,
    PageShown,
    SessionState,
    StoryEnded,
    TagClosed,
    TagOpened,
    TieBroken,
    advance,
    render_page,
    start,
)

__all__ = [
    "Diagnostic",
    "ParseErrors",
    "StoryGraph",
    "parse",
    "parse_file",
    "print_story",
    "lint",
    "start",
    "advance",
    "render_page",
    "SessionState",
    "NextPage",
    "Choose",
    "IllegalEvent",
    "EngineEvent",
    "PageShown",
    "TagOpened",
    "TagClosed",
    "ChoicePresented",
    "BranchTaken",
    "TieBroken",
    "StoryEnded",
]
