"""Story markup: parser, printer, lint, expressions, runtime semantics."""

import pytest
from hypothesis import given, strategies as st

from pif.story import (
    BranchTaken,
    ChoicePresented,
    Choose,
    IllegalEvent,
    NextPage,
    PageShown,
    ParseErrors,
    StoryEnded,
    TagClosed,
    TagOpened,
    TieBroken,
    advance,
    lint,
    parse,
    print_story,
    render_page,
    start,
)
from pif.story.expr import EvalError, evaluate, parse_expr, print_expr
from pif.story.model import Binary, Num, Unary, Var

THREE_KNOTS = """\
== cell ==
##DUNGEON_START
You wake in a cold stone cell.
---
A guard passes by.
##DUNGEON_STOP
* [Follow him] -> hall
* [Stay put] -> wait

== hall ==
Torchlight flickers on wet stone.
*auto {argmax: arousal@DUNGEON, calm@DUNGEON} -> wait
-> ending

== wait ==
Time crawls.
-> ending

== ending ==
It is over.
-> END
"""


def drain(graph, *events):
    """Run a reader-event sequence, returning (final state, all engine events)."""
    state, log = start(graph)
    for event in events:
        state, evs = advance(state, event)
        log.extend(evs)
    return state, log


# ---------------------------------------------------------------------------
# parsing

class TestParse:
    def test_three_knots_one_tag_span(self):
        graph = parse(THREE_KNOTS)
        assert graph.knot_names == ["cell", "hall", "wait", "ending"]
        assert graph.entry_knot == "cell"
        cell = graph.knot("cell")
        assert len(cell.pages) == 2
        assert [(s.tag, s.start_page, s.end_page) for s in cell.tag_spans] == [
            ("DUNGEON", 0, 1)
        ]

    def test_empty_document(self):
        with pytest.raises(ParseErrors) as err:
            parse("")
        assert "empty story" in str(err.value)

    def test_unknown_divert_target_names_knot_and_line(self):
        src = "== a ==\nhello\n-> nowhere\n"
        with pytest.raises(ParseErrors) as err:
            parse(src, origin="story.pif")
        (diag,) = err.value.errors
        assert "nowhere" in diag.message
        assert diag.line == 3
        assert diag.path == "story.pif"

    def test_duplicate_knot(self):
        src = "== a ==\nx\n-> END\n\n== a ==\ny\n-> END\n"
        with pytest.raises(ParseErrors, match="duplicate knot 'a'"):
            parse(src)

    def test_unbalanced_tag(self):
        src = "== a ==\n##WOODS_START\ndeep trees\n-> END\n"
        with pytest.raises(ParseErrors, match="not closed"):
            parse(src)

    def test_misnested_tags(self):
        src = (
            "== a ==\n##OUTER_START\n##INNER_START\ntext\n"
            "##OUTER_STOP\n##INNER_STOP\n-> END\n"
        )
        with pytest.raises(ParseErrors, match="'OUTER' closed while 'INNER' is open"):
            parse(src)

    def test_undeclared_variable_in_condition(self):
        src = "== a ==\nx\n* {missing > 1} [Go] -> a\n"
        with pytest.raises(ParseErrors, match="undeclared variable 'missing'"):
            parse(src)

    def test_story_cannot_assign_director_variables(self):
        src = "== a ==\nx\n~ phys_arousal = 1\n-> END\n"
        with pytest.raises(ParseErrors, match="director-owned"):
            parse(src)

    def test_auto_rule_needs_two_operands(self):
        src = "== a ==\nx\n*auto {argmax: arousal@HERE} -> a\n"
        with pytest.raises(ParseErrors, match="at least 2 operands"):
            parse(src)

    def test_threshold_rule_shape(self):
        src = "== a ==\nx\n*auto {threshold: phys_arousal} -> a\n"
        with pytest.raises(ParseErrors, match="operand >= number"):
            parse(src)

    def test_empty_page_rejected(self):
        src = "== a ==\nx\n---\n---\ny\n-> END\n"
        with pytest.raises(ParseErrors, match="no display text"):
            parse(src)

    def test_nested_tags_parse(self):
        src = (
            "== a ==\n##OUTER_START\none\n---\n##INNER_START\ntwo\n"
            "##INNER_STOP\n##OUTER_STOP\n-> END\n"
        )
        graph = parse(src)
        spans = graph.knot("a").tag_spans
        assert [(s.tag, s.start_page, s.end_page) for s in spans] == [
            ("INNER", 1, 1),
            ("OUTER", 0, 1),
        ]


# ---------------------------------------------------------------------------
# printing

class TestRoundTrip:
    def test_three_knot_round_trip(self):
        graph = parse(THREE_KNOTS)
        assert parse(print_story(graph)) == graph

    def test_full_feature_round_trip(self):
        src = """\
VAR courage = 2
VAR fear = 0.5

== intro ==
##HALL_START
You stand in the hall{courage > 1: , unafraid | , trembling}.
~ fear = fear * 2
---
The door creaks.
##HALL_STOP
* [Open it] -> door
* {fear < 2 && courage > 0} [Hide] -> hide
*auto {threshold: dread@HALL >= 0.7} -> hide

== door ==
Beyond lies {fear > 1: darkness | light}.
-> END

== hide ==
You crouch behind a chair.
*auto {argmax: arousal@HALL, phys_calm} -> door
-> END
"""
        graph = parse(src)
        printed = print_story(graph)
        assert parse(printed) == graph
        # canonical form is a fixed point
        assert print_story(parse(printed)) == printed


# ---------------------------------------------------------------------------
# expressions

class TestExpr:
    def test_precedence(self):
        assert evaluate(parse_expr("1 + 2 * 3"), {}) == 7

    def test_phys_comparison(self):
        vars = {"phys_dungeon_arousal": 0.8, "phys_forest_arousal": 0.2}
        expr = parse_expr("phys_dungeon_arousal > phys_forest_arousal")
        assert evaluate(expr, vars) is True

    def test_unbound_variable_named(self):
        with pytest.raises(EvalError, match="'foo'"):
            evaluate(parse_expr("foo + 1"), {})

    def test_phys_reads_zero_until_written(self):
        assert evaluate(parse_expr("phys_arousal"), {}) == 0.0

    def test_word_operators(self):
        expr = parse_expr("1 < 2 and not (3 < 2)")
        assert evaluate(expr, {}) is True

    @given(
        st.recursive(
            st.one_of(
                st.floats(0, 100).map(lambda v: Num(round(v, 3))),
                st.sampled_from(["alpha", "beta", "phys_x"]).map(Var),
            ),
            lambda child: st.one_of(
                st.tuples(st.sampled_from("+-*/"), child, child).map(
                    lambda t: Binary(t[0], t[1], t[2])
                ),
                child.map(lambda e: Unary("-", e)),
            ),
            max_leaves=12,
        )
    )
    def test_expr_print_parse_round_trip(self, expr):
        assert parse_expr(print_expr(expr)) == expr


# ---------------------------------------------------------------------------
# lint

class TestLint:
    def test_clean_story_no_diagnostics(self):
        assert lint(parse(THREE_KNOTS)) == []

    def test_unreachable_knot(self):
        src = "== a ==\nx\n-> END\n\n== orphan ==\ny\n-> END\n"
        diags = lint(parse(src))
        assert any("unreachable knot 'orphan'" in d.message for d in diags)
        assert all(d.severity == "warning" for d in diags)

    def test_dead_end_knot(self):
        src = "== a ==\nx\n-> trap\n\n== trap ==\nno way out\n"
        diags = lint(parse(src))
        assert any("dead end" in d.message and d.severity == "error" for d in diags)

    def test_no_terminating_path(self):
        src = "== a ==\nx\n-> b\n\n== b ==\ny\n-> a\n"
        diags = lint(parse(src))
        assert any("no terminating path" in d.message for d in diags)

    def test_unconsumed_tag_info(self):
        src = "== a ==\n##FOREST_START\ntrees\n##FOREST_STOP\n-> END\n"
        diags = lint(parse(src))
        assert any(
            "'FOREST'" in d.message and d.severity == "info" for d in diags
        )

    def test_consumed_tag_is_quiet(self):
        assert lint(parse(THREE_KNOTS)) == []

    def test_diagnostic_format(self):
        src = "== a ==\nx\n-> b\n\n== b ==\ny\n-> a\n"
        graph = parse(src, origin="loop.pif")
        line = str(lint(graph)[0])
        assert line.startswith("loop.pif:")
        assert ": error: " in line or ": warning: " in line


# ---------------------------------------------------------------------------
# runtime

class TestRuntime:
    def test_start_at_entry(self):
        graph = parse("VAR courage = 5\n\n== a ==\nx\n-> END\n")
        state, events = start(graph)
        assert (state.knot, state.page) == ("a", 0)
        assert state.variables["courage"] == 5
        assert events == [PageShown(knot="a", page=0)]

    def test_entry_inside_tag_span(self):
        graph = parse("== a ==\n##CAVE_START\ndark\n##CAVE_STOP\n-> END\n")
        _, events = start(graph)
        assert events[0] == TagOpened("CAVE")

    def test_tag_closed_before_page_shown(self):
        graph = parse(THREE_KNOTS)
        state, _ = start(graph)
        state, events = advance(state, NextPage())  # to page 1, still in span
        assert [type(e) for e in events] == [PageShown, ChoicePresented]
        state, events = advance(state, Choose(0))  # leaves the span
        kinds = [type(e) for e in events]
        assert kinds.index(TagClosed) < kinds.index(PageShown)

    def test_choose_takes_branch(self):
        graph = parse(THREE_KNOTS)
        state, _ = start(graph)
        state, _ = advance(state, NextPage())
        state, events = advance(state, Choose(0))
        assert BranchTaken(source="cell", target="hall") in events
        assert state.knot == "hall"

    def test_auto_argmax_first_operand_wins(self):
        graph = parse(THREE_KNOTS)
        state, _ = start(graph)
        state, _ = advance(state, NextPage())
        state, _ = advance(state, Choose(0))  # into hall
        state = state.with_variables(
            {"phys_dungeon_arousal": 0.7, "phys_dungeon_calm": 0.3}
        )
        state, events = advance(state, NextPage())
        assert BranchTaken(source="hall", target="wait") in events
        assert not any(isinstance(e, ChoicePresented) for e in events)

    def test_auto_falls_back_to_divert(self):
        graph = parse(THREE_KNOTS)
        state, _ = start(graph)
        state, _ = advance(state, NextPage())
        state, _ = advance(state, Choose(0))
        state = state.with_variables(
            {"phys_dungeon_arousal": 0.2, "phys_dungeon_calm": 0.9}
        )
        state, events = advance(state, NextPage())
        assert BranchTaken(source="hall", target="ending") in events

    def test_auto_tie_breaks_lexically(self):
        src = """\
== pick ==
choose for me
*auto {argmax: a@X, b@X} -> zebra
*auto {argmax: b@X, a@X} -> aardvark

== zebra ==
z
-> END

== aardvark ==
a
-> END
"""
        graph = parse(src)
        state, _ = start(graph)
        state, events = advance(state, NextPage())  # both operands read 0.0
        tie = next(e for e in events if isinstance(e, TieBroken))
        assert tie.chosen == "aardvark"
        assert BranchTaken(source="pick", target="aardvark") in events

    def test_conditional_choice_hidden(self):
        src = """\
VAR courage = 0

== a ==
x
* [Always] -> b
* {courage > 3} [Brave only] -> b

== b ==
y
-> END
"""
        state, events = start(parse(src))
        presented = next(e for e in events if isinstance(e, ChoicePresented))
        assert presented.labels == ("Always",)
        with pytest.raises(IllegalEvent):
            advance(state, Choose(1))

    def test_next_page_requires_choice(self):
        graph = parse(THREE_KNOTS)
        state, _ = start(graph)
        state, _ = advance(state, NextPage())
        with pytest.raises(IllegalEvent, match="choice is required"):
            advance(state, NextPage())

    def test_story_end(self):
        graph = parse("== a ==\nx\n-> END\n")
        state, _ = start(graph)
        state, events = advance(state, NextPage())
        assert events[-1] == StoryEnded()
        assert state.ended
        with pytest.raises(IllegalEvent):
            advance(state, NextPage())

    def test_assignment_runs_on_page_entry(self):
        src = "VAR x = 1\n\n== a ==\n~ x = x * 10\nnow {x >= 10: big | small}\n-> END\n"
        state, _ = start(parse(src))
        assert state.variables["x"] == 10
        assert render_page(state) == "now big"

    def test_replay_determinism(self):
        graph = parse(THREE_KNOTS)
        script = [NextPage(), Choose(0), NextPage()]
        first_state, first_log = drain(graph, *script)
        second_state, second_log = drain(graph, *script)
        assert first_log == second_log
        assert first_state.variables == second_state.variables

    # values on a 0.01 grid so the transform cannot collapse distinct
    # operands to the same float
    @given(
        values=st.tuples(
            st.integers(-1000, 1000).map(lambda n: n / 100),
            st.integers(-1000, 1000).map(lambda n: n / 100),
        ),
        scale=st.floats(0.1, 5),
        shift=st.floats(-100, 100),
    )
    def test_argmax_invariant_under_monotone_transform(self, values, scale, shift):
        src = """\
== pick ==
choose
*auto {argmax: a@X, b@X} -> first
*auto {argmax: b@X, a@X} -> second

== first ==
f
-> END

== second ==
s
-> END
"""
        graph = parse(src)

        def run(a, b):
            state, _ = start(graph)
            state = state.with_variables({"phys_x_a": a, "phys_x_b": b})
            state, events = advance(state, NextPage())
            return next(e for e in events if isinstance(e, BranchTaken)).target

        a, b = values
        assert run(a, b) == run(scale * a + shift, scale * b + shift)

    def test_tag_events_balanced_and_nested(self):
        src = """\
== a ==
##OUTER_START
one
---
##INNER_START
two
##INNER_STOP
---
three
##OUTER_STOP
*auto {argmax: v@OUTER, w@INNER} -> done
-> done

== done ==
over
-> END
"""
        graph = parse(src)
        _, log = drain(graph, NextPage(), NextPage(), NextPage(), NextPage())
        stack = []
        for event in log:
            if isinstance(event, TagOpened):
                stack.append(event.tag)
            elif isinstance(event, TagClosed):
                assert stack and stack[-1] == event.tag
                stack.pop()
        assert stack == []
