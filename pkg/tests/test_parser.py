from __future__ import annotations

from a4c.diagnostics import Severity
from a4c.lexer import tokenize
from a4c.model import (
    CallNode,
    DecisionNode,
    EdgeKind,
    ForkNode,
    InitialNode,
    InvokeNode,
    JoinNode,
    StoreNode,
    fingerprint,
)
from a4c.parser import parse

from conftest import CORPUS, corpus_text

MINI = """
model "Mini" {
  context {
    system S
    user U
    flow U -> S : A
  }
  artifact A
  artifact B
  llm L default
  agent G {
    task t {
      in A
      out B
      prompt {
        static role = "do the thing with {A}"
      }
    }
  }
}
"""


def codes(diags):
    return [d.code for d in diags]


def test_corpus_parses_cleanly():
    for name in CORPUS:
        result = parse(corpus_text(name), f"{name}.a4c")
        assert result.ok, (name, result.diagnostics)
        assert result.diagnostics == []


def test_minimal_model_shape():
    result = parse(MINI, "mini.a4c")
    assert result.ok
    model = result.model
    assert model.name == "Mini"
    assert [a.name for a in model.context.actors] == ["S", "U"]
    assert model.context.flows[0].artifacts == ("A",)
    assert [a.name for a in model.artifacts] == ["A", "B"]
    assert model.llms[0].default
    task = model.agent("G").task("t")
    assert task.inputs == ("A",) and task.outputs == ("B",)
    assert task.graph is None
    assert task.prompt.rows[0].name == "role"


def test_spans_are_one_based_and_registered():
    result = parse(MINI, "mini.a4c")
    span = result.model.source_map["agent:G"]
    assert span.file == "mini.a4c"
    assert span.start.line >= 1 and span.start.column >= 1
    assert "task:G.t" in result.model.source_map
    assert "prow:G.t/role" in result.model.source_map


def test_body_statement_kinds(testgen_text):
    model = parse(testgen_text, "t.a4c").model
    graph = model.agent("GeneratorTeam").task("generate").graph
    kinds = {type(n).__name__ for n in graph.nodes}
    assert {"InitialNode", "FinalNode", "CallNode", "DecisionNode", "StoreNode"} <= kinds
    call = graph.node_by_id("gen")
    assert isinstance(call, CallNode)
    assert call.agent == "Developer" and call.task == "generate"
    assert graph.node_by_id("chk").subject == "Report"
    store_nodes = [n for n in graph.nodes if isinstance(n, StoreNode)]
    assert [n.store for n in store_nodes] == ["codeStore"]


def test_store_edge_kinds(testgen_text):
    model = parse(testgen_text, "t.a4c").model
    graph = model.agent("GeneratorTeam").task("generate").graph
    kinds = {(e.source, e.target): e.kind for e in graph.edges}
    assert kinds[("gen", "store:codeStore")] is EdgeKind.STORE_WRITE
    assert kinds[("store:codeStore", "tst")] is EdgeKind.STORE_READ
    assert kinds[("start", "gen")] is EdgeKind.CONTROL


def test_guards(testgen_text):
    model = parse(testgen_text, "t.a4c").model
    graph = model.agent("GeneratorTeam").task("generate").graph
    guard = next(e.guard for e in graph.edges if e.target == "end" and e.guard)
    assert guard.subject == "Report" and guard.literal == "IO" and not guard.is_else


def test_else_guard():
    text = MINI.replace(
        """      prompt {
        static role = "do the thing with {A}"
      }""",
        """      body {
        decision d on A
        start -> d
        d -> end [A == Ok]
        d -> end [else]
      }""",
    )
    result = parse(text, "else.a4c")
    assert result.ok
    graph = result.model.agent("G").task("t").graph
    guards = [e.guard for e in graph.edges if e.guard is not None]
    assert any(g.is_else for g in guards)


def test_empty_body_synthesizes_start_end_edge():
    text = MINI.replace(
        """      prompt {
        static role = "do the thing with {A}"
      }""",
        "      body { }",
    )
    graph = parse(text, "e.a4c").model.agent("G").task("t").graph
    assert graph.statements == ()
    assert len(graph.edges) == 1
    edge = graph.edges[0]
    assert edge.synthetic and edge.source == "start" and edge.target == "end"
    assert isinstance(graph.nodes[0], InitialNode)


def test_fork_join_and_invoke(resell_text):
    model = parse(resell_text, "r.a4c").model
    graph = model.agent("MarketSearchConductor").task("estimate").graph
    assert any(isinstance(n, ForkNode) for n in graph.nodes)
    assert any(isinstance(n, JoinNode) for n in graph.nodes)
    execute = model.agent("EbayResearcher").task("search").graph
    invoke = next(n for n in execute.nodes if isinstance(n, InvokeNode))
    assert invoke.tool == "EbaySearchAPI" and invoke.operation == "findItems"


def test_p001_unexpected_token():
    result = parse('model "X" { artifact }', "p.a4c")
    assert not result.ok
    assert codes(result.diagnostics) == ["P001"]
    assert all(d.severity is Severity.ERROR for d in result.diagnostics)


def test_p001_missing_close_brace_is_single_error(testgen_text):
    broken = testgen_text.rstrip().rstrip("}")
    result = parse(broken, "p.a4c")
    assert not result.ok
    assert codes(result.diagnostics) == ["P001"]
    assert "end of file" in result.diagnostics[0].message


def test_p002_unterminated_string():
    result = parse('model "X { }', "p.a4c")
    assert not result.ok
    assert "P002" in codes(result.diagnostics)


def test_p003_unknown_keyword():
    result = parse('model "X" { widget W }', "p.a4c")
    assert not result.ok
    assert codes(result.diagnostics) == ["P003"]
    assert "widget" in result.diagnostics[0].message
    assert "expected" in result.diagnostics[0].message


def test_p001_self_flow():
    result = parse(
        'model "X" { context { system S flow S -> S : A } artifact A }', "p.a4c"
    )
    assert not result.ok
    assert "P001" in codes(result.diagnostics)
    assert any("source" in d.message for d in result.diagnostics)


def test_store_endpoint_orientation_errors():
    base = MINI.replace(
        """      prompt {
        static role = "do the thing with {A}"
      }""",
        "      body {\n        %s\n      }",
    )
    bad_write = parse(base % "s.write -> end", "p.a4c")
    assert any("'.write'" in d.message for d in bad_write.diagnostics)
    bad_read = parse(base % "start -> s.read", "p.a4c")
    assert any("'.read'" in d.message for d in bad_read.diagnostics)
    two_stores = parse(base % "s.read -> s.write", "p.a4c")
    assert any("at most one datastore" in d.message for d in two_stores.diagnostics)


def test_recovery_continues_after_broken_section(testgen_text):
    broken = testgen_text.replace("artifact TestSpec", "artifact artifact", 1)
    result = parse(broken, "p.a4c")
    assert not result.ok
    # later sections still produce diagnostics-free structure in this parse
    assert any(d.code == "P001" for d in result.diagnostics)


def test_diagnostics_sorted_by_position():
    text = 'model "X" { context { flow A -> A : B } widget W }'
    result = parse(text, "p.a4c")
    keys = [d.sort_key() for d in result.diagnostics]
    assert keys == sorted(keys)


def test_fingerprint_ignores_layout(testgen_text):
    compact = testgen_text.replace("\n      ", "\n  ").replace("  ", " ")
    fp1 = fingerprint(parse(testgen_text, "a").model)
    fp2 = fingerprint(parse(compact, "b").model)
    assert fp1 == fp2


def test_comments_collected_not_tokenized(testgen_text):
    lexed = tokenize(testgen_text, "t.a4c")
    assert len(lexed.comments) >= 2
    assert all(t.type != "COMMENT" for t in lexed.tokens)
