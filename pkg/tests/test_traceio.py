import pytest

from keyflood import engine, traceio
from keyflood.generate import ExperimentConfig, generate
from keyflood.network import Network


@pytest.mark.parametrize("variant", engine.VARIANTS)
@pytest.mark.parametrize("compact", [False, True])
def test_round_trip(tmp_path, variant, compact):
    net = generate(ExperimentConfig(topology="grid", n=8, seed=4, min_id_length=0, max_id_length=6))
    trace = engine.run(net, variant, record_states=not compact, meta={"seed": 4})
    path = tmp_path / "t.jsonl"
    traceio.dump_trace(trace, path)
    back = traceio.load_trace(path)
    assert back.network == net and back.variant == variant
    assert back.rounds == trace.rounds
    assert back.initial == trace.initial and back.final == trace.final
    assert back.termination_round == trace.termination_round
    assert back.meta == {"seed": 4}
    assert traceio.trace_digest(back) == traceio.trace_digest(trace)


def test_two_node_file_layout(tmp_path):
    trace = engine.run(Network.from_edges(["0", "1"], [(0, 1)]))
    path = tmp_path / "two.jsonl"
    traceio.dump_trace(trace, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + trace.termination_round
    assert '"format":"keyflood-trace"' in lines[0]
    # round 6: node 0 is asleep; node 1 opens its correction (presence, info 1,
    # correction, start, no end)
    assert '"messages":[[1,0,"11110"]]' in lines[6]


def test_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"hello": 1}\n')
    with pytest.raises(ValueError):
        traceio.load_trace(p)


def test_tree_dot_path3():
    net = Network.from_edges(["10", "0", "11"], [(0, 1), (1, 2)])
    tree = engine.extract_spanning_tree(engine.run(net))
    dot = traceio.tree_to_dot(net, tree)
    assert dot.count(" -> ") == 2
    assert 'n1 [label="1:0", style=bold]' in dot
    assert "n0 -> n1;" in dot and "n2 -> n1;" in dot


def test_csv_round_trip(tmp_path):
    rows = [{"a": 1, "b": "x"}, {"a": 2, "b": ""}]
    traceio.write_csv(tmp_path / "r.csv", rows)
    assert traceio.read_csv(tmp_path / "r.csv") == [{"a": "1", "b": "x"}, {"a": "2", "b": ""}]
