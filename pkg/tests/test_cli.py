"""CLI verbs: simulate and replay run headless and print the plan."""

from tourguide.cli import main
from tourguide.config import data_path


def test_simulate_prints_plan(capsys):
    code = main(["simulate", str(data_path("scripts", "full_session.txt"))])
    out = capsys.readouterr().out
    assert code == 0
    assert "status: closed" in out
    assert "金閣寺 / 清水寺" in out
    assert "schedule:" in out


def test_replay_prints_final_state(capsys):
    code = main(["replay", str(data_path("golden", "full_session_transcript.jsonl"))])
    out = capsys.readouterr().out
    assert code == 0
    assert "phase: 5" in out
    assert "display: mode=spot-slots" in out
    assert "maps=True" in out
