"""Aggregation service: protocol handler, stdio runner, and the TCP server."""

from __future__ import annotations

import io
import json
import socket
import threading

import pytest

from probcount import exact_dist as ed
from probcount.errors import DomainError
from probcount.randomness import RandomSource
from probcount.service import (
    AggregationServer,
    ReleasePolicy,
    ServiceConfig,
    Session,
    run_stdio,
)

from conftest import level_gof


def make_config(**kw) -> ServiceConfig:
    base = dict(endpoint="stdin", mechanism="morris", params={}, pre_count=0, seed=1)
    base.update(kw)
    return ServiceConfig(**base)


# ---------------------------------------------------------------- handler

def test_release_on_fresh_morris_session():
    session = Session(make_config())
    assert session.handle_line("RELEASE") == "VALUE 1 ESTIMATE 0"
    assert session.released


def test_votes_ack_and_count():
    session = Session(make_config())
    assert session.handle_line("VOTE 1") == "ACK"
    assert session.handle_line("VOTE 0") == "ACK"
    assert session.handle_line("STATUS") == "COUNT 2"


def test_malformed_lines_rejected():
    session = Session(make_config())
    for line in ("VOTE x", "vote 1", "RELEASE now", "", "VOTE  1", "HELLO"):
        assert session.handle_line(line) == "ERR malformed", line
    assert session.responses_seen == 0


def test_vote_after_release_rejected_and_state_frozen():
    session = Session(make_config())
    session.handle_line("VOTE 1")
    release = session.handle_line("RELEASE")
    level_after_release = session.counter.level
    assert release.startswith("VALUE ")
    assert session.handle_line("VOTE 1") == "ERR released"
    assert session.handle_line("RELEASE") == "ERR released"
    assert session.counter.level == level_after_release
    assert session.handle_line("STATUS") == "COUNT 1"


def test_status_never_reveals_level():
    # the only pre-release observable is the response count, by construction
    session = Session(make_config(seed=77))
    for _ in range(60):
        session.handle_line("VOTE 1")
        assert session.handle_line("STATUS") == f"COUNT {session.responses_seen}"


def test_pre_count_applied_before_votes():
    cfg = make_config(pre_count=100, seed=9)
    session = Session(cfg)
    reply = session.handle_line("RELEASE")
    level = int(reply.split()[1])
    estimate = int(reply.split()[3])
    assert estimate == (2 ** level - 2) - 100


def test_pre_count_release_distribution():
    # released level over many sessions with only artificial requests
    levels = []
    seeds = RandomSource(4242)
    for i in range(4000):
        session = Session(make_config(pre_count=100, seed=seeds.spawn(i).seed))
        levels.append(int(session.handle_line("RELEASE").split()[1]))
    row = ed.morris_row(100)
    assert level_gof(levels, row.prob, max_level=12).passed


def test_after_n_policy_releases_on_last_vote():
    cfg = make_config(release_policy=ReleasePolicy("after-responses", 3))
    session = Session(cfg)
    assert session.handle_line("VOTE 1") == "ACK"
    assert session.handle_line("VOTE 0") == "ACK"
    reply = session.handle_line("VOTE 1")
    first, second = reply.split("\n")
    assert first == "ACK"
    assert second.startswith("VALUE ")
    assert session.released


def test_maxgeo_and_hll_sessions_release_estimates():
    s = Session(make_config(mechanism="maxgeo", seed=3))
    s.handle_line("VOTE 1")
    reply = s.handle_line("RELEASE")
    assert reply.split()[0] == "VALUE"
    h = Session(make_config(mechanism="hyperloglog", params={"m": 16}, seed=3))
    reply = h.handle_line("RELEASE")
    levels = reply.split()[1]
    assert levels == ",".join(["1"] * 16)


def test_config_parsing():
    cfg = ServiceConfig.from_dict(
        {
            "endpoint": "127.0.0.1:0",
            "mechanism": "maxgeo",
            "params": {},
            "pre_count": 5,
            "seed": 11,
            "release_policy": {"after_responses": 7},
        }
    )
    assert cfg.listen_address() == ("127.0.0.1", 0)
    assert cfg.release_policy == ReleasePolicy("after-responses", 7)
    with pytest.raises(DomainError):
        ReleasePolicy.parse("sometimes")
    with pytest.raises(DomainError):
        ServiceConfig.from_dict({"mechanism": "laplace"})


# ---------------------------------------------------------------- stdio

def test_stdio_runner_round_trip():
    lines = "VOTE 1\nVOTE 0\nSTATUS\nRELEASE\nVOTE 1\n"
    out = io.StringIO()
    code = run_stdio(make_config(seed=2), io.StringIO(lines), out)
    assert code == 0
    replies = out.getvalue().splitlines()
    assert replies[0] == "ACK"
    assert replies[1] == "ACK"
    assert replies[2] == "COUNT 2"
    assert replies[3].startswith("VALUE ")
    assert len(replies) == 4  # terminates at release


def test_stdio_runner_without_release_reports_failure():
    out = io.StringIO()
    code = run_stdio(make_config(), io.StringIO("VOTE 1\n"), out)
    assert code == 1


# ---------------------------------------------------------------- tcp server

def _client(port: int, lines: list[str]) -> list[str]:
    with socket.create_connection(("127.0.0.1", port), timeout=10) as conn:
        reader = conn.makefile("r", encoding="utf-8", newline="\n")
        replies = []
        for line in lines:
            conn.sendall((line + "\n").encode("utf-8"))
            replies.append(reader.readline().rstrip("\n"))
    return replies


def test_tcp_server_single_client_session():
    server = AggregationServer(make_config(endpoint="127.0.0.1:0", seed=21))
    server.start()
    try:
        replies = _client(server.port, ["VOTE 1"] * 5 + ["STATUS", "RELEASE", "VOTE 1"])
        assert replies[:5] == ["ACK"] * 5
        assert replies[5] == "COUNT 5"
        assert replies[6].startswith("VALUE ")
        assert replies[7] == "ERR released"
    finally:
        assert server.wait(timeout=10) == 0


def test_tcp_server_interleaved_clients_total_count():
    server = AggregationServer(make_config(endpoint="127.0.0.1:0", seed=22))
    server.start()
    try:
        votes_per_client = 40
        threads = [
            threading.Thread(target=_client, args=(server.port, ["VOTE 1"] * votes_per_client))
            for _ in range(4)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        replies = _client(server.port, ["STATUS", "RELEASE"])
        assert replies[0] == "COUNT 160"
        assert replies[1].startswith("VALUE ")
    finally:
        assert server.wait(timeout=10) == 0
    assert server.session.counter.requests_seen == 160


def test_tcp_server_concurrent_release_has_one_winner():
    server = AggregationServer(make_config(endpoint="127.0.0.1:0", seed=23))
    server.start()
    results: list[list[str]] = []
    lock = threading.Lock()

    def race():
        out = _client(server.port, ["RELEASE"])
        with lock:
            results.append(out)

    threads = [threading.Thread(target=race) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert server.wait(timeout=10) == 0
    flat = [r[0] for r in results]
    winners = [r for r in flat if r.startswith("VALUE ")]
    losers = [r for r in flat if r == "ERR released"]
    assert len(winners) == 1
    assert len(losers) == 5


def test_tcp_release_distribution_matches_vote_count():
    # the released level depends only on the number of true votes
    levels = []
    seeds = RandomSource(515151)
    for i in range(300):
        server = AggregationServer(
            make_config(endpoint="127.0.0.1:0", seed=seeds.spawn(i).seed)
        )
        server.start()
        replies = _client(server.port, ["VOTE 1"] * 30 + ["RELEASE"])
        levels.append(int(replies[-1].split()[1]))
        assert server.wait(timeout=10) == 0
    row = ed.morris_row(30)
    assert level_gof(levels, row.prob, max_level=9, confidence=0.999).passed


def test_tcp_server_config_round_trip(tmp_path):
    path = tmp_path / "svc.json"
    path.write_text(
        json.dumps(
            {
                "endpoint": "127.0.0.1:0",
                "mechanism": "morris",
                "pre_count": 0,
                "seed": 5,
                "release_policy": "on-command",
            }
        )
    )
    cfg = ServiceConfig.from_json_file(path)
    assert cfg.endpoint == "127.0.0.1:0"
    assert cfg.mechanism == "morris"
