"""Line-protocol aggregation service.

One session per server run: boolean responses arrive as "VOTE 1"/"VOTE 0"
lines, are serialized into a single queue, and are applied in arrival
order to one counter.  Nothing about the counter level is observable
until "RELEASE", which answers with the raw level and the pre-count
corrected estimate, after which the session is immutable.

Protocol (UTF-8, newline-terminated, case-sensitive):

    VOTE 1    -> ACK          (incrementation request)
    VOTE 0    -> ACK          (ignored by the counter)
    STATUS    -> COUNT <responses seen>
    RELEASE   -> VALUE <level> ESTIMATE <estimate - pre_count>
    otherwise -> ERR malformed
    VOTE/RELEASE after release -> ERR released
"""

from __future__ import annotations

import json
import queue
import socket
import threading
from dataclasses import dataclass, field

from .counters import HyperLogLogCounter, MaxGeoCounter, MorrisCounter, PcsaCounter
from .errors import DomainError
from .fm_constant import default_phi
from .randomness import RandomSource

SERVICE_MECHANISMS = ("morris", "maxgeo", "pcsa", "hyperloglog")


@dataclass(frozen=True)
class ReleasePolicy:
    kind: str  # "on-command" | "after-responses"
    threshold: int = 0

    @classmethod
    def parse(cls, raw) -> "ReleasePolicy":
        if raw == "on-command":
            return cls("on-command")
        if isinstance(raw, dict) and "after_responses" in raw:
            threshold = int(raw["after_responses"])
            if threshold < 1:
                raise DomainError(f"release threshold must be positive, got {threshold}")
            return cls("after-responses", threshold)
        raise DomainError(f"unknown release policy {raw!r}")


@dataclass(frozen=True)
class ServiceConfig:
    endpoint: str = "stdin"
    mechanism: str = "morris"
    params: dict = field(default_factory=dict)
    pre_count: int = 0
    seed: int = 0
    release_policy: ReleasePolicy = ReleasePolicy("on-command")

    def __post_init__(self):
        if self.mechanism not in SERVICE_MECHANISMS:
            raise DomainError(
                f"unknown mechanism {self.mechanism!r}; expected one of {SERVICE_MECHANISMS}"
            )
        if self.pre_count < 0:
            raise DomainError(f"pre-count must be non-negative, got {self.pre_count}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ServiceConfig":
        return cls(
            endpoint=raw.get("endpoint", "stdin"),
            mechanism=raw.get("mechanism", "morris"),
            params=dict(raw.get("params", {})),
            pre_count=int(raw.get("pre_count", 0)),
            seed=int(raw.get("seed", 0)),
            release_policy=ReleasePolicy.parse(raw.get("release_policy", "on-command")),
        )

    @classmethod
    def from_json_file(cls, path) -> "ServiceConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def listen_address(self) -> tuple[str, int]:
        if self.endpoint == "stdin":
            raise DomainError("endpoint is stdin mode, not a socket address")
        host, _, port = self.endpoint.rpartition(":")
        if not host:
            raise DomainError(f"endpoint must be host:port or 'stdin', got {self.endpoint!r}")
        return host, int(port)


class Session:
    """Single-release protocol state over one counter."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self._rng = RandomSource(config.seed)
        mech = config.mechanism
        if mech == "morris":
            self.counter = MorrisCounter()
        elif mech == "maxgeo":
            self.counter = MaxGeoCounter()
        elif mech == "pcsa":
            self.counter = PcsaCounter(int(config.params.get("m", 64)))
        else:
            self.counter = HyperLogLogCounter(int(config.params.get("m", 64)))
        if config.pre_count:
            self.counter.skip(config.pre_count, self._rng)
        self.responses_seen = 0
        self.released = False

    def _level_text(self) -> str:
        if isinstance(self.counter, PcsaCounter):
            return ",".join(str(lvl) for lvl in self.counter.register_levels)
        return str(self.counter.level)

    def _estimate_text(self) -> str:
        if isinstance(self.counter, HyperLogLogCounter):
            return repr(self.counter.estimate() - self.config.pre_count)
        if isinstance(self.counter, (MaxGeoCounter, PcsaCounter)):
            return str(self.counter.estimate(default_phi()) - self.config.pre_count)
        return str(self.counter.estimate() - self.config.pre_count)

    def _release_line(self) -> str:
        self.released = True
        return f"VALUE {self._level_text()} ESTIMATE {self._estimate_text()}"

    def handle_line(self, line: str) -> str:
        """Apply one protocol line and return the reply (may span two lines
        when an after-N policy fires on the final vote)."""
        if line in ("VOTE 1", "VOTE 0"):
            if self.released:
                return "ERR released"
            self.counter.observe(line == "VOTE 1", self._rng)
            self.responses_seen += 1
            policy = self.config.release_policy
            if policy.kind == "after-responses" and self.responses_seen >= policy.threshold:
                return "ACK\n" + self._release_line()
            return "ACK"
        if line == "RELEASE":
            if self.released:
                return "ERR released"
            return self._release_line()
        if line == "STATUS":
            return f"COUNT {self.responses_seen}"
        return "ERR malformed"


_STOP = object()


class AggregationServer:
    """Threaded TCP front end around a single `Session`.

    Connections may write concurrently; every line funnels through one
    queue and a single worker applies it to the session, so votes are
    totally ordered and exactly one RELEASE wins any race.  After the
    release, the listener closes (no new connections) while open
    connections keep receiving replies ("ERR released" for late votes)
    until they disconnect.
    """

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.session = Session(config)
        self._queue: queue.Queue = queue.Queue()
        self._released = threading.Event()
        self._done = threading.Event()
        self._clients: list[threading.Thread] = []
        self._clients_lock = threading.Lock()
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        if self._listener is None:
            raise DomainError("server not started")
        return self._listener.getsockname()[1]

    def start(self) -> None:
        host, port = self.config.listen_address()
        try:
            self._listener = socket.create_server((host, port))
        except OSError as exc:
            raise DomainError(f"cannot bind {self.config.endpoint}: {exc}") from exc
        self._listener.settimeout(0.1)
        worker = threading.Thread(target=self._worker, name="probcount-worker", daemon=True)
        acceptor = threading.Thread(target=self._accept_loop, name="probcount-accept", daemon=True)
        self._threads = [worker, acceptor]
        worker.start()
        acceptor.start()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._released.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            thread = threading.Thread(target=self._serve_client, args=(conn,), daemon=True)
            with self._clients_lock:
                self._clients.append(thread)
            thread.start()
        self._listener.close()
        with self._clients_lock:
            clients = list(self._clients)
        for thread in clients:
            thread.join(timeout=10.0)
        self._queue.put(_STOP)

    def _serve_client(self, conn: socket.socket) -> None:
        with conn:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            for raw in reader:
                line = raw.rstrip("\r\n")
                box: queue.Queue = queue.Queue(maxsize=1)
                self._queue.put((line, box))
                reply = box.get()
                try:
                    conn.sendall((reply + "\n").encode("utf-8"))
                except OSError:
                    break

    def _worker(self) -> None:
        while True:
            item = self._queue.get()
            if item is _STOP:
                break
            line, box = item
            reply = self.session.handle_line(line)
            box.put(reply)
            if self.session.released:
                self._released.set()
        self._done.set()

    def wait(self, timeout: float | None = None) -> int:
        """Block until the session completes; 0 means a clean release."""
        finished = self._done.wait(timeout)
        if not finished:
            return 1
        return 0 if self.session.released else 1

    def stop(self) -> None:
        self._released.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass


def run_stdio(config: ServiceConfig, instream, outstream) -> int:
    """Serve the protocol over text streams; returns 0 after a clean release."""
    session = Session(config)
    for raw in instream:
        reply = session.handle_line(raw.rstrip("\r\n"))
        outstream.write(reply + "\n")
        outstream.flush()
        if session.released:
            return 0
    return 0 if session.released else 1


def serve(config: ServiceConfig) -> int:
    """Run the configured service to completion (socket or stdin mode)."""
    if config.endpoint == "stdin":
        import sys

        return run_stdio(config, sys.stdin, sys.stdout)
    server = AggregationServer(config)
    server.start()
    return server.wait()
