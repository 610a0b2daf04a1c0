"""Minimal topic-based publish/subscribe bus for signaling between services.

Topics are '/'-separated levels. Subscription patterns may use '+' to match
exactly one level and '#' (final level only) to match one or more remaining
levels, so "a/#" matches "a/b" but not "a" itself.

Delivery is at-most-once with no retention: a published message goes to the
subscribers connected at that moment and is otherwise dropped. Each
subscriber observes per-publisher FIFO order.

Two transports with identical semantics:

* Broker/BusClient -- newline-delimited JSON frames over TCP
  ({"op":"sub"|"unsub"|"pub"|...}, one frame per line, UTF-8).
* LoopbackBroker -- in-process, for tests and single-process embedding.

Topic registry used by the twin stack:

    crane/state             CraneState sample dict
    crane/run/started       run metadata + trajectory + initial state
    crane/run/completed     run metadata
    dt/trajectory/request   planning request
    dt/trajectory/result    planned Trajectory
    dt/simulation/request   ad-hoc simulation request
    dt/simulation/result    reference to stored simulated/envelope traces
    dt/validation/report    ValidationReport dict
    dt/validation/alert     failed-run notification
"""

from __future__ import annotations

import json
import queue
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import BusConnectionError, ProtocolError

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 7878


@dataclass(frozen=True)
class BusMessage:
    topic: str
    payload: dict
    published_at: float
    seq: int


def split_topic(topic: str) -> list[str]:
    """Validate a concrete (publishable) topic and return its levels."""
    if not isinstance(topic, str) or not topic:
        raise ProtocolError("topic must be a non-empty string")
    levels = topic.split("/")
    for level in levels:
        if not level:
            raise ProtocolError(f"topic {topic!r} has an empty level")
        if "+" in level or "#" in level:
            raise ProtocolError(f"wildcards are not allowed in topic {topic!r}")
    return levels


def split_pattern(pattern: str) -> list[str]:
    """Validate a subscription pattern and return its levels."""
    if not isinstance(pattern, str) or not pattern:
        raise ProtocolError("pattern must be a non-empty string")
    levels = pattern.split("/")
    for i, level in enumerate(levels):
        if not level:
            raise ProtocolError(f"pattern {pattern!r} has an empty level")
        if level == "#" and i != len(levels) - 1:
            raise ProtocolError("'#' may only appear as the final level")
        if level not in ("+", "#") and ("+" in level or "#" in level):
            raise ProtocolError(
                f"wildcard must occupy a whole level in pattern {pattern!r}"
            )
    return levels


def match(pattern: str, topic: str) -> bool:
    """Pure wildcard predicate: does `pattern` match the concrete `topic`?"""
    p_levels = split_pattern(pattern)
    t_levels = split_topic(topic)
    for i, p in enumerate(p_levels):
        if p == "#":
            return len(t_levels) - i >= 1
        if i >= len(t_levels):
            return False
        if p != "+" and p != t_levels[i]:
            return False
    return len(t_levels) == len(p_levels)


class Subscription:
    """Handle delivering matching messages; iterate or .get() them, or attach
    a callback at subscribe time."""

    def __init__(self, client: "_ClientCore", pattern: str,
                 callback: Optional[Callable[[BusMessage], None]]):
        self.pattern = pattern
        self._client = client
        self._callback = callback
        self._queue: queue.Queue[BusMessage] = queue.Queue()
        self.active = True

    def get(self, timeout: Optional[float] = None) -> BusMessage:
        return self._queue.get(timeout=timeout)

    def drain(self) -> list[BusMessage]:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out

    def cancel(self) -> None:
        self._client.unsubscribe(self)

    def _deliver(self, msg: BusMessage) -> None:
        if self._callback is not None:
            self._callback(msg)
        else:
            self._queue.put(msg)


class _ClientCore:
    """Local subscription table shared by the TCP and loopback clients."""

    def __init__(self) -> None:
        self._subs: list[Subscription] = []
        self._subs_lock = threading.Lock()

    def subscribe(self, pattern: str,
                  callback: Optional[Callable[[BusMessage], None]] = None
                  ) -> Subscription:
        split_pattern(pattern)
        sub = Subscription(self, pattern, callback)
        with self._subs_lock:
            self._subs.append(sub)
        self._transport_subscribe(pattern)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._subs_lock:
            if sub in self._subs:
                self._subs.remove(sub)
                sub.active = False
        self._transport_unsubscribe(sub.pattern)

    def _dispatch(self, msg: BusMessage) -> None:
        with self._subs_lock:
            targets = [s for s in self._subs if match(s.pattern, msg.topic)]
        for sub in targets:
            sub._deliver(msg)

    def _transport_subscribe(self, pattern: str) -> None:
        raise NotImplementedError

    def _transport_unsubscribe(self, pattern: str) -> None:
        raise NotImplementedError


# --------------------------------------------------------------------------
# TCP transport
# --------------------------------------------------------------------------

class _BrokerConnection:
    def __init__(self, broker: "Broker", sock: socket.socket):
        self.broker = broker
        self.sock = sock
        self.patterns: set[str] = set()
        self.lock = threading.Lock()
        self.outbox: queue.Queue = queue.Queue()
        self.seq = 0
        self.alive = True
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._writer = threading.Thread(target=self._write_loop, daemon=True)
        self._reader.start()
        self._writer.start()

    def matches(self, topic: str) -> bool:
        with self.lock:
            return any(match(p, topic) for p in self.patterns)

    def enqueue(self, topic: str, payload: dict, published_at: float) -> None:
        self.outbox.put((topic, payload, published_at))

    def close(self) -> None:
        self.alive = False
        self.outbox.put(None)
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    def _read_loop(self) -> None:
        try:
            with self.sock.makefile("r", encoding="utf-8") as stream:
                for line in stream:
                    line = line.strip()
                    if not line:
                        continue
                    self._handle(json.loads(line))
        except (OSError, ValueError, ProtocolError):
            pass
        finally:
            self.broker._drop(self)

    def _handle(self, frame: dict) -> None:
        op = frame.get("op")
        if op == "sub":
            split_pattern(frame["pattern"])
            with self.lock:
                self.patterns.add(frame["pattern"])
        elif op == "unsub":
            with self.lock:
                self.patterns.discard(frame["pattern"])
        elif op == "pub":
            split_topic(frame["topic"])
            self.broker._route(frame["topic"], frame.get("payload"))
        else:
            raise ProtocolError(f"unknown op {op!r}")

    def _write_loop(self) -> None:
        while True:
            item = self.outbox.get()
            if item is None:
                return
            topic, payload, published_at = item
            self.seq += 1
            frame = {"op": "msg", "topic": topic, "payload": payload,
                     "seq": self.seq, "published_at": published_at}
            try:
                self.sock.sendall((json.dumps(frame) + "\n").encode("utf-8"))
            except OSError:
                self.broker._drop(self)
                return


class Broker:
    """Threaded TCP broker. Never persists messages; restart loses only
    in-flight frames."""

    def __init__(self, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT):
        self.host = host
        self.requested_port = port
        self.port: Optional[int] = None
        self._listener: Optional[socket.socket] = None
        self._connections: list[_BrokerConnection] = []
        self._conn_lock = threading.Lock()
        self._running = False

    def start(self) -> "Broker":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        # Brief retry: fds of a just-stopped broker may take a moment to be
        # released by their reader threads. A genuinely occupied port still
        # fails within a second.
        deadline = time.monotonic() + 1.0
        while True:
            try:
                listener.bind((self.host, self.requested_port))
                break
            except OSError as exc:
                if time.monotonic() >= deadline:
                    listener.close()
                    raise OSError(
                        f"broker port {self.requested_port} unavailable: {exc}"
                    ) from exc
                time.sleep(0.05)
        listener.listen()
        listener.settimeout(0.25)  # lets the accept loop notice shutdown
        self.port = listener.getsockname()[1]
        self._listener = listener
        self._running = True
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        self._acceptor.start()
        return self

    def stop(self) -> None:
        self._running = False
        if self._listener is not None:
            try:
                self._listener.shutdown(socket.SHUT_RDWR)  # wakes accept()
            except OSError:
                pass
            self._listener.close()
            self._acceptor.join(timeout=1.0)
        with self._conn_lock:
            conns = list(self._connections)
            self._connections.clear()
        for conn in conns:
            conn.close()
        # Wait for reader/writer threads so every fd bound to our port is
        # really released before stop() returns (allows immediate rebinding).
        for conn in conns:
            conn._reader.join(timeout=1.0)
            conn._writer.join(timeout=1.0)

    def _accept_loop(self) -> None:
        while self._running:
            try:
                sock, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.settimeout(None)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._conn_lock:
                self._connections.append(_BrokerConnection(self, sock))

    def _route(self, topic: str, payload) -> None:
        published_at = time.time()
        with self._conn_lock:
            conns = list(self._connections)
        for conn in conns:
            if conn.matches(topic):
                conn.enqueue(topic, payload, published_at)

    def _drop(self, conn: _BrokerConnection) -> None:
        with self._conn_lock:
            if conn in self._connections:
                self._connections.remove(conn)
        conn.close()


class BusClient(_ClientCore):
    """TCP bus client; thread-safe publish, callback or queue subscriptions."""

    def __init__(self, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT):
        super().__init__()
        self.host = host
        self.port = port
        self._sock: Optional[socket.socket] = None
        self._send_lock = threading.Lock()
        self._closed = False

    def connect(self) -> "BusClient":
        sock = socket.create_connection((self.host, self.port), timeout=10.0)
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        threading.Thread(target=self._read_loop, daemon=True).start()
        return self

    def close(self) -> None:
        self._closed = True
        if self._sock is not None:
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()

    def publish(self, topic: str, payload: Optional[dict] = None) -> None:
        split_topic(topic)
        self._send({"op": "pub", "topic": topic, "payload": payload})

    def _transport_subscribe(self, pattern: str) -> None:
        self._send({"op": "sub", "pattern": pattern})

    def _transport_unsubscribe(self, pattern: str) -> None:
        with self._subs_lock:
            still_used = any(s.pattern == pattern for s in self._subs)
        if not still_used:
            self._send({"op": "unsub", "pattern": pattern})

    def _send(self, frame: dict) -> None:
        if self._sock is None or self._closed:
            raise BusConnectionError("bus client is not connected")
        data = (json.dumps(frame) + "\n").encode("utf-8")
        with self._send_lock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                raise BusConnectionError(f"bus send failed: {exc}") from exc

    def _read_loop(self) -> None:
        try:
            with self._sock.makefile("r", encoding="utf-8") as stream:
                for line in stream:
                    line = line.strip()
                    if not line:
                        continue
                    frame = json.loads(line)
                    if frame.get("op") != "msg":
                        continue
                    self._dispatch(BusMessage(
                        topic=frame["topic"],
                        payload=frame.get("payload"),
                        published_at=frame.get("published_at", 0.0),
                        seq=frame.get("seq", 0),
                    ))
        except (OSError, ValueError):
            pass


# --------------------------------------------------------------------------
# In-process loopback transport
# --------------------------------------------------------------------------

class LoopbackClient(_ClientCore):
    """Client endpoint of a LoopbackBroker; same semantics as BusClient,
    including an inbox thread so callbacks never run in the publisher."""

    def __init__(self, broker: "LoopbackBroker"):
        super().__init__()
        self._broker = broker
        self._inbox: queue.Queue = queue.Queue()
        self._patterns: set[str] = set()
        self._patterns_lock = threading.Lock()
        self._seq = 0
        self._closed = False
        threading.Thread(target=self._pump, daemon=True).start()

    def publish(self, topic: str, payload: Optional[dict] = None) -> None:
        if self._closed:
            raise BusConnectionError("loopback client is closed")
        split_topic(topic)
        self._broker._route(topic, payload)

    def close(self) -> None:
        self._closed = True
        self._inbox.put(None)
        self._broker._detach(self)

    def _matches(self, topic: str) -> bool:
        with self._patterns_lock:
            return any(match(p, topic) for p in self._patterns)

    def _transport_subscribe(self, pattern: str) -> None:
        with self._patterns_lock:
            self._patterns.add(pattern)

    def _transport_unsubscribe(self, pattern: str) -> None:
        with self._subs_lock:
            still_used = any(s.pattern == pattern for s in self._subs)
        if not still_used:
            with self._patterns_lock:
                self._patterns.discard(pattern)

    def _enqueue(self, topic: str, payload, published_at: float) -> None:
        self._inbox.put((topic, payload, published_at))

    def _pump(self) -> None:
        while True:
            item = self._inbox.get()
            if item is None:
                return
            topic, payload, published_at = item
            self._seq += 1
            self._dispatch(BusMessage(topic, payload, published_at, self._seq))


class LoopbackBroker:
    """In-process broker with the TCP broker's delivery semantics."""

    def __init__(self) -> None:
        self._clients: list[LoopbackClient] = []
        self._lock = threading.Lock()

    def connect(self) -> LoopbackClient:
        client = LoopbackClient(self)
        with self._lock:
            self._clients.append(client)
        return client

    def stop(self) -> None:
        with self._lock:
            clients = list(self._clients)
        for c in clients:
            c.close()

    def _route(self, topic: str, payload) -> None:
        published_at = time.time()
        with self._lock:
            clients = list(self._clients)
        for client in clients:
            if client._matches(topic):
                client._enqueue(topic, payload, published_at)

    def _detach(self, client: LoopbackClient) -> None:
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)
