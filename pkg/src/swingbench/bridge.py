"""Lockstep plant/stabilizer exchange over a local TCP stream.

Wire grammar, one ASCII line per message::

    INIT <h_c>            plant -> stabilizer
    OK                    stabilizer -> plant
    STEP <k> <t> <omega>  plant -> stabilizer, once per control tick
    U <k> <upss>          stabilizer -> plant, k echoed
    DONE                  plant -> stabilizer
    BYE                   stabilizer -> plant

Numbers use 17 significant digits so doubles survive the round trip
bit-exactly, which makes a bridged run identical to an in-process one.
"""

from __future__ import annotations

import logging
import socket
from dataclasses import dataclass
from typing import Union

from .errors import ProtocolError
from .fmt import fmt_float
from .sim import PlantConfig, Simulation, TimeSeries, run_closed_loop

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class Init:
    h_c: float


@dataclass(frozen=True)
class Ok:
    pass


@dataclass(frozen=True)
class Step:
    k: int
    t: float
    omega: float


@dataclass(frozen=True)
class U:
    k: int
    upss: float


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class Bye:
    pass


BridgeMessage = Union[Init, Ok, Step, U, Done, Bye]

# verb -> (class, field parsers)
_GRAMMAR = {
    "INIT": (Init, (float,)),
    "OK": (Ok, ()),
    "STEP": (Step, (int, float, float)),
    "U": (U, (int, float)),
    "DONE": (Done, ()),
    "BYE": (Bye, ()),
}
_VERBS = {cls: verb for verb, (cls, _) in _GRAMMAR.items()}


class DecodeError(ProtocolError):
    def __init__(self, message, token=None):
        super().__init__(message if token is None else f"token {token}: {message}")
        self.token = token


def encode(msg: BridgeMessage) -> str:
    verb = _VERBS[type(msg)]
    if isinstance(msg, Init):
        return f"{verb} {fmt_float(msg.h_c)}"
    if isinstance(msg, Step):
        return f"{verb} {msg.k} {fmt_float(msg.t)} {fmt_float(msg.omega)}"
    if isinstance(msg, U):
        return f"{verb} {msg.k} {fmt_float(msg.upss)}"
    return verb


def decode(line: str) -> BridgeMessage:
    tokens = line.rstrip("\n").split(" ")
    verb = tokens[0]
    if verb not in _GRAMMAR:
        raise DecodeError(f"unknown verb {verb!r}", 1)
    cls, parsers = _GRAMMAR[verb]
    if len(tokens) - 1 != len(parsers):
        raise DecodeError(f"{verb} takes {len(parsers)} arguments, got {len(tokens) - 1}")
    values = []
    for i, (tok, parse) in enumerate(zip(tokens[1:], parsers), start=2):
        try:
            values.append(parse(tok))
        except ValueError:
            raise DecodeError(f"cannot parse {tok!r}", i) from None
    return cls(*values)


class LineChannel:
    """Blocking line-oriented wrapper around a connected socket, with optional replay log."""

    def __init__(self, sock: socket.socket, timeout: float = DEFAULT_TIMEOUT, replay=None):
        sock.settimeout(timeout)
        self.sock = sock
        self.reader = sock.makefile("r", encoding="ascii", newline="\n")
        self.replay = replay

    def send(self, msg: BridgeMessage) -> None:
        line = encode(msg)
        if self.replay is not None:
            self.replay.write(f">{line}\n")
        self.sock.sendall((line + "\n").encode("ascii"))

    def recv(self) -> BridgeMessage:
        try:
            line = self.reader.readline()
        except socket.timeout:
            raise ProtocolError("timed out waiting for peer") from None
        except OSError as exc:
            raise ProtocolError(f"connection error: {exc}") from None
        if not line:
            raise ProtocolError("connection closed by peer")
        if self.replay is not None:
            self.replay.write(f"<{line.rstrip(chr(10))}\n")
        return decode(line)

    def close(self) -> None:
        try:
            self.reader.close()
        finally:
            self.sock.close()


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


class StabilizerServer:
    """Hosts one stabilizer for one lockstep session.

    The listening socket is bound in the constructor, so ``address`` is
    known (and connectable) before ``serve_one`` runs in another thread.
    """

    def __init__(self, stabilizer, host: str = "127.0.0.1", port: int = 0,
                 timeout: float = DEFAULT_TIMEOUT, replay_path=None):
        self.stabilizer = stabilizer
        self.timeout = timeout
        self.replay_path = replay_path
        try:
            self.listener = socket.create_server((host, port))
        except (OSError, OverflowError) as exc:
            raise ProtocolError(f"cannot bind {host}:{port}: {exc}") from None
        self.listener.settimeout(timeout)

    @property
    def address(self) -> tuple[str, int]:
        return self.listener.getsockname()[:2]

    @property
    def endpoint(self) -> str:
        host, port = self.address
        return f"{host}:{port}"

    def serve_one(self) -> int:
        """Run one session to completion; returns the number of steps served."""
        replay = open(self.replay_path, "w", encoding="ascii", newline="\n") \
            if self.replay_path else None
        try:
            try:
                conn, _ = self.listener.accept()
            except socket.timeout:
                raise ProtocolError("timed out waiting for a plant to connect") from None
            chan = LineChannel(conn, self.timeout, replay)
            try:
                return self._session(chan)
            finally:
                chan.close()
        finally:
            self.listener.close()
            if replay is not None:
                replay.close()

    def _session(self, chan: LineChannel) -> int:
        first = chan.recv()
        if not isinstance(first, Init):
            raise ProtocolError(f"expected INIT, got {encode(first)!r}")
        self.stabilizer.reset()
        chan.send(Ok())
        expected = 0
        while True:
            msg = chan.recv()
            if isinstance(msg, Done):
                chan.send(Bye())
                return expected
            if not isinstance(msg, Step):
                raise ProtocolError(f"expected STEP or DONE, got {encode(msg)!r}")
            if msg.k != expected:
                log.error("out-of-order step: expected %d, got %d", expected, msg.k)
                raise ProtocolError(f"out-of-order step: expected {expected}, got {msg.k}")
            u = self.stabilizer.step(msg.omega - 1.0)
            chan.send(U(msg.k, u))
            expected += 1


def serve_stabilizer(stabilizer, endpoint: str, timeout: float = DEFAULT_TIMEOUT,
                     replay_path=None) -> int:
    host, port = parse_endpoint(endpoint)
    return StabilizerServer(stabilizer, host, port, timeout, replay_path).serve_one()


def run_plant_with_bridge(plant: PlantConfig, scenario, endpoint: str,
                          timeout: float = DEFAULT_TIMEOUT) -> TimeSeries:
    """Simulate ``scenario`` with the stabilizer hosted at ``endpoint``.

    Each control tick blocks on exactly one STEP/U round trip.
    """
    host, port = parse_endpoint(endpoint)
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise ProtocolError(f"cannot connect to {endpoint}: {exc}") from None
    chan = LineChannel(sock, timeout)
    last = [-1]

    def policy(k, t, omega):
        chan.send(Step(k, t, omega))
        try:
            reply = chan.recv()
        except ProtocolError as exc:
            raise ProtocolError(f"{exc} (last completed step {last[0]})") from None
        if not isinstance(reply, U) or reply.k != k:
            raise ProtocolError(
                f"bad reply {encode(reply)!r} to step {k} (last completed step {last[0]})")
        last[0] = k
        return reply.upss

    try:
        chan.send(Init(plant.h_c))
        if not isinstance(chan.recv(), Ok):
            raise ProtocolError("stabilizer did not acknowledge INIT")
        sim = Simulation(plant, scenario.pe0, scenario.vt0, scenario.events, scenario.t_end)
        ts = run_closed_loop(sim, policy)
        chan.send(Done())
        if not isinstance(chan.recv(), Bye):
            raise ProtocolError("stabilizer did not answer DONE with BYE")
    finally:
        chan.close()
    ts.meta.update(scenario=scenario.name, stabilizer="bridged")
    return ts
