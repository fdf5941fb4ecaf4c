"""Point-to-point transport between parties.

Two interchangeable mesh kinds:

* ``InProcMesh``: queue-backed, for running all parties as threads in one
  process (tests, benchmarks).
* ``TcpMesh``: one socket per ordered pair over TCP; the lower-indexed
  party dials the higher one. A handshake pins protocol version, party
  indices, party count and the scenario config hash before any payload.

Every message is framed as an 8-byte little-endian payload length, an
8-byte little-endian step id, then the payload. Step ids increase in
lockstep on every exchange; a mismatch means the parties diverged and
raises ``DesyncError`` immediately rather than corrupting downstream
values. Payloads above CHUNK_SIZE are sent and received in chunks so
buffers stay bounded.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time

HEADER = struct.Struct("<QQ")  # payload length, step id
CHUNK_SIZE = 1 << 20
HANDSHAKE = struct.Struct("<8sHHH32s")
HANDSHAKE_MAGIC = b"MPFXNET1"
PROTOCOL_VERSION = 1
FRAME_OVERHEAD = HEADER.size


class TransportError(RuntimeError):
    pass


class DesyncError(TransportError):
    """Parties disagree on the current protocol step."""


class HandshakeError(TransportError):
    pass


class InProcHub:
    """Shared queue fabric for n in-process parties."""

    def __init__(self, n_parties: int):
        self.n_parties = n_parties
        self.queues = {
            (src, dst): queue.Queue()
            for src in range(n_parties)
            for dst in range(n_parties)
            if src != dst
        }

    def mesh(self, party: int) -> "InProcMesh":
        return InProcMesh(self, party)


class InProcMesh:
    def __init__(self, hub: InProcHub, party: int):
        self.hub = hub
        self.party = party
        self.n_parties = hub.n_parties

    def post(self, peer: int, step: int, payload: bytes) -> None:
        self.hub.queues[(self.party, peer)].put((step, payload))

    def recv_from(self, peer: int, step: int, timeout: float = 600.0) -> bytes:
        try:
            got_step, payload = self.hub.queues[(peer, self.party)].get(timeout=timeout)
        except queue.Empty:
            raise TransportError(f"party {self.party}: timeout waiting for party {peer}")
        if got_step != step:
            raise DesyncError(
                f"party {self.party}: expected step {step} from party {peer}, got {got_step}"
            )
        return payload

    def close(self) -> None:
        pass


def _send_frame(sock: socket.socket, step: int, payload: bytes) -> None:
    sock.sendall(HEADER.pack(len(payload), step))
    view = memoryview(payload)
    for off in range(0, len(view), CHUNK_SIZE):
        sock.sendall(view[off:off + CHUNK_SIZE])


def _recv_exact(sock: socket.socket, nbytes: int) -> bytes:
    buf = bytearray(nbytes)
    view = memoryview(buf)
    got = 0
    while got < nbytes:
        want = min(CHUNK_SIZE, nbytes - got)
        r = sock.recv_into(view[got:got + want], want)
        if r == 0:
            raise TransportError("peer closed connection")
        got += r
    return bytes(buf)


class _SocketPeer:
    """One TCP connection plus its dedicated sender thread."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.send_q: queue.Queue = queue.Queue()
        self.error: Exception | None = None
        self.thread = threading.Thread(target=self._sender_loop, daemon=True)
        self.thread.start()

    def _sender_loop(self) -> None:
        while True:
            item = self.send_q.get()
            if item is None:
                return
            step, payload = item
            try:
                _send_frame(self.sock, step, payload)
            except OSError as exc:  # surfaced on next post/recv
                self.error = TransportError(f"send failed: {exc}")
                return

    def post(self, step: int, payload: bytes) -> None:
        if self.error is not None:
            raise self.error
        self.send_q.put((step, payload))

    def close(self) -> None:
        self.send_q.put(None)
        self.thread.join(timeout=5.0)
        try:
            self.sock.close()
        except OSError:
            pass


class TcpMesh:
    """Full mesh of TCP connections for one party."""

    def __init__(self, party: int, n_parties: int, peers: dict[int, _SocketPeer]):
        self.party = party
        self.n_parties = n_parties
        self.peers = peers

    def post(self, peer: int, step: int, payload: bytes) -> None:
        self.peers[peer].post(step, payload)

    def recv_from(self, peer: int, step: int, timeout: float = 600.0) -> bytes:
        sock = self.peers[peer].sock
        sock.settimeout(timeout)
        header = _recv_exact(sock, HEADER.size)
        length, got_step = HEADER.unpack(header)
        if got_step != step:
            raise DesyncError(
                f"party {self.party}: expected step {step} from party {peer}, got {got_step}"
            )
        return _recv_exact(sock, length)

    def close(self) -> None:
        for peer in self.peers.values():
            peer.close()


def _handshake(sock: socket.socket, party: int, n_parties: int, config_hash: bytes) -> None:
    msg = HANDSHAKE.pack(HANDSHAKE_MAGIC, PROTOCOL_VERSION, party, n_parties, config_hash)
    sock.sendall(msg)
    reply = _recv_exact(sock, HANDSHAKE.size)
    magic, version, peer_party, peer_n, peer_hash = HANDSHAKE.unpack(reply)
    if magic != HANDSHAKE_MAGIC:
        raise HandshakeError("bad magic from peer")
    if version != PROTOCOL_VERSION:
        raise HandshakeError(f"protocol version mismatch: {version} != {PROTOCOL_VERSION}")
    if peer_n != n_parties:
        raise HandshakeError(f"party count mismatch: peer says {peer_n}, we say {n_parties}")
    if peer_hash != config_hash:
        raise HandshakeError("scenario config hash mismatch between parties")


def connect_tcp_mesh(party: int, addresses: list[tuple[str, int]], config_hash: bytes,
                     timeout: float = 60.0) -> TcpMesh:
    """Establish the full mesh. Lower party index dials the higher one.

    ``addresses[i]`` is the (host, port) party i listens on. The config
    hash must match across all parties or the handshake aborts.
    """
    n_parties = len(addresses)
    host, port = addresses[party]
    listener = socket.create_server((host, port), backlog=n_parties)
    listener.settimeout(timeout)

    peers: dict[int, _SocketPeer] = {}
    try:
        # Accept connections from every lower-indexed party.
        expected_lower = set(range(party))
        while expected_lower:
            sock, _ = listener.accept()
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            sock.settimeout(timeout)
            raw = _recv_exact(sock, HANDSHAKE.size)
            magic, version, peer_party, peer_n, peer_hash = HANDSHAKE.unpack(raw)
            if magic != HANDSHAKE_MAGIC or version != PROTOCOL_VERSION:
                raise HandshakeError("bad handshake from dialer")
            if peer_n != n_parties or peer_hash != config_hash:
                raise HandshakeError("dialer disagrees on party count or config hash")
            if peer_party not in expected_lower:
                raise HandshakeError(f"unexpected dialer party {peer_party}")
            sock.sendall(HANDSHAKE.pack(HANDSHAKE_MAGIC, PROTOCOL_VERSION, party,
                                        n_parties, config_hash))
            expected_lower.remove(peer_party)
            peers[peer_party] = _SocketPeer(sock)

        # Dial every higher-indexed party, retrying while it boots.
        for other in range(party + 1, n_parties):
            deadline = time.monotonic() + timeout
            while True:
                try:
                    sock = socket.create_connection(addresses[other], timeout=timeout)
                    break
                except OSError:
                    if time.monotonic() > deadline:
                        raise TransportError(f"cannot reach party {other}")
                    time.sleep(0.05)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            sock.settimeout(timeout)
            _handshake(sock, party, n_parties, config_hash)
            peers[other] = _SocketPeer(sock)
    finally:
        listener.close()

    return TcpMesh(party, n_parties, peers)


class NullMesh:
    """Dry-run fabric: every receive returns zeros of the posted size.

    Protocol control flow never branches on secret values, so a party can
    execute an entire scenario against this mesh to count rounds and
    preprocessing demand without any peers.
    """

    def __init__(self, party: int, n_parties: int):
        self.party = party
        self.n_parties = n_parties
        self._pending: dict[int, int] = {}

    def post(self, peer: int, step: int, payload: bytes) -> None:
        self._pending[peer] = len(payload)

    def recv_from(self, peer: int, step: int, timeout: float = 0.0) -> bytes:
        return b"\x00" * self._pending.get(peer, 0)

    def close(self) -> None:
        pass


def exchange_all(mesh, step: int, payloads: dict[int, bytes],
                 timeout: float = 600.0) -> dict[int, bytes]:
    """Send to all peers, then collect from all peers. Completes as a barrier."""
    for peer, payload in payloads.items():
        mesh.post(peer, step, payload)
    return {peer: mesh.recv_from(peer, step, timeout=timeout) for peer in payloads}
