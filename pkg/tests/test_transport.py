"""Transport fabrics: in-process queues, TCP mesh, desync and handshake checks."""

import hashlib
import threading

import numpy as np
import pytest

from mpfix.transport import (DesyncError, HandshakeError, InProcHub, NullMesh,
                             connect_tcp_mesh, exchange_all)

_PORT = [30300]  # bump per test so kernels in TIME_WAIT never collide


def _ports(n):
    base = _PORT[0]
    _PORT[0] += n
    return [("127.0.0.1", base + i) for i in range(n)]


def _run_parties(n, fn):
    out, errs = {}, {}

    def worker(p):
        try:
            out[p] = fn(p)
        except BaseException as e:  # noqa: BLE001
            errs[p] = e

    threads = [threading.Thread(target=worker, args=(p,)) for p in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errs:
        raise errs[min(errs)]
    return out


def test_inproc_pairwise_exchange():
    hub = InProcHub(3)

    def fn(p):
        mesh = hub.mesh(p)
        payloads = {q: bytes([p * 16 + q]) * 4 for q in range(3) if q != p}
        got = exchange_all(mesh, step=7, payloads=payloads)
        mesh.close()
        return got

    out = _run_parties(3, fn)
    for p in range(3):
        for q in range(3):
            if p != q:
                assert out[p][q] == bytes([q * 16 + p]) * 4


def test_tcp_mesh_roundtrip_matches_inproc_digest():
    n = 3
    addrs = _ports(n)
    h = hashlib.sha256(b"cfg").digest()
    rng = np.random.default_rng(8)
    blobs = {p: rng.integers(0, 256, 4096, dtype=np.uint8).tobytes() for p in range(n)}

    def fn(p):
        mesh = connect_tcp_mesh(p, addrs, h, timeout=20.0)
        got = exchange_all(mesh, step=1, payloads={q: blobs[p] for q in range(n) if q != p})
        mesh.close()
        return {q: hashlib.sha256(buf).hexdigest() for q, buf in got.items()}

    out = _run_parties(n, fn)
    for p in range(n):
        for q in range(n):
            if p != q:
                assert out[p][q] == hashlib.sha256(blobs[q]).hexdigest()


def test_tcp_handshake_rejects_config_mismatch():
    addrs = _ports(2)
    errs = {}

    def worker(p):
        h = hashlib.sha256(b"A" if p == 0 else b"B").digest()
        try:
            mesh = connect_tcp_mesh(p, addrs, h, timeout=3.0)
            mesh.close()
        except BaseException as e:  # noqa: BLE001
            errs[p] = e

    threads = [threading.Thread(target=worker, args=(p,)) for p in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    # the accepting side spots the mismatch; the dialer just never gets a reply
    assert any(isinstance(e, HandshakeError) for e in errs.values()), errs


def test_tcp_detects_step_desync():
    addrs = _ports(2)
    h = hashlib.sha256(b"same").digest()

    def fn(p):
        mesh = connect_tcp_mesh(p, addrs, h, timeout=10.0)
        try:
            if p == 0:
                mesh.post(1, step=3, payload=b"x")
                mesh.recv_from(1, step=3)
            else:
                mesh.post(0, step=4, payload=b"y")  # wrong step on purpose
                mesh.recv_from(0, step=4)
        finally:
            mesh.close()

    with pytest.raises(DesyncError):
        _run_parties(2, fn)


def test_null_mesh_returns_zeros_of_posted_size():
    mesh = NullMesh(0, 2)
    mesh.post(1, step=0, payload=b"abcdef")
    assert mesh.recv_from(1, step=0) == b"\x00" * 6
