"""Dealer material: correctness, determinism, file roundtrip, exhaustion."""

import os
import tempfile

import numpy as np
import pytest

from mpfix import ring
from mpfix.preprocessing import (DemandCounter, FileStore, MaterialKey,
                                 PreprocessingExhausted, dealer_generate,
                                 edabit_key, generate_material, memory_stores,
                                 mtriple_key, read_manifest, triple_key,
                                 write_manifest)
from mpfix.sharing import reconstruct_arith, reconstruct_bits


def _reconstruct_field(stores, take, *args):
    outs = [take(s, *args) for s in stores]
    return outs


def test_triples_multiply(tmp_path=None):
    stores = memory_stores(seed=3, n_parties=3, demands={triple_key(64): 100})
    taken = [s.take_triples(64, 100) for s in stores]
    a = reconstruct_arith([t[0] for t in taken])
    b = reconstruct_arith([t[1] for t in taken])
    c = reconstruct_arith([t[2] for t in taken])
    assert np.array_equal(c, ring.mul(a, b, 64))


def test_matrix_triple_shape_and_product():
    key = mtriple_key(64, 4, 6, 3)
    stores = memory_stores(seed=4, n_parties=2, demands={key: 2})
    taken = [s.take_matrix_triple(64, 4, 6, 3) for s in stores]
    a = reconstruct_arith([t[0] for t in taken])
    b = reconstruct_arith([t[1] for t in taken])
    c = reconstruct_arith([t[2] for t in taken])
    assert a.shape == (4, 6) and b.shape == (6, 3) and c.shape == (4, 3)
    assert np.array_equal(c, ring.matmul(a, b, 64))


def test_bin_triples_and():
    from mpfix.preprocessing import bintriple_key
    stores = memory_stores(seed=5, n_parties=4, demands={bintriple_key(): 4096})
    taken = [s.take_bin_triples(4096) for s in stores]
    a = reconstruct_bits([t[0] for t in taken])
    b = reconstruct_bits([t[1] for t in taken])
    c = reconstruct_bits([t[2] for t in taken])
    assert np.array_equal(c, a & b)


def test_dabits_consistent():
    from mpfix.preprocessing import dabit_key
    stores = memory_stores(seed=6, n_parties=3, demands={dabit_key(64): 512})
    taken = [s.take_dabits(64, 512) for s in stores]
    r_arith = reconstruct_arith([t[0] for t in taken])
    r_bits = reconstruct_bits([t[1] for t in taken])
    assert np.array_equal(r_arith, r_bits.astype(np.uint64))


@pytest.mark.parametrize("m", [6, 49, 63])
def test_edabits_consistent(m):
    stores = memory_stores(seed=7, n_parties=2, demands={edabit_key(64, m): 64})
    taken = [s.take_edabits(64, m, 64) for s in stores]
    r = reconstruct_arith([t[0] for t in taken])
    bits = reconstruct_bits([t[1] for t in taken])
    assert bits.shape == (64, m)
    assert np.array_equal(r, ring.bits_to_uint(bits, m))
    assert r.max() < (1 << m)


def test_material_is_single_use():
    stores = memory_stores(seed=8, n_parties=2, demands={triple_key(64): 10})
    a0 = stores[0].take_triples(64, 6)
    a1 = stores[0].take_triples(64, 4)
    assert not np.array_equal(a0[0].values[:4], a1[0].values)
    with pytest.raises(PreprocessingExhausted):
        stores[0].take_triples(64, 1)


def test_dealer_files_roundtrip_and_determinism():
    demands = {triple_key(64): 50, edabit_key(64, 20): 8}
    with tempfile.TemporaryDirectory() as d1, tempfile.TemporaryDirectory() as d2:
        dealer_generate(9, 2, demands, d1)
        dealer_generate(9, 2, demands, d2)
        for p in range(2):
            for name in sorted(os.listdir(os.path.join(d1, f"party{p}"))):
                b1 = open(os.path.join(d1, f"party{p}", name), "rb").read()
                b2 = open(os.path.join(d2, f"party{p}", name), "rb").read()
                assert b1 == b2, name

        write_manifest(os.path.join(d1, "manifest.json"), demands)
        back = read_manifest(os.path.join(d1, "manifest.json"))
        assert back == demands

        stores = [FileStore(d1, p) for p in range(2)]
        taken = [s.take_triples(64, 50) for s in stores]
        a = reconstruct_arith([t[0] for t in taken])
        b = reconstruct_arith([t[1] for t in taken])
        c = reconstruct_arith([t[2] for t in taken])
        assert np.array_equal(c, ring.mul(a, b, 64))


def test_demand_counter_matches_actual_use():
    counter = DemandCounter(party=0)
    counter.take_triples(64, 30)
    counter.take_triples(64, 12)
    counter.take_edabits(64, 13, 5)
    d = dict(counter.demands)
    assert d[triple_key(64)] == 42
    assert d[edabit_key(64, 13)] == 5


def test_material_key_name_roundtrip():
    for key in [triple_key(32), mtriple_key(64, 3, 4, 5), edabit_key(64, 63)]:
        assert MaterialKey.from_name(key.name()) == key


def test_usage_reporting():
    stores = memory_stores(seed=10, n_parties=2, demands={triple_key(64): 20})
    stores[0].take_triples(64, 15)
    u = stores[0].usage()
    assert u["triple_w64"]["consumed"] == 15
    assert u["triple_w64"]["available"] == 20
