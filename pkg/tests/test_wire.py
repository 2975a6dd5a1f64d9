import numpy as np

from sapgnn.sharing import AuditLog
from sapgnn.wire import (Channel, CommStats, MessageKind, decode_message, encode_message)


def test_codec_round_trip_all_dtypes():
    fields = {"f": np.array([[1.5, -2.25], [0.0, 1e300]]),
              "u": np.array([0, 2 ** 64 - 1], dtype=np.uint64),
              "i": np.array([-5, 7], dtype=np.int64),
              "b": np.arange(6, dtype=np.uint8),
              "c": np.array([-1, 0, 3], dtype=np.int8)}
    buf = encode_message(MessageKind.LOCAL_EMBEDDING, layer=2, epoch=9, sender_id=1,
                         fields=fields)
    kind, layer, epoch, sid, out = decode_message(buf)
    assert kind is MessageKind.LOCAL_EMBEDDING
    assert (layer, epoch, sid) == (2, 9, 1)
    for name, arr in fields.items():
        assert np.array_equal(out[name], arr), name
        assert out[name].dtype.itemsize == arr.dtype.itemsize


def test_codec_length_prefix():
    buf = encode_message(MessageKind.PRED_GRAD, 0, 0, 0, {"g": np.zeros((2, 2))})
    (length,) = np.frombuffer(buf[:4], dtype="<u4")
    assert length == len(buf) - 4


def test_codec_bytes_field():
    buf = encode_message(MessageKind.NODE_INDEX, -1, -1, 0, {"keys": b"\x01\x02\x03"})
    _, _, _, _, out = decode_message(buf)
    assert np.array_equal(out["keys"], np.array([1, 2, 3], dtype=np.uint8))


def test_comm_stats_accounting():
    comm = CommStats()
    comm.add(MessageKind.LOCAL_EMBEDDING, "holder-0->server", 0, 0, 100)
    comm.add(MessageKind.LOCAL_EMBEDDING, "holder-0->server", 1, 0, 50)
    comm.add(MessageKind.GRAD_SHARE, "holder-0->holder-1", -1, 0, 30)
    comm.add(MessageKind.LOCAL_EMBEDDING, "holder-0->server", 0, 1, 10)
    assert comm.total() == 190
    assert comm.bytes_for(kinds=[MessageKind.LOCAL_EMBEDDING]) == 160
    assert comm.bytes_for(kinds=[MessageKind.LOCAL_EMBEDDING], epoch=0) == 150
    rows = comm.rows()
    assert rows[0] == (0, MessageKind.GRAD_SHARE.value, "holder-0->holder-1", 30)
    # counters only grow
    before = comm.total()
    comm.add(MessageKind.PRED_GRAD, "holder-1->server", 2, 0, 5)
    assert comm.total() == before + 5


def test_channel_meters_and_audits():
    comm, audit = CommStats(), AuditLog()
    chan = Channel(comm, audit)
    sent = np.arange(6, dtype=np.float64).reshape(2, 3)
    out = chan.send("holder-0", "server", MessageKind.LOCAL_EMBEDDING, 0, 0, {"t": sent})
    assert np.array_equal(out["t"], sent)
    assert out["t"] is not sent        # the receiver gets a decoded copy
    assert comm.total() > sent.nbytes  # header overhead included
    assert len(audit) == 1
    rec = audit.records[0]
    assert (rec.sender, rec.receiver, rec.kind) == ("holder-0", "server", "LocalEmbedding")
    assert rec.schema == "t"
