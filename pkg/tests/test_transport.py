"""Streams, clock sync, recording round trips, and the TCP bridge."""

import json
import pathlib
import tempfile
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pif.transport import (
    CorruptRecording,
    Hub,
    NetInlet,
    NetOutlet,
    Recorder,
    Sample,
    StreamInfo,
    TransportError,
    TransportServer,
    estimate_offset,
    registry,
    replay,
)


def signal_info(name, channels=1, rate=0.0, sid=None):
    return StreamInfo(
        name=name,
        kind="signal",
        channel_count=channels,
        nominal_rate=rate,
        source_id=sid or f"{name}-test",
    )


def marker_info(name, sid=None):
    return StreamInfo(name=name, kind="marker", source_id=sid or f"{name}-test")


class TestStreams:
    def test_fifo_order_512(self):
        hub = Hub()
        outlet = hub.open_outlet(signal_info("eda", rate=512.0))
        inlet = hub.open_inlet(name="eda")
        for i in range(512):
            outlet.push_values([float(i)], timestamp=i / 512.0)
        got = inlet.pull(max_n=1024)
        assert [s.values[0] for s in got] == [float(i) for i in range(512)]
        assert inlet.stats.received == 512
        assert inlet.stats.dropped == 0

    def test_arity_mismatch_rejected(self):
        hub = Hub()
        outlet = hub.open_outlet(signal_info("gaze", channels=2))
        with pytest.raises(TransportError, match="arity"):
            outlet.push_values([1.0, 2.0, 3.0], timestamp=0.0)

    def test_timestamp_regression_rejected(self):
        hub = Hub()
        outlet = hub.open_outlet(signal_info("eda"))
        outlet.push_values([1.0], timestamp=5.0)
        with pytest.raises(TransportError, match="regression"):
            outlet.push_values([2.0], timestamp=4.0)

    def test_marker_stream_is_single_channel_irregular(self):
        info = StreamInfo(name="events", kind="marker", channel_count=4, nominal_rate=100.0)
        assert info.channel_count == 1
        assert info.nominal_rate == 0.0
        hub = Hub()
        outlet = hub.open_outlet(info)
        with pytest.raises(TransportError, match="label"):
            outlet.push(Sample(0.0, values=(1.0,)))
        outlet.push_marker("KNOT:cell", timestamp=0.0)

    def test_duplicate_source_id_rejected(self):
        hub = Hub()
        hub.open_outlet(signal_info("eda", sid="dev-1"))
        with pytest.raises(TransportError, match="duplicate"):
            hub.open_outlet(signal_info("eda2", sid="dev-1"))

    def test_interleaved_streams_stay_isolated(self):
        hub = Hub()
        a = hub.open_outlet(signal_info("breath"))
        b = hub.open_outlet(signal_info("eda"))
        in_a = hub.open_inlet(name="breath")
        in_b = hub.open_inlet(name="eda")
        for i in range(50):
            a.push_values([float(i)], timestamp=float(i))
            b.push_values([float(-i)], timestamp=float(i))
        assert [s.values[0] for s in in_a.pull(max_n=100)] == [float(i) for i in range(50)]
        assert [s.values[0] for s in in_b.pull(max_n=100)] == [float(-i) for i in range(50)]

    def test_overflow_drops_oldest_and_counts(self):
        hub = Hub()
        outlet = hub.open_outlet(signal_info("eda"))
        inlet = hub.open_inlet(name="eda", capacity=8)
        for i in range(20):
            outlet.push_values([float(i)], timestamp=float(i))
        got = inlet.pull(max_n=100)
        assert [s.values[0] for s in got] == [float(i) for i in range(12, 20)]
        assert inlet.stats.dropped == 12
        assert inlet.stats.received == 20

    def test_tap_preserves_global_push_order(self):
        hub = Hub()
        a = hub.open_outlet(signal_info("breath", sid="a"))
        b = hub.open_outlet(signal_info("eda", sid="b"))
        tap = hub.open_tap(["a", "b"])
        order = []
        for i in range(10):
            a.push_values([1.0], timestamp=float(i))
            order.append("a")
            b.push_values([2.0], timestamp=float(i))
            order.append("b")
        assert [sid for sid, _ in tap.pull(max_n=100)] == order

    def test_resolve_by_name_and_kind(self):
        hub = Hub()
        hub.open_outlet(signal_info("eda"))
        hub.open_outlet(marker_info("events"))
        assert [i.name for i in hub.resolve(kind="marker")] == ["events"]
        assert [i.name for i in hub.resolve(name="eda")] == ["eda"]
        assert hub.resolve(name="nope") == []
        with pytest.raises(TransportError, match="no stream"):
            hub.open_inlet(name="nope")

    def test_close_drains_then_reports_closed(self):
        hub = Hub()
        outlet = hub.open_outlet(signal_info("eda"))
        inlet = hub.open_inlet(name="eda")
        outlet.push_values([1.0], timestamp=0.0)
        outlet.close()
        assert not inlet.closed  # one sample still buffered
        assert len(inlet.pull()) == 1
        assert inlet.closed
        assert inlet.pull(timeout=None) == []
        with pytest.raises(TransportError, match="closed"):
            outlet.push_values([2.0], timestamp=1.0)


class TestClockSync:
    def test_loopback_offset_below_1ms(self):
        hub = Hub()
        outlet = hub.open_outlet(signal_info("eda"))
        result = estimate_offset(outlet, exchanges=16)
        assert abs(result.offset) < 1e-3
        assert result.uncertainty < 1e-3
        assert result.n_exchanges == 16

    def test_two_second_shift_recovered_within_5ms(self):
        hub = Hub()
        shifted = lambda: time.monotonic() + 2.000
        outlet = hub.open_outlet(signal_info("eda"), clock=shifted)
        result = estimate_offset(outlet, exchanges=9)
        assert abs(result.offset - 2.000) < 5e-3
        # converting a remote stamp back to local undoes the shift
        t_remote = shifted()
        assert abs(result.to_local(t_remote) - time.monotonic()) < 5e-3

    def test_too_few_exchanges_rejected(self):
        hub = Hub()
        outlet = hub.open_outlet(signal_info("eda"))
        with pytest.raises(TransportError, match="at least 5"):
            estimate_offset(outlet, exchanges=4)


def make_recording(path, n=40):
    """Two signal streams and a marker stream, interleaved deterministically."""
    hub = Hub()
    eda = hub.open_outlet(signal_info("eda", channels=2, rate=8.0, sid="eda-0"))
    breath = hub.open_outlet(signal_info("breath", rate=4.0, sid="breath-0"))
    marks = hub.open_outlet(marker_info("events", sid="marks-0"))
    recorder = Recorder(hub, path)
    for i in range(n):
        t = 1000.0 + i * 0.125
        eda.push_values([0.5 + 0.01 * i, -1.0 / (i + 1)], timestamp=t)
        if i % 2 == 0:
            breath.push_values([float(i)], timestamp=t + 0.001)
        if i % 10 == 0:
            marks.push_marker(f"PAGE:{i // 10}", timestamp=t + 0.002)
    for outlet in (eda, breath, marks):
        outlet.close()
    return recorder.drain()


def sample_lines(path):
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    return [r for r in records if r["type"] == "sample"]


def payloads(lines):
    return [(r["sid"], r.get("m"), tuple(r.get("v", ()))) for r in lines]


def deltas(lines):
    ts = [r["t"] for r in lines]
    return [b - a for a, b in zip(ts, ts[1:])]


class TestRecording:
    def test_record_replay_preserves_values_and_order(self, tmp_path):
        path = tmp_path / "session.pifrec"
        summary = make_recording(path)
        assert summary.n_samples == 40 + 20 + 4
        assert summary.n_dropped == 0

        hub = Hub()
        tap_box = {}
        replay(path, hub, on_ready=lambda: tap_box.update(tap=hub.open_tap()))
        got = tap_box["tap"].pull(max_n=1000)
        assert len(got) == summary.n_samples
        assert got[0][0] == "eda-0"
        assert got[0][1].values == (0.5, -1.0)
        marker_samples = [s for _, s in got if s.is_marker]
        assert [s.label for s in marker_samples] == ["PAGE:0", "PAGE:1", "PAGE:2", "PAGE:3"]

    def test_record_replay_record_is_a_fixed_point(self, tmp_path):
        first = tmp_path / "first.pifrec"
        second = tmp_path / "second.pifrec"
        make_recording(first)

        hub = Hub()
        box = {}
        replay(first, hub, on_ready=lambda: box.update(rec=Recorder(hub, second)))
        box["rec"].drain()

        lines1, lines2 = sample_lines(first), sample_lines(second)
        assert payloads(lines1) == payloads(lines2)
        for d1, d2 in zip(deltas(lines1), deltas(lines2)):
            assert abs(d1 - d2) < 1e-6

    def test_replay_without_rebase_is_byte_identical_on_samples(self, tmp_path):
        first = tmp_path / "first.pifrec"
        second = tmp_path / "second.pifrec"
        make_recording(first)
        hub = Hub()
        box = {}
        replay(first, hub, rebase=False, on_ready=lambda: box.update(rec=Recorder(hub, second)))
        box["rec"].drain()

        raw1 = [l for l in open(first, encoding="utf-8") if '"type":"sample"' in l]
        raw2 = [l for l in open(second, encoding="utf-8") if '"type":"sample"' in l]
        assert raw1 == raw2

    def test_headers_only_recording_replays_empty(self, tmp_path):
        path = tmp_path / "empty.pifrec"
        hub = Hub()
        outlet = hub.open_outlet(signal_info("eda"))
        recorder = Recorder(hub, path)
        outlet.close()
        summary = recorder.drain()
        assert summary.n_samples == 0

        out = replay(path, Hub())
        assert out.n_samples == 0

    def test_zero_byte_file_is_corrupt(self, tmp_path):
        path = tmp_path / "nothing.pifrec"
        path.write_text("")
        with pytest.raises(CorruptRecording, match="missing recording header"):
            replay(path, Hub())

    def test_truncated_final_line_recovers_prefix(self, tmp_path):
        path = tmp_path / "cut.pifrec"
        summary = make_recording(path)
        data = path.read_bytes()
        cut = data[: len(data) - 25]  # slice into the final JSON line
        assert not cut.endswith(b"\n")
        path.write_bytes(cut)

        hub = Hub()
        box = {}
        with pytest.raises(CorruptRecording) as err:
            replay(path, hub, on_ready=lambda: box.update(tap=hub.open_tap()))
        assert err.value.samples_recovered == summary.n_samples - 1
        assert err.value.byte_offset == len(cut) - (len(cut) - cut.rfind(b"\n") - 1)
        got = box["tap"].pull(max_n=1000)
        assert len(got) == summary.n_samples - 1

    def test_garbage_line_reports_byte_offset(self, tmp_path):
        path = tmp_path / "bad.pifrec"
        make_recording(path, n=4)
        lines = path.read_bytes().split(b"\n")
        offset = sum(len(l) + 1 for l in lines[:6])
        lines.insert(6, b"{this is not json")
        path.write_bytes(b"\n".join(lines))
        with pytest.raises(CorruptRecording) as err:
            replay(path, Hub())
        assert err.value.byte_offset == offset
        assert "bad JSON" in str(err.value)

    def test_unknown_sid_in_sample_is_corrupt(self, tmp_path):
        path = tmp_path / "orphan.pifrec"
        make_recording(path, n=2)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write('{"sid":"ghost","t":1.0,"type":"sample","v":[1.0]}\n')
        with pytest.raises(CorruptRecording, match="bad sample"):
            replay(path, Hub())

    def test_realtime_replay_paces_inter_sample_gaps(self, tmp_path):
        path = tmp_path / "paced.pifrec"
        hub = Hub()
        outlet = hub.open_outlet(signal_info("eda", sid="e"))
        recorder = Recorder(hub, path)
        for t in (0.0, 0.25, 0.75, 0.75):
            outlet.push_values([1.0], timestamp=t)
        outlet.close()
        recorder.drain()

        naps = []
        replay(path, Hub(), speed="realtime", sleep=naps.append)
        assert naps == [0.25, 0.5]

    def test_unknown_speed_rejected(self, tmp_path):
        path = tmp_path / "whatever.pifrec"
        make_recording(path, n=2)
        with pytest.raises(TransportError, match="speed"):
            replay(path, Hub(), speed="turbo")

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.floats(allow_nan=False, allow_infinity=False, width=64),
                st.floats(allow_nan=False, allow_infinity=False, width=64),
            ),
            min_size=1,
            max_size=30,
        )
    )
    def test_float_payloads_round_trip_exactly(self, rows):
        with tempfile.TemporaryDirectory() as tmp:
            self._round_trip(pathlib.Path(tmp) / "x.pifrec", rows)

    @staticmethod
    def _round_trip(path, rows):
        hub = Hub()
        outlet = hub.open_outlet(signal_info("sig", channels=2, sid="s"))
        recorder = Recorder(hub, path)
        for i, row in enumerate(rows):
            outlet.push_values(row, timestamp=float(i))
        outlet.close()
        recorder.drain()

        hub2 = Hub()
        box = {}
        replay(path, hub2, rebase=False, on_ready=lambda: box.update(inlet=hub2.open_inlet(name="sig")))
        got = box["inlet"].pull(max_n=100)
        assert [s.values for s in got] == [tuple(r) for r in rows]


class TestNetBridge:
    def test_tcp_round_trip_and_registry(self):
        with TransportServer(port=0) as server:
            info = signal_info("eda", channels=2, rate=8.0, sid="net-eda")
            with NetOutlet(info, port=server.port) as outlet:
                with NetInlet(port=server.port, name="eda") as inlet:
                    assert inlet.info.source_id == "net-eda"
                    for i in range(100):
                        outlet.push_values([float(i), float(-i)], timestamp=float(i))
                    got = []
                    deadline = time.monotonic() + 5.0
                    while len(got) < 100 and time.monotonic() < deadline:
                        got.extend(inlet.pull(max_n=200, timeout=0.1))
                    assert [s.values for s in got] == [(float(i), float(-i)) for i in range(100)]

                streams = registry(port=server.port)
                assert [s.source_id for s in streams] == ["net-eda"]

    def test_probe_recovers_producer_clock_shift(self):
        with TransportServer(port=0) as server:
            info = signal_info("eda", sid="shifted")
            shifted = lambda: time.monotonic() + 2.000
            with NetOutlet(info, port=server.port, clock=shifted):
                with NetInlet(port=server.port, source_id="shifted") as inlet:
                    result = estimate_offset(inlet, exchanges=9)
                    assert abs(result.offset - 2.000) < 5e-3

    def test_probe_against_server_local_stream(self):
        with TransportServer(port=0) as server:
            server.hub.open_outlet(
                signal_info("eda", sid="local"), clock=lambda: time.monotonic() + 0.5
            )
            with NetInlet(port=server.port, source_id="local") as inlet:
                result = estimate_offset(inlet, exchanges=9)
                assert abs(result.offset - 0.5) < 5e-3

    def test_duplicate_source_id_rejected_over_tcp(self):
        with TransportServer(port=0) as server:
            info = signal_info("eda", sid="dup")
            with NetOutlet(info, port=server.port):
                with pytest.raises(TransportError, match="duplicate"):
                    NetOutlet(info, port=server.port)

    def test_marker_stream_over_tcp(self):
        with TransportServer(port=0) as server:
            with NetOutlet(marker_info("events", sid="m"), port=server.port) as outlet:
                with NetInlet(port=server.port, name="events") as inlet:
                    outlet.push_marker("KNOT:cell", timestamp=1.0)
                    outlet.push_marker("PAGE:0", timestamp=2.0)
                    got = []
                    deadline = time.monotonic() + 5.0
                    while len(got) < 2 and time.monotonic() < deadline:
                        got.extend(inlet.pull(timeout=0.1))
                    assert [s.label for s in got] == ["KNOT:cell", "PAGE:0"]

    def test_local_arity_check_fires_before_send(self):
        with TransportServer(port=0) as server:
            with NetOutlet(signal_info("eda", channels=2, sid="a2"), port=server.port) as outlet:
                with pytest.raises(TransportError, match="arity"):
                    outlet.push_values([1.0], timestamp=0.0)
