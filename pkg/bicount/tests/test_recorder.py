import bicount
from bicount.recorder import Recorder, record_stage


def test_recorder():
    with bicount.Recorder() as rec:
        assert rec.is_recording
        record_stage("solve", "a" * 64, cache_hit=False, seconds=1.5, outputs=["solve/x.csv"])
    assert not rec.is_recording
    with rec:
        rec.start()  # no-op
        record_stage("count", "b" * 64, cache_hit=True, seconds=0.0)
    record_stage("orbits", "c" * 64, cache_hit=False, seconds=0.1)  # not recorded
    rec.stop()  # no-op
    assert len(rec) == 2
    assert [event.stage for event in rec] == ["solve", "count"]
    assert rec.recomputed == ["solve"]
    records = rec.to_records()
    assert records[0]["outputs"] == ["solve/x.csv"]
    assert records[1]["cache_hit"] is True


def test_record_flag():
    rec = Recorder(record=True)
    record_stage("solve", "0" * 64, cache_hit=False, seconds=0.25)
    assert rec.is_recording
    rec.stop()
    assert rec.data[0].seconds == 0.25


def test_record_repr():
    rec = Recorder(max_rows=4)
    for i in range(7):
        rec.record(f"stage{i}", f"{i:064d}", cache_hit=i % 2, seconds=i)
    text = repr(rec)
    assert text.splitlines()[0] == "bicount.Recorder (not recording)"
    assert "... (3 rows not shown)" in text
    assert "stage0" in text and "stage6" in text
    assert "stage3" not in text
    assert "cached" in text
    rec.start()
    assert repr(rec).startswith("bicount.Recorder (recording)")
    assert "bicount.Recorder (recording)" in rec._repr_html_()
    rec.stop()
    html = rec._repr_html_()
    assert "bicount.Recorder (paused)" in html
    assert "stage6" in html
    assert list(rec.to_frame().columns) == ["stage", "input_hash", "cache_hit", "seconds"]
