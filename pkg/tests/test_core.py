"""Tests for core components: trial model, errors, config, events, utilities."""

from pathlib import Path

import numpy as np
import pytest

from skillseries.core.config import (
    DEFAULT_COMBINATIONS,
    THREADS_ENV,
    ConfigManager,
    RunConfig,
    dump_config,
)
from skillseries.core.errors import (
    BadParam,
    ConfigError,
    DataError,
    DuplicateTrial,
    LabelInconsistency,
    MalformedRow,
    NoConvergence,
    NumericError,
    OverlapError,
    TranscriptOutOfRange,
    UnknownGesture,
    WindowTooLarge,
)
from skillseries.core.events import Event, EventBus, EventType, emit_fit
from skillseries.core.trial import (
    ALL_TARGETS,
    Criterion,
    Dataset,
    GestureSegment,
    KinematicSeries,
    SkillLabels,
    SkillLevel,
    Task,
    clip_targets,
    validate_transcript,
)
from skillseries.utils.cache import Cache, make_key
from skillseries.utils.files import atomic_write_text

from conftest import make_labels, make_trial


class TestErrors:
    """Test the exception hierarchy."""

    def test_exit_codes_by_family(self) -> None:
        """Config, data and numeric errors map to exit codes 1, 2 and 3."""
        assert BadParam("x").exit_code == 1
        assert WindowTooLarge("x", max_window=10).exit_code == 1
        assert MalformedRow("x", line=3).exit_code == 2
        assert NoConvergence("x", iterations=5, gap=0.1).exit_code == 3

    def test_context_in_message(self) -> None:
        """Context keywords are kept as attributes and shown in the message."""
        error = MalformedRow("Bad token", line=7, trial="Suturing_B001")
        assert error.line == 7
        assert error.context["trial"] == "Suturing_B001"
        assert "line=7" in str(error)

    def test_window_too_large_suggests_maximum(self) -> None:
        error = WindowTooLarge("too big", max_window=950)
        assert error.max_window == 950
        assert isinstance(error, ConfigError)

    def test_hierarchy(self) -> None:
        assert issubclass(OverlapError, DataError)
        assert issubclass(NoConvergence, NumericError)


class TestTrialModel:
    """Test the trial data types."""

    def test_series_is_read_only(self) -> None:
        series = KinematicSeries(np.zeros((2, 5)))
        with pytest.raises(ValueError):
            series.values[0, 0] = 1.0

    def test_series_rejects_non_finite(self) -> None:
        values = np.ones((2, 5))
        values[1, 2] = np.nan
        with pytest.raises(BadParam):
            KinematicSeries(values)

    def test_series_needs_two_frames(self) -> None:
        with pytest.raises(BadParam):
            KinematicSeries(np.zeros((3, 1)))

    def test_default_channel_names(self) -> None:
        assert KinematicSeries(np.zeros((2, 4))).channel_names == ("ch0", "ch1")
        assert len(KinematicSeries(np.zeros((76, 2))).channel_names) == 76

    def test_labels_accept_consistent_grs(self) -> None:
        """OSATS 3,4,3,4,3,4 with GRS 21 is valid."""
        scores = dict(zip(ALL_TARGETS[:6], (3, 4, 3, 4, 3, 4)))
        labels = SkillLabels(SkillLevel.EXPERT, scores, 21)
        assert labels.target(Criterion.GRS) == 21.0
        assert labels.targets().tolist() == [3, 4, 3, 4, 3, 4, 21]

    def test_labels_reject_wrong_grs(self) -> None:
        scores = dict(zip(ALL_TARGETS[:6], (3, 4, 3, 4, 3, 4)))
        with pytest.raises(LabelInconsistency):
            SkillLabels(SkillLevel.EXPERT, scores, 20)

    def test_labels_reject_out_of_range_score(self) -> None:
        scores = dict(zip(ALL_TARGETS[:6], (6, 4, 3, 4, 3, 4)))
        with pytest.raises(LabelInconsistency):
            SkillLabels(SkillLevel.EXPERT, scores, 24)

    def test_score_ranges_and_clipping(self) -> None:
        assert Criterion.GRS.score_range == (6, 30)
        assert Criterion.TM.score_range == (1, 5)
        assert Criterion.RT.clip(-0.4) == 1.0
        assert Criterion.GRS.clip(17.25) == 17.25
        clipped = clip_targets([0.0, 2.5, 5.5, 3.0, 1.0, 9.0, 40.0])
        assert clipped.tolist() == [1.0, 2.5, 5.0, 3.0, 1.0, 5.0, 30.0]

    def test_level_codes(self) -> None:
        assert SkillLevel.parse("N") is SkillLevel.NOVICE
        assert SkillLevel.parse("expert") is SkillLevel.EXPERT

    def test_task_parse_accepts_directory_names(self) -> None:
        assert Task.parse("Knot_Tying") is Task.KNOT_TYING
        assert Task.parse("needlepassing") is Task.NEEDLE_PASSING
        with pytest.raises(BadParam):
            Task.parse("Cutting")

    def test_gesture_segment_vocabulary(self) -> None:
        with pytest.raises(UnknownGesture):
            GestureSegment("G99", 0, 10)

    def test_transcript_overlap(self) -> None:
        with pytest.raises(OverlapError):
            validate_transcript([GestureSegment("G1", 0, 80), GestureSegment("G2", 49, 120)])

    def test_transcript_sorted(self) -> None:
        ordered = validate_transcript([GestureSegment("G5", 80, 190), GestureSegment("G1", 0, 80)])
        assert [s.gesture_id for s in ordered] == ["G1", "G5"]

    def test_transcript_must_fit_series(self) -> None:
        values = np.zeros((2, 200))
        make_trial(values, transcript=(GestureSegment("G1", 0, 200),))
        with pytest.raises(TranscriptOutOfRange) as info:
            make_trial(values, transcript=(GestureSegment("G1", 0, 5000),))
        assert info.value.context["trial"] == "Suturing_B001"
        assert "Suturing_B001" in str(info.value)
        assert isinstance(info.value, DataError)

    def test_trial_id(self) -> None:
        trial = make_trial(np.zeros((2, 4)), surgeon_id="C", trial_index=4)
        assert trial.trial_id == "Suturing_C004"

    def test_dataset_rejects_duplicates(self) -> None:
        trial = make_trial(np.zeros((2, 4)))
        with pytest.raises(DuplicateTrial):
            Dataset((trial, make_trial(np.ones((2, 4)))))

    def test_dataset_grouping(self) -> None:
        trials = (
            make_trial(np.zeros((1, 3)), "C", 1),
            make_trial(np.zeros((1, 3)), "B", 1),
            make_trial(np.zeros((1, 3)), "C", 2),
        )
        dataset = Dataset(trials)
        assert dataset.surgeons() == ["B", "C"]
        assert [t.trial_id for t in dataset.by_surgeon()["C"]] == [
            "Suturing_C001",
            "Suturing_C002",
        ]
        assert dataset.get("Suturing_B001").surgeon_id == "B"
        with pytest.raises(BadParam):
            dataset.get("Suturing_Z009")


class TestConfig:
    """Test configuration loading and validation."""

    def test_defaults(self) -> None:
        config = ConfigManager().load()
        assert config.scheme == "LOSO"
        assert config.repeats == 20
        assert config.family("DCT").k_predict == 1000
        assert config.family("ApEn").C == 1e4
        assert config.family("SMT").k_classify == 50
        assert len(config.combinations) == len(DEFAULT_COMBINATIONS) == 11

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError):
            ConfigManager(str(tmp_path / "nope.toml")).load()

    def test_sections_override_defaults(self, tmp_path: Path) -> None:
        path = tmp_path / "run.toml"
        path.write_text(
            '[run]\nscheme = "LOUO"\nseed = 3\n\n'
            "[families.DCT]\nk_predict = 20\nq = 30\n\n"
            "[highlights]\nwindow_length = 80\n\n"
            '[logging]\nlevel = "DEBUG"\n'
        )
        config = ConfigManager(str(path)).load()
        assert config.scheme == "LOUO"
        assert config.seed == 3
        assert config.family("DCT").k_predict == 20
        assert config.family("DCT").q == 30
        assert config.family("DCT").C == 1e-6
        assert config.window_length == 80
        assert config.log_level == "DEBUG"

    def test_unknown_family_key(self, tmp_path: Path) -> None:
        path = tmp_path / "run.toml"
        path.write_text("[families.DCT]\nbogus = 1\n")
        with pytest.raises(ConfigError) as info:
            ConfigManager(str(path)).load()
        assert info.value.context["key"] == "families.DCT"

    def test_validate_names_key(self) -> None:
        with pytest.raises(ConfigError) as info:
            RunConfig(rho_mode="median").validate()
        assert info.value.context["key"] == "run.rho_mode"

    def test_overrides_skip_none(self) -> None:
        config = RunConfig().with_overrides(seed=5, scheme=None)
        assert config.seed == 5
        assert config.scheme == "LOSO"

    def test_thread_cap(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv(THREADS_ENV, "2")
        assert RunConfig(threads=8).effective_threads() == 2
        monkeypatch.delenv(THREADS_ENV)
        assert RunConfig(threads=8).effective_threads() == 8

    def test_dump_and_reload(self, tmp_path: Path) -> None:
        """A written config loads back to the same values."""
        original = RunConfig(scheme="LOUO", seed=11, dataset_root="/data/jigsaws")
        path = tmp_path / "out" / "config.resolved.toml"
        dump_config(original, path)
        loaded = ConfigManager(str(path)).load()
        assert loaded.to_dict() == original.to_dict()

    def test_create_default_config(self, tmp_path: Path) -> None:
        path = ConfigManager().create_default_config(tmp_path / "default.toml")
        assert ConfigManager(str(path)).load().to_dict() == RunConfig().to_dict()


class TestEventBus:
    """Test event bus functionality."""

    def test_subscription_and_history(self) -> None:
        bus = EventBus(history_size=2)
        received = []
        bus.subscribe(EventType.FOLD_STARTED, received.append)
        for index in range(3):
            bus.emit(Event(type=EventType.FOLD_STARTED, data={"fold": index}))
        assert [e.data["fold"] for e in received] == [0, 1, 2]
        assert [e.data["fold"] for e in bus.history] == [1, 2]

    def test_unsubscribe(self) -> None:
        bus = EventBus()
        received = []
        bus.subscribe(EventType.FIT, received.append)
        bus.unsubscribe(EventType.FIT, received.append)
        emit_fit(bus, "pca", ["a"])
        assert received == []

    def test_scoped_tags(self, event_log: tuple) -> None:
        bus, received = event_log
        emit_fit(bus.scoped(fold=2).scoped(inner_surgeon="C"), "svr", ["x", "y"], family="DCT")
        event = received[0]
        assert event.data["fold"] == 2
        assert event.data["inner_surgeon"] == "C"
        assert event.data["component"] == "svr"
        assert event.data["trial_ids"] == ("x", "y")

    def test_emit_fit_without_bus(self) -> None:
        emit_fit(None, "pca", ["a"])


class TestUtilities:
    """Test the cache and file helpers."""

    def test_cache_lru_eviction(self) -> None:
        cache = Cache(max_size=2)
        cache.set("a", 1)
        cache.set("b", 2)
        cache.get("a")
        cache.set("c", 3)
        assert cache.get("b") is None
        assert cache.get("a") == 1
        assert len(cache) == 2

    def test_get_or_compute_calls_once(self) -> None:
        cache = Cache()
        calls = []

        def compute() -> int:
            calls.append(1)
            return 42

        assert cache.get_or_compute("k", compute) == 42
        assert cache.get_or_compute("k", compute) == 42
        assert len(calls) == 1
        assert cache.hits == 1

    def test_make_key_stable(self) -> None:
        assert make_key("a", 1) == make_key("a", 1)
        assert make_key("a", 1) != make_key("a", 2)

    def test_atomic_write_leaves_no_temp_files(self, tmp_path: Path) -> None:
        path = tmp_path / "sub" / "out.txt"
        atomic_write_text(path, "one\n")
        atomic_write_text(path, "two\n")
        assert path.read_text() == "two\n"
        assert [p.name for p in path.parent.iterdir()] == ["out.txt"]

    def test_labels_helper(self) -> None:
        assert make_labels(2).grs == 12
