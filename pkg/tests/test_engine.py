import random

import pytest

from bibharvest.catalog import BackendUnavailable, generate_synthetic
from bibharvest.engine import (
    CONVERGED,
    MAX_ITER_REACHED,
    RUNNING,
    CorruptState,
    RunConfig,
    RunInterrupted,
    load,
    new_state,
    persist,
    resume,
    run,
    step,
)
from bibharvest.risio import Reference

from conftest import REFERENCE_SPEC, make_reference_config
from oracles import random_reference


class ScriptedBackend:
    """Returns the next scripted reference list on each search call."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = 0

    def search(self, q):
        batch = self.script[min(self.calls, len(self.script) - 1)]
        self.calls += 1
        return list(batch)


class EmptyBackend:
    def search(self, q):
        return []


class DeadBackend:
    def search(self, q):
        raise BackendUnavailable("nope")


def refs(n, prefix):
    return [Reference(title=f"{prefix} {i:03d}", abstract=f"body of {prefix} {i:03d}") for i in range(n)]


class TestRunConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            RunConfig(initial_keywords=(), n_k=5, max_iterations=3)
        with pytest.raises(ValueError):
            RunConfig(initial_keywords=("x y",), n_k=0, max_iterations=3)
        with pytest.raises(ValueError):
            RunConfig(initial_keywords=("x y",), n_k=5, max_iterations=0)

    def test_dict_round_trip(self):
        config = make_reference_config("urban growth", n_k=7)
        assert RunConfig.from_dict(config.to_dict()) == config

    def test_unknown_keys_rejected(self):
        data = make_reference_config("urban growth", n_k=7).to_dict()
        data["n_keywords"] = 5
        with pytest.raises(ValueError):
            RunConfig.from_dict(data)


class TestStep:
    def config(self, **kw):
        defaults = dict(
            initial_keywords=("seed query",),
            n_k=3,
            max_iterations=10,
            stability_window=2,
            per_kw_limit=20,
        )
        defaults.update(kw)
        return RunConfig(**defaults)

    def test_first_step_uses_verbatim_seed(self):
        # a 4-token seed phrase is sent as-is even though extracted
        # keywords are capped at 3 tokens
        config = self.config(initial_keywords=("transportation network urban growth",))
        seen = []

        class Recorder(EmptyBackend):
            def search(self, q):
                seen.append(q.keyword)
                return []

        state = step(new_state(config), Recorder())
        assert seen == ["transportation network urban growth"]
        assert state.trace[-1].c_size == 0
        # empty corpus: keywords stay the seeds
        assert state.keywords.phrases == (("transportation", "network", "urban", "growth"),)

    def test_empty_fetch_is_a_fixpoint_step(self):
        backend = ScriptedBackend([refs(6, "alpha"), []])
        state = step(new_state(self.config()), backend)
        keywords_before = state.keywords
        state2 = step(state, EmptyBackend())
        assert state2.trace[-1].c_size == state.trace[-1].c_size
        assert state2.keywords == keywords_before

    def test_step_on_finished_state_rejected(self):
        state = run(self.config(stability_window=1, max_iterations=3), EmptyBackend())
        assert state.status != RUNNING
        with pytest.raises(ValueError):
            step(state, EmptyBackend())

    def test_failed_step_leaves_state_reusable(self):
        state = new_state(self.config())
        with pytest.raises(BackendUnavailable):
            step(state, DeadBackend())
        assert state.status == RUNNING
        assert state.trace == ()
        after = step(state, ScriptedBackend([refs(2, "beta")]))
        assert after.trace[-1].c_size == 2

    def test_record_bookkeeping(self):
        backend = ScriptedBackend([refs(5, "alpha"), refs(7, "alpha")])
        s1 = step(new_state(self.config()), backend)
        s2 = step(s1, backend)
        rec = s2.trace[-1]
        assert rec.n == 2
        assert rec.c_size == 7
        assert rec.added == 2
        assert rec.n_keywords == len(s2.keywords)


class TestStoppingRule:
    def test_converges_when_window_stable(self):
        # sizes 10, 12, 12 with w=2 -> converged at iteration 3
        backend = ScriptedBackend([refs(10, "a"), refs(12, "a"), refs(12, "a"), refs(12, "a")])
        config = RunConfig(
            initial_keywords=("seed query",), n_k=2, max_iterations=10, stability_window=2
        )
        state = run(config, backend)
        assert state.status == CONVERGED
        assert [r.c_size for r in state.trace] == [10, 12, 12]

    def test_max_iterations_reached(self):
        backend = ScriptedBackend([refs(n, "a") for n in (1, 2, 3, 4, 5, 6)])
        config = RunConfig(
            initial_keywords=("seed query",), n_k=2, max_iterations=4, stability_window=2
        )
        state = run(config, backend)
        assert state.status == MAX_ITER_REACHED
        assert len(state.trace) == 4

    def test_single_iteration_window_one_converges(self):
        config = RunConfig(
            initial_keywords=("seed query",), n_k=2, max_iterations=1, stability_window=1
        )
        backend = ScriptedBackend([refs(5, "a")])
        state = run(config, backend)
        assert state.status == CONVERGED
        assert len(state.trace) == 1

    def test_single_iteration_window_two_hits_cap(self):
        config = RunConfig(
            initial_keywords=("seed query",), n_k=2, max_iterations=1, stability_window=2
        )
        backend = ScriptedBackend([refs(5, "a")])
        state = run(config, backend)
        assert state.status == MAX_ITER_REACHED

    def test_c_size_nondecreasing(self):
        rng = random.Random(0)
        script = [[random_reference(rng) for _ in range(rng.randint(0, 6))] for _ in range(8)]
        config = RunConfig(
            initial_keywords=("alpha beta",), n_k=4, max_iterations=8, stability_window=3
        )
        state = run(config, ScriptedBackend(script))
        sizes = [r.c_size for r in state.trace]
        assert sizes == sorted(sizes)

    def test_run_interrupted_carries_partial_state(self):
        class DiesAfterTwo:
            def __init__(self):
                self.calls = 0

            def search(self, q):
                self.calls += 1
                if self.calls > 2:
                    raise BackendUnavailable("gone")
                return refs(3 * self.calls, "a")

        config = RunConfig(
            initial_keywords=("seed query",), n_k=1, max_iterations=10, stability_window=2
        )
        with pytest.raises(RunInterrupted) as excinfo:
            run(config, DiesAfterTwo())
        partial = excinfo.value.state
        assert len(partial.trace) == 2
        assert partial.status == RUNNING


class TestReferenceCatalogRun:
    def test_converges_quickly(self, reference_catalog, reference_seed_query):
        config = make_reference_config(reference_seed_query, n_k=10)
        state = run(config, reference_catalog)
        assert state.status == CONVERGED
        assert len(state.trace) <= 15
        assert len(state.corpus) > 0

    def test_deterministic_end_to_end(self, reference_catalog, reference_seed_query):
        config = make_reference_config(reference_seed_query, n_k=5)
        a = run(config, reference_catalog)
        b = run(config, generate_synthetic(REFERENCE_SPEC))
        assert a == b


class TestPersistLoad:
    def test_round_trip_equal_state(self, tmp_path, reference_catalog, reference_seed_query):
        config = make_reference_config(reference_seed_query, n_k=8)
        state = run(config, reference_catalog)
        persist(state, tmp_path / "s")
        assert load(tmp_path / "s") == state

    def test_fresh_state_round_trip(self, tmp_path):
        state = new_state(RunConfig(initial_keywords=("urban growth", "city systems"), n_k=4, max_iterations=5))
        persist(state, tmp_path / "s")
        loaded = load(tmp_path / "s")
        assert loaded == state
        assert loaded.keywords.phrases == (("city", "systems"), ("urban", "growth"))

    def test_persist_load_persist_byte_identical(self, tmp_path, reference_catalog, reference_seed_query):
        config = make_reference_config(reference_seed_query, n_k=8)
        state = run(config, reference_catalog)
        persist(state, tmp_path / "a")
        persist(load(tmp_path / "a"), tmp_path / "b")
        for name in ("config.json", "corpus.ris", "keywords.kw", "provenance.csv", "status", "trace.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_missing_file_is_corrupt(self, tmp_path, reference_catalog, reference_seed_query):
        config = make_reference_config(reference_seed_query, n_k=4)
        persist(run(config, reference_catalog), tmp_path / "s")
        (tmp_path / "s" / "trace.csv").unlink()
        with pytest.raises(CorruptState):
            load(tmp_path / "s")

    def test_tampered_trace_is_corrupt(self, tmp_path, reference_catalog, reference_seed_query):
        config = make_reference_config(reference_seed_query, n_k=4)
        persist(run(config, reference_catalog), tmp_path / "s")
        trace = tmp_path / "s" / "trace.csv"
        lines = trace.read_text().splitlines()
        parts = lines[1].split(",")
        parts[3] = str(int(parts[3]) + 999)  # c_size no longer matches
        lines[1] = ",".join(parts)
        trace.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptState):
            load(tmp_path / "s")

    def test_bad_status_is_corrupt(self, tmp_path, reference_catalog, reference_seed_query):
        config = make_reference_config(reference_seed_query, n_k=4)
        persist(run(config, reference_catalog), tmp_path / "s")
        (tmp_path / "s" / "status").write_text("finished\n")
        with pytest.raises(CorruptState):
            load(tmp_path / "s")


class TestResume:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_interrupt_resume_equals_uninterrupted(
        self, k, tmp_path, reference_catalog, reference_seed_query
    ):
        config = make_reference_config(reference_seed_query, n_k=10)
        full = run(config, reference_catalog)
        persist(full, tmp_path / "full")

        state = new_state(config)
        for _ in range(k):
            state = step(state, reference_catalog)
        persist(state, tmp_path / "part")
        resumed = resume(load(tmp_path / "part"), reference_catalog)
        persist(resumed, tmp_path / "resumed")

        for name in ("config.json", "corpus.ris", "keywords.kw", "provenance.csv", "status", "trace.csv"):
            assert (tmp_path / "full" / name).read_bytes() == (
                tmp_path / "resumed" / name
            ).read_bytes(), name

    def test_resume_finished_state_is_noop(self, reference_catalog, reference_seed_query):
        config = make_reference_config(reference_seed_query, n_k=4)
        state = run(config, reference_catalog)
        assert resume(state, DeadBackend()) is state


class TestWarningsPersistence:
    def test_warning_text_survives_round_trip(self, tmp_path):
        class HalfBroken:
            def search(self, q):
                if q.keyword == "bad phrase":
                    raise BackendUnavailable("comma, quote \" and ; semicolon")
                return refs(3, "ok")

        config = RunConfig(
            initial_keywords=("good phrase", "bad phrase"),
            n_k=2,
            max_iterations=1,
            stability_window=1,
        )
        state = run(config, HalfBroken())
        assert state.trace[0].warnings
        persist(state, tmp_path / "s")
        loaded = load(tmp_path / "s")
        assert loaded.trace[0].warnings == state.trace[0].warnings
