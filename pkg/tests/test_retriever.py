import pytest

from editsearch.config import derive_config
from editsearch.errors import DistanceOutOfRange, ScorerUnavailable
from editsearch.retriever import ReferenceSet, retrieve_references, score_similarity
from editsearch.simworld import SimImage
from editsearch.topology import append_state, create_root


class TableScorer:
    """Distances looked up by the candidate image's payload tag."""

    def __init__(self, table, channels=("structural", "histogram")):
        self.table = table
        self.channels = channels

    def distances(self, a, b):
        value = self.table[a.locator]
        if isinstance(value, Exception):
            raise value
        return {name: value for name in self.channels}


def constant_scorer(value, channels=("structural", "histogram")):
    class _Scorer:
        def distances(self, a, b):
            return {name: value for name in channels}

    return _Scorer()


class TestScoreSimilarity:
    def image(self):
        return SimImage.make({"a0": "v0"}).to_ref()

    def test_uniform_blend(self):
        ref = self.image()
        assert score_similarity(ref, ref, constant_scorer(0.0)) == 100
        assert score_similarity(ref, ref, constant_scorer(1.0)) == 0
        assert score_similarity(ref, ref, constant_scorer(0.25)) == 75

    def test_rounding_half_up(self):
        ref = self.image()
        # blended distance 0.345 -> 65.5 -> 66
        assert score_similarity(ref, ref, constant_scorer(0.345)) == 66

    def test_custom_weights(self):
        ref = self.image()

        class TwoChannel:
            def distances(self, a, b):
                return {"structural": 1.0, "histogram": 0.0}

        score = score_similarity(ref, ref, TwoChannel(), weights=(("histogram", 1.0),))
        assert score == 100

    def test_weight_for_missing_channel(self):
        ref = self.image()
        with pytest.raises(ScorerUnavailable):
            score_similarity(ref, ref, constant_scorer(0.5), weights=(("lpips", 1.0),))

    def test_no_channels(self):
        ref = self.image()

        class Empty:
            def distances(self, a, b):
                return {}

        with pytest.raises(ScorerUnavailable):
            score_similarity(ref, ref, Empty())

    def test_out_of_range_distance(self):
        ref = self.image()
        with pytest.raises(DistanceOutOfRange):
            score_similarity(ref, ref, constant_scorer(1.5))


class TestRetrieve:
    def build(self):
        """Root with two depth-1 branches and one depth-2 state."""
        topo = create_root(SimImage.make({"a0": "v0"}, 1.0).to_ref(), "set a0=v1")

        def out(tag):
            return SimImage.make({"a0": tag}).to_ref()

        a = append_state(topo, 0, "ta", out("v1"))
        b = append_state(topo, 0, "tb", out("v2"))
        c = append_state(topo, a, "tc", out("v3"))
        return topo, a, b, c

    def test_scores_filter_and_rank(self):
        topo, a, b, c = self.build()
        cfg = derive_config(3, "main")
        # candidate inputs: a/b carry the root image, c carries a's output
        table = {
            topo.state(a).input.locator: 0.10,  # 90
            topo.state(c).input.locator: 0.30,  # 70
        }
        refs = retrieve_references(topo, c, cfg, TableScorer(table))
        # child of c sits at depth 3, window [1, 4]; ancestors {0, a, c} out
        assert [e.state_id for e in refs.entries] == [b]
        assert refs.entries[0].similarity == 90
        assert refs.entries[0].thought == "tb"

    def test_threshold_cuts(self):
        topo, a, b, c = self.build()
        cfg = derive_config(3, "main")
        table = {topo.state(b).input.locator: 0.80}  # 20 < 50
        refs = retrieve_references(topo, c, cfg, TableScorer(table))
        assert refs.entries == ()

    def test_top_k_and_tie_order(self):
        topo = create_root(SimImage.make({"a0": "v0"}).to_ref(), "set a0=v1")
        outs = [SimImage.make({"a0": f"v{i}"}).to_ref() for i in range(1, 6)]
        for i, out in enumerate(outs):
            append_state(topo, 0, f"t{i}", out)
        parent = 1
        cfg = derive_config(3, "main", top_k=3)
        refs = retrieve_references(topo, parent, cfg, constant_scorer(0.2))
        # all tie at 80; smaller ids win; ancestor (the parent itself) excluded
        assert [e.state_id for e in refs.entries] == [2, 3, 4]

    def test_zero_range_short_circuits(self):
        topo, a, b, c = self.build()
        cfg = derive_config(3, "tree_only")

        class Exploding:
            def distances(self, a, b):
                raise AssertionError("must not be called")

        refs = retrieve_references(topo, c, cfg, Exploding())
        assert refs == ReferenceSet(entries=())

    def test_failed_candidate_dropped_and_logged(self):
        topo, a, b, c = self.build()
        cfg = derive_config(3, "main")
        table = {topo.state(b).input.locator: ScorerUnavailable("down")}
        dropped = []
        refs = retrieve_references(
            topo, c, cfg, TableScorer(table), log=lambda kind, payload: dropped.append((kind, payload))
        )
        assert refs.entries == ()
        assert dropped == [("candidate_dropped", {"state_id": b, "error": "down"})]

    def test_pairs_view(self):
        topo, a, b, c = self.build()
        cfg = derive_config(3, "main")
        table = {topo.state(b).input.locator: 0.0}
        refs = retrieve_references(topo, c, cfg, TableScorer(table))
        assert refs.pairs() == [("tb", 100)]
        assert len(refs) == 1
