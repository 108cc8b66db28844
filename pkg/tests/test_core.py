import dataclasses

import numpy as np
import pytest

from wheelgen import core
from wheelgen.core import (
    ConceptGroup,
    FeedbackDelta,
    GenerationRecord,
    GenerationRequest,
    ImageStore,
    InspirationImage,
    SymmetryConfig,
    apply_feedback,
    quantize,
    validate_request,
)

from conftest import CANVAS, make_image, make_request


class TestValidateRequest:
    def test_empty_concepts_rejected(self):
        req = dataclasses.replace(make_request(), concepts=())
        assert "concepts: at least one required" in validate_request(req, CANVAS)

    def test_k_below_two_rejected(self):
        req = make_request(symmetry=SymmetryConfig(enabled=True, k=1))
        assert any("symmetry.k" in v for v in validate_request(req, CANVAS))

    def test_wellformed_paper_configuration(self):
        # two concepts, two images each, symmetry number 4
        req = GenerationRequest(
            concepts=(
                ConceptGroup("dynamic", inspirations=(
                    InspirationImage(image=make_image(1)),
                    InspirationImage(image=make_image(2)),
                )),
                ConceptGroup("bold", inspirations=(
                    InspirationImage(image=make_image(3)),
                    InspirationImage(image=make_image(4)),
                )),
            ),
            symmetry=SymmetryConfig(k=4),
            output_count=4,
            seed=11,
        )
        assert validate_request(req, CANVAS) == []

    def test_out_of_range_weight(self):
        bad = InspirationImage(image=make_image(5), weight=1.5)
        req = make_request(concepts=(ConceptGroup("x", inspirations=(bad,)),))
        assert any("weight" in v for v in validate_request(req, CANVAS))

    def test_crop_outside_image(self):
        bad = InspirationImage(image=make_image(5), crop=(60, 60, 10, 10))
        req = make_request(concepts=(ConceptGroup("x", inspirations=(bad,)),))
        assert any("crop" in v for v in validate_request(req, CANVAS))

    def test_group_limit_enforced_only_when_asked(self):
        req = make_request(concepts=tuple(ConceptGroup(f"k{i}") for i in range(4)))
        assert validate_request(req, CANVAS) == []
        assert any("at most 3" in v for v in validate_request(req, CANVAS, max_groups=3))

    def test_canvas_mismatch(self):
        req = make_request(sketch=make_image(9, size=32))
        assert any("canvas" in v for v in validate_request(req, CANVAS))

    def test_unknown_backend(self):
        req = make_request(backend_id="nope")
        assert any("backend_id" in v for v in validate_request(req, CANVAS, known_backends=["toy"]))


class TestApplyFeedback:
    def test_empty_delta_changes_only_seed(self):
        parent = make_request(seed=5)
        child = apply_feedback(parent, FeedbackDelta(seed=99))
        assert child.seed == 99
        assert child.concepts == parent.concepts
        assert child.symmetry == parent.symmetry

    def test_removing_only_image_leaves_keyword_group(self):
        insp = InspirationImage(image=make_image(1), id="only")
        parent = make_request(concepts=(ConceptGroup("dynamic", inspirations=(insp,)),))
        child = apply_feedback(parent, FeedbackDelta(removed_inspiration_ids=("only",), seed=1))
        assert child.concepts[0].keyword == "dynamic"
        assert child.concepts[0].inspirations == ()

    def test_weight_change_matches_manual_reconstruction(self):
        parent = make_request(seed=3)
        child = apply_feedback(parent, FeedbackDelta(weight_changes=(("insp-a", 0.0),), seed=3))
        # reconstruct by hand
        expect_groups = []
        for g in parent.concepts:
            insps = tuple(
                dataclasses.replace(i, weight=0.0) if i.id == "insp-a" else i
                for i in g.inspirations
            )
            expect_groups.append(dataclasses.replace(g, inspirations=insps))
        expected = dataclasses.replace(parent, concepts=tuple(expect_groups), seed=3)
        assert child == expected

    def test_unknown_id_raises(self):
        with pytest.raises(core.UnknownInspirationError):
            apply_feedback(make_request(), FeedbackDelta(removed_inspiration_ids=("ghost",)))

    def test_pure_given_pinned_seed(self):
        parent = make_request()
        delta = FeedbackDelta(weight_changes=(("insp-b", 0.25),), seed=8)
        assert apply_feedback(parent, delta) == apply_feedback(parent, delta)

    def test_parent_unmodified(self):
        parent = make_request()
        before = parent.concepts[0].inspirations[0].weight
        apply_feedback(parent, FeedbackDelta(weight_changes=(("insp-a", 0.1),), seed=0))
        assert parent.concepts[0].inspirations[0].weight == before

    def test_added_inspiration_under_new_keyword_opens_group(self):
        parent = make_request()
        new = InspirationImage(image=make_image(7), id="new1")
        child = apply_feedback(parent, FeedbackDelta(added_inspirations=(("sharp", new),), seed=0))
        assert child.concepts[-1].keyword == "sharp"
        assert child.concepts[-1].inspirations[0].id == "new1"

    def test_symmetry_change_applied(self):
        child = apply_feedback(
            make_request(),
            FeedbackDelta(symmetry_change=SymmetryConfig(k=6), seed=0),
        )
        assert child.symmetry.k == 6


class TestSerialization:
    def test_request_round_trip(self, tmp_path):
        store = ImageStore(str(tmp_path))
        req = make_request(
            sketch=quantize(make_image(10)),
            template=quantize(make_image(11)),
            concepts=(
                ConceptGroup("dynamic", inspirations=(
                    InspirationImage(image=quantize(make_image(1)), crop=(4, 4, 20, 20),
                                     weight=0.5, id="a"),
                ), group_weight=0.75),
            ),
        )
        back = core.request_from_json(core.request_to_json(req, store), store)
        assert back.seed == req.seed
        assert back.symmetry == req.symmetry
        assert back.concepts[0].keyword == "dynamic"
        assert back.concepts[0].inspirations[0].crop == (4, 4, 20, 20)
        np.testing.assert_array_equal(back.sketch, req.sketch)
        np.testing.assert_array_equal(
            back.concepts[0].inspirations[0].image, req.concepts[0].inspirations[0].image
        )

    def test_feedback_round_trip(self, tmp_path):
        store = ImageStore(str(tmp_path))
        delta = FeedbackDelta(
            added_inspirations=(("bold", InspirationImage(image=quantize(make_image(2)), id="n")),),
            removed_inspiration_ids=("x",),
            weight_changes=(("y", 0.5),),
            symmetry_change=SymmetryConfig(k=8, final_replication=False),
            note="rounder",
            seed=12,
        )
        back = core.feedback_from_json(core.feedback_to_json(delta, store), store)
        assert back.removed_inspiration_ids == ("x",)
        assert back.weight_changes == (("y", 0.5),)
        assert back.symmetry_change.k == 8
        assert back.seed == 12
        np.testing.assert_array_equal(
            back.added_inspirations[0][1].image, delta.added_inspirations[0][1].image
        )

    def test_record_round_trip(self, tmp_path):
        store = ImageStore(str(tmp_path))
        rec = GenerationRecord(
            id="abc",
            request=make_request(),
            outputs=(store.put(quantize(make_image(3))),),
            parent_id="parent",
            resolved_conditioning={"prompt": "p"},
        )
        back = core.record_from_json(core.record_to_json(rec, store), store)
        assert back.id == "abc"
        assert back.outputs == rec.outputs
        assert back.parent_id == "parent"
        assert back.resolved_conditioning == {"prompt": "p"}

    def test_png_round_trip_is_identity_on_quantized(self):
        img = quantize(make_image(0))
        np.testing.assert_array_equal(core.decode_png(core.encode_png(img)), img)


class TestInvariants:
    def test_keyword_normalized(self):
        assert ConceptGroup("  Dynamic ").keyword == "dynamic"

    def test_core_types_hashable_and_frozen(self):
        sym = SymmetryConfig()
        with pytest.raises(dataclasses.FrozenInstanceError):
            sym.k = 3
