"""
Tests for EntityGrid-QA generation, persistence and position-robustness scoring.
"""
import numpy as np
import pytest

from hireslab.models.benchmark import CENTER_POSITIONS, EDGE_POSITIONS, OPTION_LABELS, TaskType
from hireslab.services.entity_catalog import CATALOG, catalog_for, position_centers
from hireslab.services.entitygrid_service import (
    CORPUS_FILE,
    build_report,
    derive_item_seed,
    discrepancy,
    evaluate,
    gen_qa,
    generate_corpus,
    load_corpus,
    load_item_image,
    load_predictions,
    make_item,
    oracle_predictions,
    regenerate_corpus,
    relative_position,
    write_predictions,
)
from hireslab.utils.errors import AmbiguousPositionError, EvaluationError, PreconditionError

R = 28


def _entity(entity_id):
    return next(entity for entity in CATALOG if entity.id == entity_id)


class TestQuestionGeneration:

    def test_relative_position(self):
        centers = {pl.position: pl for pl in position_centers(R)}
        assert relative_position(centers[4], centers[6]) == "left"
        assert relative_position(centers[6], centers[4]) == "right"
        assert relative_position(centers[2], centers[8]) == "above"
        assert relative_position(centers[8], centers[5]) == "below"

    def test_diagonal_is_ambiguous(self):
        centers = {pl.position: pl for pl in position_centers(R)}
        with pytest.raises(AmbiguousPositionError):
            relative_position(centers[1], centers[5])

    def test_counting_single_instance(self):
        rng = np.random.default_rng(0)
        item = gen_qa(
            TaskType.COUNTING, [_entity("shape-blue-circle")], [3], rng, R, "counting-3-0000", 0, catalog_for(R)
        )
        assert item.answer_text == "1"
        assert item.probe_position == 3
        assert [o.label for o in item.options] == list(OPTION_LABELS)

    def test_identification_answer_is_entity_label(self):
        rng = np.random.default_rng(5)
        entity = _entity("text-ox")
        item = gen_qa(TaskType.IDENTIFICATION, [entity], [7], rng, R, "identification-7-0000", 5, catalog_for(R))
        assert item.answer_text == "ox"
        assert len({o.text for o in item.options}) == 4

    def test_arity_checked(self):
        rng = np.random.default_rng(0)
        with pytest.raises(PreconditionError):
            gen_qa(TaskType.POSITION, [_entity("text-ox")], [1], rng, R, "x", 0, catalog_for(R))

    def test_make_item_probes_requested_position(self):
        for task in TaskType:
            item = make_item(task, 5, 0, R, seed=11)
            assert item.probe_position == 5
            assert item.entities[0].position == 5
            assert item.image_id == f"{task.value}-5-0000"

    def test_item_seeds_are_distinct(self):
        seeds = {derive_item_seed(0, TaskType.POSITION, p, i) for p in range(1, 10) for i in range(3)}
        assert len(seeds) == 27
        with pytest.raises(PreconditionError):
            derive_item_seed(-1, TaskType.POSITION, 1, 0)


class TestCorpus:

    def test_counts_and_manifest(self):
        corpus = generate_corpus(R, per_cell=1, seed=3, write_images=False)
        assert len(corpus.items) == 27
        assert corpus.manifest.counts == {"identification": 9, "position": 9, "counting": 9}
        assert all(item.image_path is None for item in corpus.items)

    def test_task_subset(self):
        corpus = generate_corpus(R, per_cell=2, seed=3, tasks=[TaskType.COUNTING], write_images=False)
        assert {item.task for item in corpus.items} == {TaskType.COUNTING}
        assert len(corpus.items) == 18

    def test_regeneration_is_byte_identical(self, tmp_path):
        first = generate_corpus(R, per_cell=1, seed=7, out_dir=tmp_path / "a")
        second = regenerate_corpus(first.manifest, out_dir=tmp_path / "b")
        assert (tmp_path / "a" / CORPUS_FILE).read_bytes() == (tmp_path / "b" / CORPUS_FILE).read_bytes()
        assert second.manifest == first.manifest
        for item in first.items:
            assert (tmp_path / "a" / item.image_path).read_bytes() == (tmp_path / "b" / item.image_path).read_bytes()

    def test_thread_count_does_not_change_output(self):
        one = generate_corpus(R, per_cell=1, seed=2, threads=1)
        many = generate_corpus(R, per_cell=1, seed=2, threads=4)
        assert one.manifest.corpus_sha256 == many.manifest.corpus_sha256

    def test_load_round_trip_and_images(self, tmp_path):
        corpus = generate_corpus(R, per_cell=1, seed=1, tasks=[TaskType.IDENTIFICATION], out_dir=tmp_path)
        loaded = load_corpus(tmp_path)
        assert loaded.items == corpus.items
        image = load_item_image(loaded.items[0], tmp_path)
        assert (image.height, image.width) == (2 * R, 2 * R)

    def test_missing_corpus(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_corpus(tmp_path)


class TestScoring:

    def test_discrepancy_example(self):
        d1, d2 = discrepancy(0.5819, 0.6624)
        assert d1 == pytest.approx(0.8784, abs=5e-4)
        assert abs(d2) == pytest.approx(0.1215, abs=5e-4)

    def test_property_second_discrepancy_is_first_minus_one(self):
        """Property: D2 == D1 - 1 for any positive center accuracy."""
        from hypothesis import given, strategies as st

        @given(
            edge=st.floats(min_value=0.0, max_value=1.0),
            center=st.floats(min_value=0.01, max_value=1.0),
        )
        def check_identity(edge, center):
            d1, d2 = discrepancy(edge, center)
            assert abs(d2 - (d1 - 1.0)) < 1e-12

        check_identity()

    def test_undefined_center(self):
        assert discrepancy(0.5, 0.0) == (None, None)
        assert discrepancy(0.5, None) == (None, None)

    def test_report_aggregates(self):
        per_position = {p: (0.5 if p in EDGE_POSITIONS else 1.0) for p in range(1, 10)}
        report = build_report(per_position)
        assert report.acc_edge == 0.5
        assert report.acc_center == 1.0
        assert report.D1 == 0.5
        assert report.D2 == -0.5
        assert report.acc_std == pytest.approx(np.std([0.5] * 5 + [1.0] * 4))

    def test_perfect_oracle(self):
        items = generate_corpus(R, per_cell=1, seed=0, write_images=False).items
        report = evaluate(oracle_predictions(items, "perfect"), items)
        assert report.D1 == 1.0
        assert report.D2 == 0.0
        assert all(acc == 1.0 for acc in report.per_position.values())

    def test_fragmented_oracle_is_exact_at_centers(self):
        items = generate_corpus(R, per_cell=1, seed=0, write_images=False).items
        report = evaluate(oracle_predictions(items, "fragmented", seed=4), items)
        assert all(report.per_position[p] == 1.0 for p in CENTER_POSITIONS)

    def test_missing_prediction(self):
        items = generate_corpus(R, per_cell=1, seed=0, tasks=[TaskType.COUNTING], write_images=False).items
        predictions = oracle_predictions(items, "perfect")
        predictions.pop(items[0].image_id)
        with pytest.raises(EvaluationError):
            evaluate(predictions, items)

    def test_unknown_oracle(self):
        with pytest.raises(PreconditionError):
            oracle_predictions([], "psychic")

    def test_predictions_file(self, tmp_path):
        path = write_predictions(tmp_path / "preds.jsonl", {"b": "A", "a": "C"})
        assert load_predictions(path) == {"a": "C", "b": "A"}
        path.write_text(path.read_text() + '{"image_id": "a", "option": "B"}\n')
        with pytest.raises(EvaluationError):
            load_predictions(path)
