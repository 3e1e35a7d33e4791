import numpy as np
import pytest

from logidp.mechanisms import MechanismKind, MechanismSpec
from logidp.mia import (
    AttackClassifier,
    AttackClassifierConfig,
    AttackRecord,
    attack_accuracy,
    build_attack_dataset,
    load_attack_records,
    membership_scores,
    records_accuracy,
    save_attack_records,
    train_attack_classifier,
)
from logidp.pipeline import TrainConfig, make_synthetic_dataset, pretrain_encoder, finetune_head, predict
from logidp.protection import ProtectedModel, protect_existing
from logidp.weights import WeightVector


def confident_record(rng, member, num_classes=4):
    # members: 0.9 on the true class; non-members: 0.2 (clear separation)
    label = np.zeros(num_classes)
    k = rng.integers(num_classes)
    label[k] = 1.0
    conf = 0.9 if member else 0.2
    out = np.full(num_classes, (1 - conf) / (num_classes - 1))
    out[k] = conf
    return AttackRecord(out, label, int(member))


@pytest.fixture(scope="module")
def separable_records():
    rng = np.random.default_rng(0)
    return [confident_record(rng, i % 2 == 0) for i in range(200)]


@pytest.fixture(scope="module")
def shadow_setup():
    full = make_synthetic_dataset(10, 60, 32, 1.0, 42)
    pre = full.subset(range(0, 300))
    vic_in = full.subset(range(300, 350))
    vic_out = full.subset(range(350, 400))
    sh_in = full.subset(range(400, 450))
    sh_out = full.subset(range(450, 500))
    theta = pretrain_encoder(
        pre, TrainConfig(hidden_dims=(16,), epochs=200, learning_rate=0.1, init_scale=0.05, seed=101)
    )
    omega_victim = finetune_head(theta, vic_in, TrainConfig(epochs=3000, learning_rate=0.5, seed=5))
    omega_shadow = finetune_head(theta, sh_in, TrainConfig(epochs=3000, learning_rate=0.5, seed=6))
    return theta, omega_victim, omega_shadow, vic_in, vic_out, sh_in, sh_out


class TestAttackRecord:
    def test_output_must_sum_to_one(self):
        with pytest.raises(ValueError):
            AttackRecord(np.array([0.5, 0.4]), np.array([1.0, 0.0]), 1)

    def test_label_must_be_one_hot(self):
        with pytest.raises(ValueError):
            AttackRecord(np.array([0.5, 0.5]), np.array([0.5, 0.5]), 1)
        with pytest.raises(ValueError):
            AttackRecord(np.array([0.5, 0.5]), np.array([0.0, 0.0]), 1)

    def test_membership_is_a_bit(self):
        with pytest.raises(ValueError):
            AttackRecord(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 2)

    def test_unknown_source_rejected(self):
        with pytest.raises(ValueError):
            AttackRecord(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 1, source="other")

    def test_arrays_read_only(self):
        r = AttackRecord(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 0)
        with pytest.raises(ValueError):
            r.output_vector[0] = 0.9


class TestBuildAttackDataset:
    def test_two_pairs_gives_one_of_each(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        records = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 2, 7)
        assert sorted(r.membership for r in records) == [0, 1]

    def test_balance_invariant(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        records = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 60, 7)
        assert sum(r.membership for r in records) == 30
        assert len(records) == 60

    def test_same_seed_identical(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        a = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 40, 9)
        b = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 40, 9)
        assert all(
            np.array_equal(x.output_vector, y.output_vector) and x.membership == y.membership
            for x, y in zip(a, b)
        )

    def test_different_seed_differs(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        a = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 40, 9)
        b = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 40, 10)
        assert any(
            not np.array_equal(x.output_vector, y.output_vector) for x, y in zip(a, b)
        )

    def test_without_replacement_uses_each_record_once(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        records = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 2 * len(sh_in), 3)
        members = [r for r in records if r.membership == 1]
        outs = {tuple(np.round(r.output_vector, 12)) for r in members}
        assert len(outs) == len(sh_in)

    def test_insufficient_records_error(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        with pytest.raises(ValueError):
            build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 2 * len(sh_in) + 2, 3)

    def test_odd_pairs_error(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        with pytest.raises(ValueError):
            build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 3, 3)

    def test_records_are_shadow_tagged(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        records = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 10, 3)
        assert all(r.source == "shadow" for r in records)

    def test_outputs_come_from_the_shadow_model(self, shadow_setup):
        theta, _, omega_shadow, _, _, sh_in, sh_out = shadow_setup
        records = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 2 * len(sh_in), 3)
        member_outs = {tuple(np.round(r.output_vector, 10)) for r in records if r.membership}
        expect = {
            tuple(np.round(predict(theta, omega_shadow, x), 10)) for x in sh_in.features
        }
        assert member_outs == expect


class TestTrainAttackClassifier:
    def test_separable_records_reach_perfect_training_accuracy(self, separable_records):
        cfg = AttackClassifierConfig(epochs=1500, seed=7)
        clf = train_attack_classifier(separable_records, cfg)
        assert records_accuracy(clf, separable_records) == 1.0

    def test_zero_epochs_leaves_seeded_initialization(self, separable_records):
        cfg = AttackClassifierConfig(epochs=0, seed=21)
        a = train_attack_classifier(separable_records, cfg)
        b = train_attack_classifier(separable_records[:10], cfg)
        # training data cannot matter at zero epochs
        assert all(
            np.array_equal(wa, wb) and np.array_equal(ba, bb)
            for (wa, ba), (wb, bb) in zip(a.layers, b.layers)
        )

    def test_deterministic_given_seed(self, separable_records):
        cfg = AttackClassifierConfig(epochs=50, seed=3)
        a = train_attack_classifier(separable_records, cfg)
        b = train_attack_classifier(separable_records, cfg)
        assert all(
            np.array_equal(wa, wb) and np.array_equal(ba, bb)
            for (wa, ba), (wb, bb) in zip(a.layers, b.layers)
        )

    def test_permuted_memberships_score_at_chance_on_held_out(self):
        # memberships reassigned by coin flip: no signal to learn
        rng = np.random.default_rng(3)
        base = [confident_record(rng, i % 2 == 0) for i in range(800)]
        perm = rng.permutation(800)
        shuffled = [
            AttackRecord(base[i].output_vector, base[i].label_onehot, int(j % 2 == 0))
            for j, i in enumerate(perm)
        ]
        train, held = shuffled[:400], shuffled[400:]
        clf = train_attack_classifier(train, AttackClassifierConfig(epochs=600, seed=11))
        assert abs(records_accuracy(clf, held) - 0.5) <= 0.05

    def test_single_class_error(self, separable_records):
        members = [r for r in separable_records if r.membership == 1]
        with pytest.raises(ValueError):
            train_attack_classifier(members, AttackClassifierConfig(epochs=1, seed=0))

    def test_empty_error(self):
        with pytest.raises(ValueError):
            train_attack_classifier([], AttackClassifierConfig(epochs=1, seed=0))

    def test_victim_records_rejected(self, separable_records):
        tainted = separable_records[:-1] + [
            AttackRecord(
                separable_records[-1].output_vector,
                separable_records[-1].label_onehot,
                separable_records[-1].membership,
                source="victim",
            )
        ]
        with pytest.raises(ValueError):
            train_attack_classifier(tainted, AttackClassifierConfig(epochs=1, seed=0))

    def test_architecture_matches_config(self, separable_records):
        cfg = AttackClassifierConfig(epochs=0, seed=1, hidden_layers=3, hidden_width=16)
        clf = train_attack_classifier(separable_records, cfg)
        shapes = [w.shape for w, _ in clf.layers]
        assert shapes == [(8, 16), (16, 16), (16, 16), (16, 1)]


def constant_classifier(num_classes: int, logit: float) -> AttackClassifier:
    width = 4
    layers = [
        (np.zeros((2 * num_classes, width)), np.zeros(width)),
        (np.zeros((width, 1)), np.full(1, logit)),
    ]
    return AttackClassifier(tuple(layers), num_classes)


class TestAttackAccuracy:
    def test_constant_predictor_scores_half_on_balanced_sets(self, shadow_setup):
        theta, omega_victim, *_ , vic_in, vic_out, _, _ = (
            shadow_setup[0], shadow_setup[1], shadow_setup[2],
            shadow_setup[3], shadow_setup[4], shadow_setup[5], shadow_setup[6],
        )
        victim = protect_existing(theta, omega_victim, MechanismSpec(MechanismKind.LOGISTIC, 1.0), 9)
        clf = constant_classifier(vic_in.num_classes, 1e-6)
        acc = attack_accuracy(clf, victim, vic_in, vic_out, 0, 5)
        assert acc == 0.5

    def test_empty_sets_error(self, shadow_setup):
        theta, omega_victim, _, vic_in, *_ = shadow_setup
        victim = protect_existing(theta, omega_victim, MechanismSpec(MechanismKind.LOGISTIC, 1.0), 9)
        clf = constant_classifier(vic_in.num_classes, 1e-6)
        empty = vic_in.subset([])
        with pytest.raises(ValueError):
            attack_accuracy(clf, victim, empty, vic_in, 0, 5)
        with pytest.raises(ValueError):
            attack_accuracy(clf, victim, vic_in, empty, 0, 5)

    def test_overfit_victim_leaks_membership(self, shadow_setup):
        theta, omega_victim, omega_shadow, vic_in, vic_out, sh_in, sh_out = shadow_setup
        # confidence gap precondition: members are held with much higher
        # true-class probability than fresh records
        from logidp.pipeline import encode, predict_from_representations

        def true_class_prob(ds):
            p = predict_from_representations(omega_victim, encode(theta, ds.features))
            return float(p[np.arange(len(ds)), ds.labels].mean())

        gap = true_class_prob(vic_in) - true_class_prob(vic_out)
        assert gap > 0.2

        records = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 100, 77)
        clf = train_attack_classifier(
            records, AttackClassifierConfig(epochs=2000, seed=7, learning_rate=0.01)
        )
        victim = protect_existing(theta, omega_victim, MechanismSpec(MechanismKind.LOGISTIC, 1.0), 9)
        acc = attack_accuracy(clf, victim, vic_in.subset(range(25)), vic_out.subset(range(25)), 0, 1)
        assert acc > 0.55

    def test_protected_path_ignores_clean_head(self, shadow_setup):
        theta, omega_victim, _, vic_in, vic_out, *_ = shadow_setup
        base = protect_existing(theta, omega_victim, MechanismSpec(MechanismKind.LOGISTIC, 1.0), 9)
        sabotaged = ProtectedModel(
            theta,
            WeightVector(np.full(len(omega_victim), np.nan), omega_victim.shape_tag),
            base.omega_noisy,
            base.spec,
            base.noise_seed,
        )
        clf = constant_classifier(vic_in.num_classes, 1e-6)
        acc = attack_accuracy(clf, sabotaged, vic_in, vic_out, 1, 5)
        assert np.isfinite(acc)

    def test_deterministic_given_seed(self, shadow_setup):
        theta, omega_victim, omega_shadow, vic_in, vic_out, sh_in, sh_out = shadow_setup
        records = build_attack_dataset(theta, omega_shadow, sh_in, sh_out, 60, 4)
        clf = train_attack_classifier(records, AttackClassifierConfig(epochs=200, seed=8))
        victim = protect_existing(theta, omega_victim, MechanismSpec(MechanismKind.LOGISTIC, 0.2), 9)
        a = attack_accuracy(clf, victim, vic_in, vic_out, 1, 5)
        b = attack_accuracy(clf, victim, vic_in, vic_out, 1, 5)
        assert a == b

    def test_unequal_sets_are_subsampled_to_balance(self, shadow_setup):
        theta, omega_victim, _, vic_in, vic_out, *_ = shadow_setup
        victim = protect_existing(theta, omega_victim, MechanismSpec(MechanismKind.LOGISTIC, 1.0), 9)
        clf = constant_classifier(vic_in.num_classes, 1e-6)
        acc = attack_accuracy(clf, victim, vic_in.subset(range(10)), vic_out, 0, 5)
        assert acc == 0.5


class TestScores:
    def test_scores_lie_in_unit_interval(self, separable_records):
        clf = train_attack_classifier(separable_records, AttackClassifierConfig(epochs=100, seed=2))
        scores = membership_scores(clf, separable_records)
        assert np.all((scores > 0) & (scores < 1))

    def test_width_mismatch_rejected(self, separable_records):
        clf = train_attack_classifier(separable_records, AttackClassifierConfig(epochs=1, seed=2))
        bad = AttackRecord(np.full(6, 1 / 6), np.eye(6)[0], 1)
        with pytest.raises(ValueError):
            membership_scores(clf, [bad])


class TestCsvRoundTrip:
    def test_round_trip_preserves_everything(self, separable_records, tmp_path):
        path = tmp_path / "records.csv"
        save_attack_records(separable_records, path)
        loaded = load_attack_records(path)
        assert len(loaded) == len(separable_records)
        for a, b in zip(separable_records, loaded):
            assert np.array_equal(a.output_vector, b.output_vector)
            assert np.array_equal(a.label_onehot, b.label_onehot)
            assert a.membership == b.membership
        assert all(r.source == "shadow" for r in loaded)

    def test_header_shape(self, separable_records, tmp_path):
        path = tmp_path / "records.csv"
        save_attack_records(separable_records[:4], path)
        header = path.read_text().splitlines()[0].split(",")
        assert header == [
            "out_0", "out_1", "out_2", "out_3",
            "label_0", "label_1", "label_2", "label_3",
            "membership",
        ]

    def test_loaded_victim_source_is_rejected_by_trainer(self, separable_records, tmp_path):
        path = tmp_path / "records.csv"
        save_attack_records(separable_records, path)
        loaded = load_attack_records(path, source="victim")
        with pytest.raises(ValueError):
            train_attack_classifier(loaded, AttackClassifierConfig(epochs=1, seed=0))

    def test_empty_record_list_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_attack_records([], tmp_path / "none.csv")
