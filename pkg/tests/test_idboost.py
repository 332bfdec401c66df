import numpy as np
import pytest

from interdiv import dataset, gbt, idboost, losses, relevance
from interdiv.errors import InputError, UndefinedMetricError, ValidationError


@pytest.fixture(scope="module")
def trained():
    ds = dataset.synth_biased(300, seed=2)
    phi = relevance.from_boxplot(ds.targets)
    params = gbt.BoostParams(n_rounds=8, max_depth=3, l2_lambda=1e-6, seed=2)
    model = idboost.fit(ds, phi, params, w=0.5)
    return ds, phi, params, model


class TestFit:
    def test_w_one_equals_standalone_divergence_ensemble(self, trained):
        ds, phi, params, model = trained
        standalone = gbt.fit(ds, losses.IdLossObjective(ds, phi), params)
        m1 = idboost.IdBoostModel(model.id_ensemble, model.sera_ensemble, w=1.0)
        assert np.array_equal(m1.predict(ds.features), standalone.predict(ds.features))

    def test_w_zero_equals_standalone_sera_ensemble(self, trained):
        ds, phi, params, model = trained
        standalone = gbt.fit(ds, losses.SeraObjective(ds, phi), params)
        m0 = idboost.IdBoostModel(model.id_ensemble, model.sera_ensemble, w=0.0)
        assert np.array_equal(m0.predict(ds.features), standalone.predict(ds.features))

    def test_half_weight_mixes_elementwise(self, trained):
        ds, _, _, model = trained
        mixed = model.predict(ds.features)
        expected = 0.5 * model.id_ensemble.predict(ds.features) + 0.5 * (
            model.sera_ensemble.predict(ds.features)
        )
        assert np.allclose(mixed, expected, atol=1e-12)

    def test_records_both_traces(self, trained):
        _, _, params, model = trained
        assert len(model.id_ensemble.train_trace) == params.n_rounds + 1
        assert len(model.sera_ensemble.train_trace) == params.n_rounds + 1

    def test_invalid_weight_rejected(self, trained):
        ds, phi, params, _ = trained
        with pytest.raises(ValidationError):
            idboost.fit(ds, phi, params, w=1.2)

    def test_single_group_rejected(self):
        rng = np.random.default_rng(0)
        ds = dataset.from_arrays(
            rng.normal(size=(20, 2)), rng.normal(size=20), np.ones((20, 1), dtype=int)
        )
        phi = relevance.from_boxplot(ds.targets)
        with pytest.raises(UndefinedMetricError):
            idboost.fit(ds, phi, gbt.BoostParams(n_rounds=1), w=0.5)


class TestPredict:
    def test_constant_components_fixed_point(self):
        params = gbt.BoostParams(n_rounds=0)
        base = gbt.TreeEnsemble(3.0, [], params, "idloss", 2)
        other = gbt.TreeEnsemble(3.0, [], params, "sera", 2)
        for w in (0.0, 0.3, 1.0):
            model = idboost.IdBoostModel(base, other, w)
            assert np.allclose(model.predict(np.zeros((4, 2))), 3.0)

    def test_midpoint_of_two_and_four(self):
        params = gbt.BoostParams(n_rounds=0)
        a = gbt.TreeEnsemble(2.0, [], params, "idloss", 1)
        b = gbt.TreeEnsemble(4.0, [], params, "sera", 1)
        model = idboost.IdBoostModel(a, b, 0.5)
        assert np.allclose(model.predict(np.zeros((3, 1))), 3.0)

    def test_prediction_between_components(self, trained):
        ds, _, _, model = trained
        pa = model.id_ensemble.predict(ds.features)
        pb = model.sera_ensemble.predict(ds.features)
        lo, hi = np.minimum(pa, pb), np.maximum(pa, pb)
        for w in (0.0, 0.25, 0.5, 0.75, 1.0):
            p = idboost.IdBoostModel(model.id_ensemble, model.sera_ensemble, w).predict(
                ds.features
            )
            assert np.all(p >= lo - 1e-12) and np.all(p <= hi + 1e-12)

    def test_affine_in_w(self, trained):
        ds, _, _, model = trained
        X = ds.features
        ws = [0.0, 0.25, 0.5, 0.75, 1.0]
        preds = {
            w: idboost.IdBoostModel(model.id_ensemble, model.sera_ensemble, w).predict(X)
            for w in ws
        }
        p0, p1 = preds[0.0], preds[1.0]
        for w in ws:
            assert np.allclose(preds[w], w * p1 + (1 - w) * p0, atol=1e-10)

    def test_dimension_mismatch_rejected(self, trained):
        ds, _, _, model = trained
        with pytest.raises(InputError):
            model.predict(np.zeros((3, ds.features.shape[1] + 2)))

    def test_serialization_round_trip(self, tmp_path, trained):
        ds, _, _, model = trained
        path = tmp_path / "idboost.json"
        model.to_json(path)
        loaded = idboost.IdBoostModel.from_json(path)
        assert loaded.w == model.w
        assert np.array_equal(loaded.predict(ds.features), model.predict(ds.features))
