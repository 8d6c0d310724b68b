import numpy as np
import pytest
from helpers import SLIM_BLOCKS, SLIM_CHANNELS, portrait
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from p3m.core import generate_trimap
from p3m.estimator import P3MMatting, TrimapTransformer


def slim_estimator(**kw):
    params = dict(channels=SLIM_CHANNELS, blocks=SLIM_BLOCKS, crop_sizes=(64,),
                  target_size=64, batch_size=2, max_steps=3, lr=1e-4, dilation_radius=3)
    params.update(kw)
    return P3MMatting(**params)


def data(n=2):
    pairs = [portrait(i, 64)[:2] for i in range(n)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def test_params_and_clone():
    est = slim_estimator(seed=4)
    params = est.get_params()
    assert params["seed"] == 4 and params["lambda_m"] == 2.0
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(lr=0.5)
    assert est.lr == 0.5


def test_predict_before_fit_raises():
    with pytest.raises(NotFittedError):
        slim_estimator().predict(data(1)[0])


def test_fit_predict_score(tmp_path):
    X, y = data()
    est = slim_estimator(work_dir=str(tmp_path)).fit(X, y)
    assert est.checkpoint_path_.exists() and est.n_train_ == 2
    preds = est.predict(X)
    assert len(preds) == 2 and preds[0].shape == (64, 64)
    seg = est.predict_segmentation(X[:1])[0]
    assert set(np.unique(seg)) <= {0, 128, 255}
    assert est.score(X, y) <= 0


def test_fit_without_work_dir_is_repeatable():
    X, y = data()
    a = slim_estimator().fit(X, y).predict(X[:1])[0]
    b = slim_estimator().fit(X, y).predict(X[:1])[0]
    np.testing.assert_array_equal(a, b)


def test_init_model_gives_untrained_predictions():
    X, _ = data(1)
    est = slim_estimator().init_model()
    assert est.predict(X)[0].shape == (64, 64)


def test_trimap_transformer():
    _, y = data(2)
    labels = TrimapTransformer(dilation_radius=2).fit_transform(y)
    np.testing.assert_array_equal(labels[1], generate_trimap(y[1], 2).labels)
    with pytest.raises(ValueError):
        TrimapTransformer(dilation_radius=-1).fit(y)
