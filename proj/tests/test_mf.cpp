#include <cmath>
#include <unordered_set>

#include "doctest.h"
#include "unrec/errors.hpp"
#include "unrec/mf.hpp"
#include "unrec/rng.hpp"
#include "unrec/synthetic.hpp"

using namespace unrec;

namespace {

SplitDataset toy_split(int n_users, int n_items, std::uint64_t seed, int min_inter = 5,
                       int max_inter = 8) {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = n_users, .n_items = n_items, .n_clusters = 2, .sensitive_fraction = 0.0,
         .main_interactions_min = min_inter, .main_interactions_max = max_inter},
        seed);
    return temporal_leave_one_out(log);
}

// Two-item split where user 0 interacts only with item 0.
SplitDataset separable_split() {
    auto vocab = std::make_shared<CorpusVocab>();
    vocab->users.intern("u0");
    vocab->items.intern("liked");
    vocab->items.intern("other");
    InteractionLog train;
    train.vocab = vocab;
    for (int t = 0; t < 3; ++t)
        train.interactions.push_back(Interaction{0, 0, t, -1, -1});
    SplitDataset split;
    split.train = train;
    split.validation.vocab = split.test.vocab = vocab;
    return split;
}

}  // namespace

TEST_CASE("bpr separates a liked item from an untouched one") {
    MfHyper hyper{.d = 4, .reg = 1e-4, .lr = 0.1, .epochs = 200, .negatives_per_positive = 1};
    const MfModel model = train_mf_bpr(separable_split(), hyper, 7);
    CHECK(model.score(0, 0) > model.score(0, 1));
}

TEST_CASE("epoch-averaged loss decreases on a toy set") {
    const SplitDataset split = toy_split(20, 30, 3);
    MfHyper hyper{.d = 8, .reg = 1e-4, .lr = 0.05, .epochs = 30, .negatives_per_positive = 1};
    TrainDiagnostics diag;
    train_mf_bpr(split, hyper, 5, &diag);
    REQUIRE(diag.epoch_loss.size() == 30);
    CHECK(diag.epoch_loss.back() < diag.epoch_loss.front());
    // SGD jitters epoch to epoch; five-epoch window means must fall strictly.
    std::vector<double> windows;
    for (std::size_t w = 0; w + 5 <= diag.epoch_loss.size(); w += 5) {
        double acc = 0.0;
        for (std::size_t e = w; e < w + 5; ++e) acc += diag.epoch_loss[e];
        windows.push_back(acc / 5.0);
    }
    for (std::size_t w = 1; w < windows.size(); ++w) CHECK(windows[w] < windows[w - 1]);
}

TEST_CASE("training is bit-deterministic in the seed") {
    const SplitDataset split = toy_split(15, 25, 4);
    MfHyper hyper{.d = 6, .reg = 1e-4, .lr = 0.05, .epochs = 5, .negatives_per_positive = 1};
    const MfModel a = train_mf_bpr(split, hyper, 42);
    const MfModel b = train_mf_bpr(split, hyper, 42);
    CHECK(a.params() == b.params());
    const MfModel c = train_mf_bpr(split, hyper, 43);
    CHECK(a.params() != c.params());
}

TEST_CASE("analytic bpr gradient passes the central-difference check") {
    const SplitDataset split = toy_split(10, 15, 6);
    MfHyper hyper{.d = 3, .reg = 1e-3, .lr = 0.05, .epochs = 3, .negatives_per_positive = 1};
    const MfModel model = train_mf_bpr(split, hyper, 9);

    std::vector<BprSample> samples = {{0, 1, 2}, {1, 0, 3}, {2, 4, 1}};
    const SubsetSelector all = SubsetSelector::all();
    const ParamVector grad = mf_gradient(model, samples, all);

    auto loss = [&](const ParamVector& theta) {
        double acc = 0.0;
        for (const auto& s : samples) acc += bpr_loss_at(theta.values, model, s);
        return acc / static_cast<double>(samples.size());
    };
    const ParamVector theta(model.layout(), model.params());
    CHECK(finite_diff_gradient_check(loss, theta, grad, 1e-5) < 1e-4);
}

TEST_CASE("gradients of samples touching one user live in that user's row") {
    const SplitDataset split = toy_split(10, 15, 8);
    MfHyper hyper{.d = 3, .reg = 1e-3, .lr = 0.05, .epochs = 2, .negatives_per_positive = 1};
    const MfModel model = train_mf_bpr(split, hyper, 10);

    std::vector<BprSample> samples = {{4, 1, 2}, {4, 3, 7}};
    SubsetSelector users_only;
    users_only.all_user_rows = true;
    const ParamVector grad = mf_gradient(model, samples, users_only);

    const auto& seg = model.layout()->at("user_embeddings");
    for (std::size_t i = seg.offset; i < seg.offset + seg.size; ++i) {
        const bool in_row4 = i >= model.user_offset(4) &&
                             i < model.user_offset(4) + static_cast<std::size_t>(hyper.d);
        if (!in_row4) CHECK(grad[i] == 0.0);
    }
    double row4 = 0.0;
    for (int k = 0; k < hyper.d; ++k) row4 += std::abs(grad[model.user_offset(4) + static_cast<std::size_t>(k)]);
    CHECK(row4 > 0.0);
}

TEST_CASE("duplicating all samples leaves the mean gradient unchanged") {
    const SplitDataset split = toy_split(10, 15, 12);
    MfHyper hyper{.d = 3, .reg = 1e-3, .lr = 0.05, .epochs = 2, .negatives_per_positive = 1};
    const MfModel model = train_mf_bpr(split, hyper, 11);

    std::vector<BprSample> samples = {{0, 1, 2}, {1, 0, 3}};
    std::vector<BprSample> doubled = samples;
    doubled.insert(doubled.end(), samples.begin(), samples.end());
    const SubsetSelector all = SubsetSelector::all();
    const ParamVector a = mf_gradient(model, samples, all);
    const ParamVector b = mf_gradient(model, doubled, all);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("hvp oracle is linear and symmetric and maps zero to zero") {
    const SplitDataset split = toy_split(8, 12, 14);
    MfHyper hyper{.d = 2, .reg = 1e-3, .lr = 0.05, .epochs = 2, .negatives_per_positive = 1};
    const MfModel model = train_mf_bpr(split, hyper, 13);

    std::vector<BprSample> samples = {{0, 1, 2}, {1, 3, 0}, {2, 2, 4}};
    const SubsetSelector all = SubsetSelector::all();
    const HvpOracle oracle = mf_hvp_oracle(model, samples, all, 0.05);

    const std::size_t n = model.layout()->total();
    ParamVector zero(model.layout(), std::vector<double>(n, 0.0));
    const ParamVector hz = oracle.apply(zero);
    CHECK(norm2(hz) == 0.0);

    RngStream rng(21);
    ParamVector v(model.layout(), std::vector<double>(n));
    ParamVector w(model.layout(), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        v.values[i] = rng.normal(0.0, 1.0);
        w.values[i] = rng.normal(0.0, 1.0);
    }
    const ParamVector hv = oracle.apply(v);
    const ParamVector hw = oracle.apply(w);
    const double sym_gap = std::abs(dot(hv, w) - dot(v, hw));
    CHECK(sym_gap <= 1e-5 * std::max(1.0, std::abs(dot(hv, w))));

    // H(av + bw) = a Hv + b Hw
    const double a = 0.7, b = -1.3;
    ParamVector combo(model.layout(), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) combo.values[i] = a * v.values[i] + b * w.values[i];
    const ParamVector hcombo = oracle.apply(combo);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double expect = a * hv.values[i] + b * hw.values[i];
        num += (hcombo.values[i] - expect) * (hcombo.values[i] - expect);
        den += expect * expect;
    }
    CHECK(std::sqrt(num) <= 1e-5 * std::max(1.0, std::sqrt(den)));
}

TEST_CASE("hvp on a single-sample d=2 model matches the finite-difference Hessian block") {
    // Hand-derived check: H columns assembled one coordinate at a time from
    // the analytic gradient must agree with the oracle's action.
    const SplitDataset split = toy_split(4, 6, 15);
    MfHyper hyper{.d = 2, .reg = 1e-3, .lr = 0.05, .epochs = 1, .negatives_per_positive = 1};
    const MfModel model = train_mf_bpr(split, hyper, 17);

    std::vector<BprSample> samples = {{1, 2, 3}};
    const SubsetSelector all = SubsetSelector::all();
    const HvpOracle oracle = mf_hvp_oracle(model, samples, all, 0.0);
    const std::size_t n = model.layout()->total();

    const std::size_t probe_coord = model.user_offset(1);  // a touched coordinate
    ParamVector e(model.layout(), std::vector<double>(n, 0.0));
    e.values[probe_coord] = 1.0;
    const ParamVector h_col = oracle.apply(e);

    const double eps = 1e-5;
    std::vector<double> plus = model.params(), minus = model.params();
    plus[probe_coord] += eps;
    minus[probe_coord] -= eps;
    std::vector<double> weights = {1.0};
    const ParamVector gp = mf_weighted_gradient_at(model, plus, samples, weights, all);
    const ParamVector gm = mf_weighted_gradient_at(model, minus, samples, weights, all);
    for (std::size_t i = 0; i < n; ++i) {
        const double fd = (gp.values[i] - gm.values[i]) / (2.0 * eps);
        CHECK(h_col.values[i] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
}

TEST_CASE("recommend_topk sorts by score with index tie-breaks") {
    // Hand-built model: scores via bias only.
    MfModel model(1, 3, MfHyper{.d = 1, .reg = 0, .lr = 0, .epochs = 0}, 1);
    std::fill(model.params().begin(), model.params().end(), 0.0);
    model.item_bias(0) = 3.0;  // A
    model.item_bias(1) = 1.0;  // B
    model.item_bias(2) = 2.0;  // C

    const TopK top = recommend_topk(model, 0, 2, {});
    CHECK(top.items == std::vector<std::int32_t>{0, 2});
    CHECK_FALSE(top.truncated);

    const TopK excl = recommend_topk(model, 0, 2, {0});
    CHECK(excl.items == std::vector<std::int32_t>{2, 1});

    const TopK flagged = recommend_topk(model, 0, 5, {});
    CHECK(flagged.items.size() == 3);
    CHECK(flagged.truncated);
}

TEST_CASE("recommend_topk agrees with a full argsort oracle") {
    const SplitDataset split = toy_split(12, 20, 19);
    MfHyper hyper{.d = 4, .reg = 1e-4, .lr = 0.05, .epochs = 10, .negatives_per_positive = 1};
    const MfModel model = train_mf_bpr(split, hyper, 23);

    for (std::int32_t u = 0; u < model.n_users(); ++u) {
        std::vector<double> scores(static_cast<std::size_t>(model.n_items()));
        model.score_all(u, scores);
        std::vector<std::int32_t> order(scores.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
        std::sort(order.begin(), order.end(), [&scores](std::int32_t a, std::int32_t b) {
            if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
                return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
            return a < b;
        });
        order.resize(5);
        const TopK top = recommend_topk(model, u, 5, {});
        CHECK(top.items == order);
    }
}

TEST_CASE("score is bilinear: doubling U and halving V preserves the dot term") {
    MfModel model(1, 1, MfHyper{.d = 2, .reg = 0, .lr = 0, .epochs = 0}, 3);
    auto u = model.user_row(0);
    auto v = model.item_row(0);
    u[0] = 0.5;
    u[1] = -1.0;
    v[0] = 2.0;
    v[1] = 0.25;
    model.item_bias(0) = 0.125;
    const double before = model.score(0, 0);
    for (int k = 0; k < 2; ++k) {
        u[k] *= 2.0;
        v[k] *= 0.5;
    }
    CHECK(model.score(0, 0) == doctest::Approx(before).epsilon(1e-12));
}
