#include "unrec/mf.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "unrec/errors.hpp"
#include "unrec/rng.hpp"

namespace unrec {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

MfModel::MfModel(std::int32_t n_users, std::int32_t n_items, MfHyper hyper, std::uint64_t seed)
    : n_users_(n_users), n_items_(n_items), hyper_(hyper), seed_(seed) {
    if (n_users <= 0 || n_items <= 0) throw ShapeError("MfModel: empty vocabulary");
    if (hyper_.d < 1) throw ShapeError("MfModel: d must be >= 1");
    auto layout = SegmentLayout::build({
        {"user_embeddings", {n_users, hyper_.d}},
        {"item_embeddings", {n_items, hyper_.d}},
        {"item_bias", {n_items}},
    });
    layout_ = std::make_shared<const SegmentLayout>(std::move(layout));
    params_.assign(layout_->total(), 0.0);

    RngStream init = RngStream(seed).substream("mf-init");
    const std::size_t emb = static_cast<std::size_t>(n_users + n_items) *
                            static_cast<std::size_t>(hyper_.d);
    for (std::size_t i = 0; i < emb; ++i) params_[i] = init.normal(0.0, 0.1);
    // item_bias starts at zero
}

std::size_t MfModel::user_offset(std::int32_t u) const {
    return static_cast<std::size_t>(u) * static_cast<std::size_t>(hyper_.d);
}
std::size_t MfModel::item_offset(std::int32_t i) const {
    return layout_->at("item_embeddings").offset +
           static_cast<std::size_t>(i) * static_cast<std::size_t>(hyper_.d);
}
std::size_t MfModel::bias_offset(std::int32_t i) const {
    return layout_->at("item_bias").offset + static_cast<std::size_t>(i);
}

std::span<double> MfModel::user_row(std::int32_t u) {
    return {params_.data() + user_offset(u), static_cast<std::size_t>(hyper_.d)};
}
std::span<const double> MfModel::user_row(std::int32_t u) const {
    return {params_.data() + user_offset(u), static_cast<std::size_t>(hyper_.d)};
}
std::span<double> MfModel::item_row(std::int32_t i) {
    return {params_.data() + item_offset(i), static_cast<std::size_t>(hyper_.d)};
}
std::span<const double> MfModel::item_row(std::int32_t i) const {
    return {params_.data() + item_offset(i), static_cast<std::size_t>(hyper_.d)};
}
double& MfModel::item_bias(std::int32_t i) { return params_[bias_offset(i)]; }
double MfModel::item_bias(std::int32_t i) const { return params_[bias_offset(i)]; }

double MfModel::score(std::int32_t user, std::int32_t item) const {
    const auto u = user_row(user);
    const auto v = item_row(item);
    double s = item_bias(item);
    for (int k = 0; k < hyper_.d; ++k) s += u[k] * v[k];
    return s;
}

void MfModel::score_all(std::int32_t user, std::span<double> out) const {
    if (out.size() != static_cast<std::size_t>(n_items_))
        throw ShapeError("score_all: output size mismatch");
    for (std::int32_t i = 0; i < n_items_; ++i) out[static_cast<std::size_t>(i)] = score(user, i);
}

void Recommender::score_all(std::int32_t user, std::span<double> out) const {
    for (std::int32_t i = 0; i < n_items(); ++i) out[static_cast<std::size_t>(i)] = score(user, i);
}

TopK recommend_topk(const Recommender& model, std::int32_t user, int k,
                    const std::unordered_set<std::int32_t>& exclude) {
    if (k < 1) throw std::invalid_argument("recommend_topk: K must be >= 1");
    std::vector<double> scores(static_cast<std::size_t>(model.n_items()));
    model.score_all(user, scores);

    std::vector<std::int32_t> candidates;
    candidates.reserve(scores.size());
    for (std::int32_t i = 0; i < model.n_items(); ++i)
        if (!exclude.contains(i)) candidates.push_back(i);

    TopK out;
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
    out.truncated = take < static_cast<std::size_t>(k);
    auto cmp = [&scores](std::int32_t a, std::int32_t b) {
        const double sa = scores[static_cast<std::size_t>(a)];
        const double sb = scores[static_cast<std::size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), cmp);
    out.items.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
    return out;
}

std::vector<char> SubsetSelector::mask(const MfModel& model) const {
    std::vector<char> m(model.layout()->total(), 0);
    const int d = model.hyper().d;
    if (all_user_rows) {
        const auto& seg = model.layout()->at("user_embeddings");
        std::fill(m.begin() + static_cast<std::ptrdiff_t>(seg.offset),
                  m.begin() + static_cast<std::ptrdiff_t>(seg.offset + seg.size), 1);
    } else {
        for (std::int32_t u : user_rows) {
            const std::size_t off = model.user_offset(u);
            std::fill(m.begin() + static_cast<std::ptrdiff_t>(off),
                      m.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(d)), 1);
        }
    }
    if (item_table) {
        const auto& seg = model.layout()->at("item_embeddings");
        std::fill(m.begin() + static_cast<std::ptrdiff_t>(seg.offset),
                  m.begin() + static_cast<std::ptrdiff_t>(seg.offset + seg.size), 1);
    }
    if (item_bias) {
        const auto& seg = model.layout()->at("item_bias");
        std::fill(m.begin() + static_cast<std::ptrdiff_t>(seg.offset),
                  m.begin() + static_cast<std::ptrdiff_t>(seg.offset + seg.size), 1);
    }
    return m;
}

double bpr_loss_at(std::span<const double> params, const MfModel& shape, const BprSample& s) {
    const int d = shape.hyper().d;
    const double* u = params.data() + shape.user_offset(s.user);
    const double* vi = params.data() + shape.item_offset(s.pos);
    const double* vj = params.data() + shape.item_offset(s.neg);
    double x = params[shape.bias_offset(s.pos)] - params[shape.bias_offset(s.neg)];
    for (int k = 0; k < d; ++k) x += u[k] * (vi[k] - vj[k]);

    double reg_term = 0.0;
    for (int k = 0; k < d; ++k) reg_term += u[k] * u[k] + vi[k] * vi[k] + vj[k] * vj[k];

    // -ln sigma(x) computed stably: log(1 + exp(-x)).
    const double nll = x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
    return nll + shape.hyper().reg * reg_term;
}

void bpr_grad_accumulate(std::span<const double> params, const MfModel& shape, const BprSample& s,
                         double weight, std::span<double> grad) {
    const int d = shape.hyper().d;
    const double reg = shape.hyper().reg;
    const std::size_t uo = shape.user_offset(s.user);
    const std::size_t io = shape.item_offset(s.pos);
    const std::size_t jo = shape.item_offset(s.neg);
    const double* u = params.data() + uo;
    const double* vi = params.data() + io;
    const double* vj = params.data() + jo;

    double x = params[shape.bias_offset(s.pos)] - params[shape.bias_offset(s.neg)];
    for (int k = 0; k < d; ++k) x += u[k] * (vi[k] - vj[k]);
    const double e = sigmoid(-x);  // = 1 - sigma(x)

    for (int k = 0; k < d; ++k) {
        grad[uo + static_cast<std::size_t>(k)] += weight * (-e * (vi[k] - vj[k]) + 2.0 * reg * u[k]);
        grad[io + static_cast<std::size_t>(k)] += weight * (-e * u[k] + 2.0 * reg * vi[k]);
        grad[jo + static_cast<std::size_t>(k)] += weight * (e * u[k] + 2.0 * reg * vj[k]);
    }
    grad[shape.bias_offset(s.pos)] += weight * -e;
    grad[shape.bias_offset(s.neg)] += weight * e;
}

namespace {

void apply_mask(ParamVector& v, const std::vector<char>& mask) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!mask[i]) v.values[i] = 0.0;
}

}  // namespace

ParamVector mf_gradient(const MfModel& model, std::span<const BprSample> samples,
                        const SubsetSelector& subset) {
    if (samples.empty()) throw std::invalid_argument("mf_gradient: empty sample set");
    ParamVector g(model.layout(), std::vector<double>(model.layout()->total(), 0.0));
    const double w = 1.0 / static_cast<double>(samples.size());
    for (const auto& s : samples) bpr_grad_accumulate(model.params(), model, s, w, g.values);
    apply_mask(g, subset.mask(model));
    return g;
}

ParamVector mf_weighted_gradient_at(const MfModel& shape, std::span<const double> params,
                                    std::span<const BprSample> samples,
                                    std::span<const double> weights, const SubsetSelector& subset) {
    if (samples.size() != weights.size())
        throw ShapeError("mf_weighted_gradient_at: samples/weights mismatch");
    ParamVector g(shape.layout(), std::vector<double>(shape.layout()->total(), 0.0));
    for (std::size_t i = 0; i < samples.size(); ++i)
        bpr_grad_accumulate(params, shape, samples[i], weights[i], g.values);
    apply_mask(g, subset.mask(shape));
    return g;
}

HvpOracle mf_hvp_oracle(const MfModel& model, std::vector<BprSample> samples,
                        std::vector<double> weights, SubsetSelector subset, double damping) {
    if (samples.empty()) throw std::invalid_argument("mf_hvp_oracle: empty sample set");
    if (samples.size() != weights.size()) throw ShapeError("mf_hvp_oracle: samples/weights mismatch");

    ParamVector theta(model.layout(), model.params());
    const double eps = 1e-4 * (1.0 + norm_inf(theta));

    HvpOracle oracle;
    oracle.damping = damping;
    oracle.apply = [&model, samples = std::move(samples), weights = std::move(weights),
                    subset = std::move(subset), theta = std::move(theta), eps,
                    damping](const ParamVector& v) -> ParamVector {
        if (v.size() != theta.size()) throw ShapeError("hvp: vector size mismatch");
        ParamVector plus = theta;
        ParamVector minus = theta;
        axpy(eps, v, plus);
        axpy(-eps, v, minus);
        ParamVector gp = mf_weighted_gradient_at(model, plus.values, samples, weights, subset);
        ParamVector gm = mf_weighted_gradient_at(model, minus.values, samples, weights, subset);
        ParamVector out(v.layout ? v.layout : theta.layout,
                        std::vector<double>(v.size(), 0.0));
        for (std::size_t i = 0; i < v.size(); ++i)
            out.values[i] = (gp.values[i] - gm.values[i]) / (2.0 * eps) + damping * v.values[i];
        return out;
    };
    return oracle;
}

HvpOracle mf_hvp_oracle(const MfModel& model, std::vector<BprSample> samples,
                        const SubsetSelector& subset, double damping) {
    std::vector<double> weights(samples.size(), 1.0 / static_cast<double>(samples.size()));
    return mf_hvp_oracle(model, std::move(samples), std::move(weights), subset, damping);
}

MfModel train_mf_bpr(const SplitDataset& split, const MfHyper& hyper, std::uint64_t seed,
                     TrainDiagnostics* diagnostics) {
    const auto& train = split.train.interactions;
    if (train.empty()) throw EmptyInputError("train_mf_bpr: empty train split");
    const std::int32_t n_users = split.train.n_users();
    const std::int32_t n_items = split.train.n_items();

    MfModel model(n_users, n_items, hyper, seed);
    auto& params = model.params();
    const int d = hyper.d;
    const double lr = hyper.lr;
    const double reg = hyper.reg;

    std::vector<std::unordered_set<std::int32_t>> positives(static_cast<std::size_t>(n_users));
    for (const auto& it : train) positives[static_cast<std::size_t>(it.user)].insert(it.item);

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    RngStream root = RngStream(seed).substream("bpr-train");
    std::vector<double> u_old(static_cast<std::size_t>(d));

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        RngStream rng = root.substream("epoch", static_cast<std::uint64_t>(epoch));
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const std::size_t j = i + rng.uniform_int(order.size() - i);
            std::swap(order[i], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (const std::size_t idx : order) {
            const auto& it = train[idx];
            const auto& pos_set = positives[static_cast<std::size_t>(it.user)];
            if (static_cast<std::int32_t>(pos_set.size()) >= n_items) continue;
            for (int rep = 0; rep < hyper.negatives_per_positive; ++rep) {
                std::int32_t neg;
                do {
                    neg = static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(n_items)));
                } while (pos_set.contains(neg));

                BprSample s{it.user, it.item, neg};
                loss_sum += bpr_loss_at(params, model, s);
                ++loss_count;

                const std::size_t uo = model.user_offset(s.user);
                const std::size_t io = model.item_offset(s.pos);
                const std::size_t jo = model.item_offset(s.neg);
                double x = params[model.bias_offset(s.pos)] - params[model.bias_offset(s.neg)];
                for (int k = 0; k < d; ++k)
                    x += params[uo + static_cast<std::size_t>(k)] *
                         (params[io + static_cast<std::size_t>(k)] - params[jo + static_cast<std::size_t>(k)]);
                const double e = sigmoid(-x);

                for (int k = 0; k < d; ++k) u_old[static_cast<std::size_t>(k)] = params[uo + static_cast<std::size_t>(k)];
                for (int k = 0; k < d; ++k) {
                    const auto ks = static_cast<std::size_t>(k);
                    const double uk = u_old[ks];
                    const double vik = params[io + ks];
                    const double vjk = params[jo + ks];
                    params[uo + ks] += lr * (e * (vik - vjk) - 2.0 * reg * uk);
                    params[io + ks] += lr * (e * uk - 2.0 * reg * vik);
                    params[jo + ks] += lr * (-e * uk - 2.0 * reg * vjk);
                }
                params[model.bias_offset(s.pos)] += lr * e;
                params[model.bias_offset(s.neg)] -= lr * e;
            }
        }
        const double epoch_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
        if (!std::isfinite(epoch_loss))
            throw TrainingError("train_mf_bpr: loss diverged", epoch);
        if (diagnostics) diagnostics->epoch_loss.push_back(epoch_loss);
    }
    for (double p : params)
        if (!std::isfinite(p)) throw TrainingError("train_mf_bpr: non-finite parameters", hyper.epochs);
    return model;
}

}  // namespace unrec
