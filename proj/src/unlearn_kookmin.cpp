#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "unrec/errors.hpp"
#include "unrec/unlearn.hpp"

namespace unrec {
namespace {

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    const auto dt = std::chrono::steady_clock::now() - t0;
    return std::max(std::chrono::duration<double>(dt).count(), 1e-9);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One BPR-SGD step with a per-coordinate learning-rate mask.
double sgd_step_masked(MfModel& model, const BprSample& s, double lr, double reduced_factor,
                       const std::vector<char>& reset_mask) {
    auto& params = model.params();
    const int d = model.hyper().d;
    const double reg = model.hyper().reg;
    const std::size_t uo = model.user_offset(s.user);
    const std::size_t io = model.item_offset(s.pos);
    const std::size_t jo = model.item_offset(s.neg);

    const double loss = bpr_loss_at(params, model, s);
    double x = params[model.bias_offset(s.pos)] - params[model.bias_offset(s.neg)];
    for (int k = 0; k < d; ++k)
        x += params[uo + static_cast<std::size_t>(k)] *
             (params[io + static_cast<std::size_t>(k)] - params[jo + static_cast<std::size_t>(k)]);
    const double e = sigmoid(-x);

    auto rate = [&](std::size_t c) { return reset_mask[c] ? lr : lr * reduced_factor; };
    std::vector<double> u_old(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) u_old[static_cast<std::size_t>(k)] = params[uo + static_cast<std::size_t>(k)];
    for (int k = 0; k < d; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const double uk = u_old[ks];
        const double vik = params[io + ks];
        const double vjk = params[jo + ks];
        params[uo + ks] += rate(uo + ks) * (e * (vik - vjk) - 2.0 * reg * uk);
        params[io + ks] += rate(io + ks) * (e * uk - 2.0 * reg * vik);
        params[jo + ks] += rate(jo + ks) * (-e * uk - 2.0 * reg * vjk);
    }
    params[model.bias_offset(s.pos)] += rate(model.bias_offset(s.pos)) * e;
    params[model.bias_offset(s.neg)] -= rate(model.bias_offset(s.neg)) * e;
    return loss;
}

}  // namespace

std::vector<std::size_t> kookmin_select(const std::vector<double>& forget_grad,
                                        const std::vector<double>& retain_grad, double p) {
    if (forget_grad.size() != retain_grad.size()) throw ShapeError("kookmin_select: size mismatch");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("kookmin_select: p must be in (0,1]");
    const std::size_t n = forget_grad.size();
    const auto count = static_cast<std::size_t>(std::floor(p * static_cast<double>(n)));
    if (count < 1) throw std::invalid_argument("kookmin_select: floor(p*n) must be >= 1");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = std::abs(forget_grad[i] - retain_grad[i]);
    auto cmp = [&diff](std::size_t a, std::size_t b) {
        if (diff[a] != diff[b]) return diff[a] < diff[b];
        return a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count - 1),
                     order.end(), cmp);
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

UnlearnOutcome kookmin_unlearn(MfModel& model, const RetainView& retain,
                               const ForgetRequest& forget, const KookminConfig& cfg,
                               RngStream rng) {
    UnlearnOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    if (forget.interactions.empty()) {
        out.wall_time_s = elapsed_s(t0);
        return out;
    }

    const std::vector<double> before = model.params();
    const auto n_forget = forget.interactions.size();

    // Forget-set gradient (mean over the request's BPR terms, full theta).
    // Negatives avoid the unlearned items and their whole category.
    std::unordered_set<std::int32_t> neg_exclude;
    for (const auto& it : forget.interactions) {
        neg_exclude.insert(it.item);
        if (it.category >= 0) {
            const auto& cat = retain.items_in_category(it.category);
            neg_exclude.insert(cat.begin(), cat.end());
        }
    }
    RngStream neg_rng = rng.substream("forget-neg");
    std::vector<BprSample> forget_triples;
    for (const auto& it : forget.interactions) {
        const auto& owned = retain.user_items(it.user);
        std::int32_t neg = -1;
        for (int tries = 0; tries < 2000; ++tries) {
            const auto cand = static_cast<std::int32_t>(
                neg_rng.uniform_int(static_cast<std::uint64_t>(model.n_items())));
            if (owned.contains(cand) || neg_exclude.contains(cand)) continue;
            neg = cand;
            break;
        }
        if (neg < 0) throw EmptyInputError("kookmin: no negative item available");
        forget_triples.push_back(BprSample{it.user, it.item, neg});
    }
    const SubsetSelector full = SubsetSelector::all();
    const ParamVector g_forget = mf_gradient(model, forget_triples, full);

    // Retain batch B_r of size |D_f|.
    RngStream batch_rng = rng.substream("retain-batch");
    std::vector<BprSample> retain_batch;
    for (std::size_t i = 0; i < n_forget; ++i)
        retain_batch.push_back(retain.sample_triple(batch_rng));
    const ParamVector g_retain = mf_gradient(model, retain_batch, full);

    const auto selected = kookmin_select(g_forget.values, g_retain.values, cfg.p);
    out.diagnostics["reset_count"] = static_cast<double>(selected.size());

    auto& params = model.params();
    std::vector<char> reset_mask(params.size(), 0);
    RngStream reset_rng = rng.substream("reset");
    for (std::size_t c : selected) {
        params[c] = reset_rng.normal(0.0, cfg.reinit_std);
        reset_mask[c] = 1;
    }

    // Repair: SGD on retain samples, reduced learning rate off the reset set.
    RngStream round_root = rng.substream("rounds");
    const auto per_round = static_cast<std::size_t>(cfg.retain_multiplier) * n_forget;
    bool failed = false;
    for (int r = 0; r < cfg.retain_rounds && !failed; ++r) {
        RngStream round_rng = round_root.substream("round", static_cast<std::uint64_t>(r));
        const std::vector<double> snapshot = params;
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < per_round; ++s) {
            const BprSample triple = retain.sample_triple(round_rng);
            const double loss =
                sgd_step_masked(model, triple, cfg.lr, cfg.reduced_lr_factor, reset_mask);
            loss_sum += loss;
            if (!std::isfinite(loss)) {
                params = snapshot;  // keep the last finite state
                failed = true;
                break;
            }
        }
        if (!failed && per_round > 0)
            out.diagnostics["round_" + std::to_string(r) + "_loss"] =
                loss_sum / static_cast<double>(per_round);
    }
    if (failed) {
        out.failed = true;
        out.failure_reason = "non-finite loss during repair";
    }

    double delta_sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double d = params[i] - before[i];
        delta_sq += d * d;
    }
    out.update_norm = std::sqrt(delta_sq);
    out.wall_time_s = elapsed_s(t0);
    return out;
}

}  // namespace unrec
