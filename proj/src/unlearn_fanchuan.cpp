#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <unordered_set>

#include "unrec/errors.hpp"
#include "unrec/numerics.hpp"
#include "unrec/unlearn.hpp"

namespace unrec {
namespace {

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    const auto dt = std::chrono::steady_clock::now() - t0;
    return std::max(std::chrono::duration<double>(dt).count(), 1e-9);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// KL(uniform || softmax(scores)) over the candidate set.
double kl_uniform_to_softmax(const std::vector<double>& scores) {
    const double n = static_cast<double>(scores.size());
    const double lse = log_sum_exp(scores);
    double mean_logp = 0.0;
    for (double s : scores) mean_logp += (s - lse);
    mean_logp /= n;
    return -std::log(n) - mean_logp;
}

}  // namespace

UnlearnOutcome fanchuan_unlearn(MfModel& model, const RetainView& retain,
                                const ForgetRequest& forget, const FanchuanConfig& cfg,
                                RngStream rng) {
    UnlearnOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    if (forget.interactions.empty()) {
        out.diagnostics["stages_run"] = 0.0;
        out.wall_time_s = elapsed_s(t0);
        return out;  // nothing to unlearn
    }

    const std::vector<double> before = model.params();
    auto& params = model.params();
    const int d = model.hyper().d;
    const std::int32_t user = forget.user;
    const std::int32_t n_items = model.n_items();
    const double lr = cfg.lr;

    // Candidate set for the output distribution: the forget items plus a
    // seeded sample of the catalog.
    std::set<std::int32_t> cand_set;
    for (const auto& it : forget.interactions) cand_set.insert(it.item);
    RngStream cand_rng = rng.substream("candidates");
    const std::size_t want = cand_set.size() + static_cast<std::size_t>(cfg.candidate_samples);
    const std::size_t cap = std::min<std::size_t>(want, static_cast<std::size_t>(n_items));
    int guard = 0;
    while (cand_set.size() < cap && guard++ < 100000)
        cand_set.insert(static_cast<std::int32_t>(cand_rng.uniform_int(static_cast<std::uint64_t>(n_items))));
    const std::vector<std::int32_t> candidates(cand_set.begin(), cand_set.end());
    const double n_cand = static_cast<double>(candidates.size());

    auto candidate_scores = [&]() {
        std::vector<double> scores(candidates.size());
        for (std::size_t c = 0; c < candidates.size(); ++c)
            scores[c] = model.score(user, candidates[c]);
        return scores;
    };

    bool diverged = false;

    // Stage 1: uniformize the output distribution on the candidate set.
    out.diagnostics["stage1_kl_first"] = kl_uniform_to_softmax(candidate_scores());
    for (int e = 0; e < cfg.forget_epochs && !diverged; ++e) {
        const std::vector<double> scores = candidate_scores();
        const double lse = log_sum_exp(scores);
        if (!std::isfinite(lse)) {
            diverged = true;
            break;
        }
        const std::size_t uo = model.user_offset(user);
        std::vector<double> u_old(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) u_old[static_cast<std::size_t>(k)] = params[uo + static_cast<std::size_t>(k)];
        std::vector<double> u_grad(static_cast<std::size_t>(d), 0.0);
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const double coeff = std::exp(scores[c] - lse) - 1.0 / n_cand;  // dKL/ds_c
            const std::size_t io = model.item_offset(candidates[c]);
            for (int k = 0; k < d; ++k) {
                const auto ks = static_cast<std::size_t>(k);
                u_grad[ks] += coeff * params[io + ks];
                params[io + ks] -= lr * coeff * u_old[ks];
            }
            params[model.bias_offset(candidates[c])] -= lr * coeff;
        }
        for (int k = 0; k < d; ++k)
            params[uo + static_cast<std::size_t>(k)] -= lr * u_grad[static_cast<std::size_t>(k)];
    }
    out.diagnostics["stage1_kl_last"] = kl_uniform_to_softmax(candidate_scores());
    if (!std::isfinite(out.diagnostics["stage1_kl_last"])) diverged = true;

    // Stage 2: alternate contrastive separation and plain retain training.
    const auto n_forget = forget.interactions.size();
    double contrastive_loss_last = 0.0;
    double repair_loss_last = 0.0;
    for (int e = 0; e < cfg.repair_epochs && !diverged; ++e) {
        if (e % 2 == 0) {
            // Contrastive mode: push the forget user away from retain items'
            // representations by descending the mean cosine similarity.
            RngStream crng = rng.substream("contrastive", static_cast<std::uint64_t>(e));
            std::vector<std::int32_t> items;
            for (int s = 0; s < cfg.contrastive_retain_count; ++s)
                items.push_back(retain.sample_triple(crng).pos);

            const std::size_t uo = model.user_offset(user);
            std::vector<double> u(static_cast<std::size_t>(d));
            for (int k = 0; k < d; ++k) u[static_cast<std::size_t>(k)] = params[uo + static_cast<std::size_t>(k)];
            double unorm = 0.0;
            for (double v : u) unorm += v * v;
            unorm = std::sqrt(unorm);
            if (unorm == 0.0) continue;

            const double m = static_cast<double>(items.size());
            std::vector<double> u_grad(static_cast<std::size_t>(d), 0.0);
            double loss = 0.0;
            for (std::int32_t item : items) {
                const std::size_t io = model.item_offset(item);
                double vnorm = 0.0, dp = 0.0;
                for (int k = 0; k < d; ++k) {
                    const auto ks = static_cast<std::size_t>(k);
                    vnorm += params[io + ks] * params[io + ks];
                    dp += u[ks] * params[io + ks];
                }
                vnorm = std::sqrt(vnorm);
                if (vnorm == 0.0) continue;
                const double cosine = dp / (unorm * vnorm);
                if (!std::isfinite(cosine)) {
                    diverged = true;
                    break;
                }
                loss += cosine / cfg.temperature;
                // d cos / d u and d cos / d v, scaled by 1/(m * temperature).
                const double scale = 1.0 / (m * cfg.temperature);
                for (int k = 0; k < d; ++k) {
                    const auto ks = static_cast<std::size_t>(k);
                    const double gv = (u[ks] / (unorm * vnorm) -
                                       cosine * params[io + ks] / (vnorm * vnorm));
                    u_grad[ks] += scale * (params[io + ks] / (unorm * vnorm) -
                                           cosine * u[ks] / (unorm * unorm));
                    params[io + ks] -= lr * scale * gv;
                }
            }
            for (int k = 0; k < d; ++k)
                params[uo + static_cast<std::size_t>(k)] -= lr * u_grad[static_cast<std::size_t>(k)];
            contrastive_loss_last = loss / m;
        } else {
            // Retain-training mode: standard BPR on a capped retain subset.
            RngStream rrng = rng.substream("repair", static_cast<std::uint64_t>(e));
            const std::size_t steps = static_cast<std::size_t>(cfg.retain_cap_multiplier) * n_forget;
            double loss_sum = 0.0;
            for (std::size_t s = 0; s < steps; ++s) {
                const BprSample triple = retain.sample_triple(rrng);
                const double step_loss = bpr_loss_at(params, model, triple);
                if (!std::isfinite(step_loss)) {
                    diverged = true;
                    break;
                }
                loss_sum += step_loss;
                const std::size_t uo = model.user_offset(triple.user);
                const std::size_t io = model.item_offset(triple.pos);
                const std::size_t jo = model.item_offset(triple.neg);
                double x = params[model.bias_offset(triple.pos)] - params[model.bias_offset(triple.neg)];
                for (int k = 0; k < d; ++k)
                    x += params[uo + static_cast<std::size_t>(k)] *
                         (params[io + static_cast<std::size_t>(k)] - params[jo + static_cast<std::size_t>(k)]);
                const double err = sigmoid(-x);
                const double reg = model.hyper().reg;
                for (int k = 0; k < d; ++k) {
                    const auto ks = static_cast<std::size_t>(k);
                    const double uk = params[uo + ks];
                    const double vik = params[io + ks];
                    const double vjk = params[jo + ks];
                    params[uo + ks] += lr * (err * (vik - vjk) - 2.0 * reg * uk);
                    params[io + ks] += lr * (err * uk - 2.0 * reg * vik);
                    params[jo + ks] += lr * (-err * uk - 2.0 * reg * vjk);
                }
                params[model.bias_offset(triple.pos)] += lr * err;
                params[model.bias_offset(triple.neg)] -= lr * err;
            }
            repair_loss_last = steps ? loss_sum / static_cast<double>(steps) : 0.0;
        }
    }
    out.diagnostics["stages_run"] = 2.0;
    out.diagnostics["contrastive_loss_last"] = contrastive_loss_last;
    out.diagnostics["repair_loss_last"] = repair_loss_last;

    bool finite = !diverged;
    double delta_sq = 0.0;
    for (std::size_t i = 0; finite && i < params.size(); ++i) {
        if (!std::isfinite(params[i])) {
            finite = false;
            break;
        }
        const double diff = params[i] - before[i];
        delta_sq += diff * diff;
    }
    if (!finite) {
        params = before;
        out.failed = true;
        out.failure_reason = "non-finite loss during unlearning";
        out.update_norm = 0.0;
    } else {
        out.update_norm = std::sqrt(delta_sq);
    }
    out.wall_time_s = elapsed_s(t0);
    return out;
}

}  // namespace unrec
