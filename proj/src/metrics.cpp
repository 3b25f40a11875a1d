#include "unrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unrec/errors.hpp"
#include "unrec/numerics.hpp"
#include "unrec/rng.hpp"

namespace unrec {

double recall_at_k(const std::vector<std::int32_t>& topk,
                   const std::unordered_set<std::int32_t>& truth, int k) {
    if (truth.empty()) throw EmptyInputError("recall_at_k: empty truth set");
    const std::size_t upto = std::min<std::size_t>(topk.size(), static_cast<std::size_t>(k));
    std::size_t hits = 0;
    for (std::size_t r = 0; r < upto; ++r)
        if (truth.contains(topk[r])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double ndcg_at_k(const std::vector<std::int32_t>& topk,
                 const std::unordered_set<std::int32_t>& truth, int k) {
    if (truth.empty()) throw EmptyInputError("ndcg_at_k: empty truth set");
    const std::size_t upto = std::min<std::size_t>(topk.size(), static_cast<std::size_t>(k));
    double dcg = 0.0;
    for (std::size_t r = 0; r < upto; ++r)
        if (truth.contains(topk[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    const std::size_t ideal = std::min<std::size_t>(static_cast<std::size_t>(k), truth.size());
    double idcg = 0.0;
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

double phr_at_k(const std::vector<UserEval>& users, int k) {
    if (users.empty()) throw EmptyInputError("phr_at_k: no users");
    std::size_t hit_users = 0;
    for (const auto& u : users) {
        const std::size_t upto = std::min<std::size_t>(u.topk.size(), static_cast<std::size_t>(k));
        for (std::size_t r = 0; r < upto; ++r) {
            if (u.truth.contains(u.topk[r])) {
                ++hit_users;
                break;
            }
        }
    }
    return static_cast<double>(hit_users) / static_cast<double>(users.size());
}

UtilityResult utility_at_k(
    const Recommender& model, int k,
    const std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>>& truth,
    const std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>>& exclude) {
    // Sorted user order keeps the aggregation reproducible.
    std::vector<std::int32_t> users;
    users.reserve(truth.size());
    for (const auto& [u, t] : truth) users.push_back(u);
    std::sort(users.begin(), users.end());

    UtilityResult res;
    double recall_sum = 0.0, ndcg_sum = 0.0;
    std::size_t phr_hits = 0;
    static const std::unordered_set<std::int32_t> kEmpty;
    for (std::int32_t u : users) {
        const auto& t = truth.at(u);
        if (t.empty()) {
            ++res.skipped_users;
            continue;
        }
        auto ex = exclude.find(u);
        const TopK topk = recommend_topk(model, u, k, ex == exclude.end() ? kEmpty : ex->second);
        recall_sum += recall_at_k(topk.items, t, k);
        ndcg_sum += ndcg_at_k(topk.items, t, k);
        for (std::size_t r = 0; r < topk.items.size(); ++r) {
            if (t.contains(topk.items[r])) {
                ++phr_hits;
                break;
            }
        }
        ++res.evaluated_users;
    }
    if (res.evaluated_users > 0) {
        res.recall = recall_sum / res.evaluated_users;
        res.ndcg = ndcg_sum / res.evaluated_users;
        res.phr = static_cast<double>(phr_hits) / res.evaluated_users;
    }
    return res;
}

double sensitive_leakage(
    const Recommender& model, const std::vector<std::int32_t>& forget_users,
    const std::unordered_set<std::int32_t>& category_items, int k,
    const std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>>& exclude) {
    if (forget_users.empty()) throw EmptyInputError("sensitive_leakage: no forget users");
    if (category_items.empty()) return 0.0;  // vacuous: nothing sensitive to leak
    static const std::unordered_set<std::int32_t> kEmpty;
    std::size_t leaked = 0;
    for (std::int32_t u : forget_users) {
        auto ex = exclude.find(u);
        const TopK topk = recommend_topk(model, u, k, ex == exclude.end() ? kEmpty : ex->second);
        for (std::int32_t item : topk.items) {
            if (category_items.contains(item)) {
                ++leaked;
                break;
            }
        }
    }
    return static_cast<double>(leaked) / static_cast<double>(forget_users.size());
}

double kl_completeness(const Recommender& retrained, const Recommender& unlearned,
                       const std::vector<std::int32_t>& forget_users,
                       const KlCandidatePolicy& policy) {
    if (retrained.n_items() != unlearned.n_items() || retrained.n_users() != unlearned.n_users())
        throw ShapeError("kl_completeness: vocabulary mismatch between models");
    if (forget_users.empty()) throw EmptyInputError("kl_completeness: no forget users");

    const std::int32_t n_items = retrained.n_items();
    std::vector<std::int32_t> candidates;
    if (policy.full_catalog || policy.sample_size >= n_items) {
        candidates.resize(static_cast<std::size_t>(n_items));
        for (std::int32_t i = 0; i < n_items; ++i) candidates[static_cast<std::size_t>(i)] = i;
    } else {
        RngStream rng = RngStream(policy.seed).substream("kl-candidates");
        std::vector<std::int32_t> all(static_cast<std::size_t>(n_items));
        for (std::int32_t i = 0; i < n_items; ++i) all[static_cast<std::size_t>(i)] = i;
        for (int i = 0; i < policy.sample_size; ++i) {
            const std::size_t j =
                static_cast<std::size_t>(i) + rng.uniform_int(all.size() - static_cast<std::size_t>(i));
            std::swap(all[static_cast<std::size_t>(i)], all[j]);
        }
        candidates.assign(all.begin(), all.begin() + policy.sample_size);
        std::sort(candidates.begin(), candidates.end());
    }

    std::vector<std::int32_t> users = forget_users;
    std::sort(users.begin(), users.end());
    std::vector<double> r_all(static_cast<std::size_t>(n_items));
    std::vector<double> u_all(static_cast<std::size_t>(n_items));
    std::vector<double> r_scores(candidates.size()), u_scores(candidates.size());
    double kl_sum = 0.0;
    for (std::int32_t user : users) {
        retrained.score_all(user, r_all);
        unlearned.score_all(user, u_all);
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            r_scores[c] = r_all[static_cast<std::size_t>(candidates[c])];
            u_scores[c] = u_all[static_cast<std::size_t>(candidates[c])];
        }
        kl_sum += softmax_kl(r_scores, u_scores);
    }
    return kl_sum / static_cast<double>(users.size());
}

std::string metric_rows_to_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream os;
    os << "category,requests,algorithm,seed,recall@10,recall@20,ndcg@10,ndcg@20,"
          "phr@10,phr@20,time_per_request_s,leakage@10,leakage@20,kl_r_u,retrain_time_s,"
          "retrain_speedup,skipped_users\n";
    os.precision(6);
    os << std::fixed;
    for (const auto& r : rows) {
        const double speedup =
            r.time_per_request_s > 0.0 ? r.retrain_time_s / r.time_per_request_s : 0.0;
        os << r.category << ',' << r.requests_label << ',' << r.algorithm << ',' << r.seed << ','
           << r.recall10 << ',' << r.recall20 << ',' << r.ndcg10 << ',' << r.ndcg20 << ','
           << r.phr10 << ',' << r.phr20 << ',' << r.time_per_request_s << ',' << r.leakage10
           << ',' << r.leakage20 << ',' << r.kl_r_u << ',' << r.retrain_time_s << ',' << speedup
           << ',' << r.skipped_users << '\n';
    }
    return os.str();
}

}  // namespace unrec
