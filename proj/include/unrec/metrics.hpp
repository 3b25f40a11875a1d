#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "unrec/recommender.hpp"

namespace unrec {

double recall_at_k(const std::vector<std::int32_t>& topk,
                   const std::unordered_set<std::int32_t>& truth, int k);

// Binary-relevance nDCG: DCG over hits at log2(rank+1), ideal DCG over
// min(K, |truth|) leading ranks.
double ndcg_at_k(const std::vector<std::int32_t>& topk,
                 const std::unordered_set<std::int32_t>& truth, int k);

struct UserEval {
    std::vector<std::int32_t> topk;
    std::unordered_set<std::int32_t> truth;
};

// Fraction of users with at least one hit in their top-K.
double phr_at_k(const std::vector<UserEval>& users, int k);

struct UtilityResult {
    double recall = 0.0;
    double ndcg = 0.0;
    double phr = 0.0;
    int evaluated_users = 0;
    int skipped_users = 0;  // empty truth after filtering
};

// Mean ranking utility over users; users with empty truth are skipped and
// counted. exclude[u] is removed from each user's candidate ranking.
UtilityResult utility_at_k(const Recommender& model, int k,
                           const std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>>& truth,
                           const std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>>& exclude);

// Fraction of forget users whose top-K still contains an item of the
// sensitive category.
double sensitive_leakage(const Recommender& model, const std::vector<std::int32_t>& forget_users,
                         const std::unordered_set<std::int32_t>& category_items, int k,
                         const std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>>& exclude);

struct KlCandidatePolicy {
    bool full_catalog = true;
    int sample_size = 0;
    std::uint64_t seed = 0;
};

// Mean KL(softmax(retrained scores) || softmax(unlearned scores)) over the
// forget users, scored on the candidate set.
double kl_completeness(const Recommender& retrained, const Recommender& unlearned,
                       const std::vector<std::int32_t>& forget_users,
                       const KlCandidatePolicy& policy = {});

// One row of the report table, mirroring the benchmark's column layout.
struct MetricRow {
    std::string category;
    std::string requests_label;  // "25%" .. "100%"
    int checkpoint = 0;          // request index i in C
    std::string algorithm;
    double recall10 = 0.0, recall20 = 0.0;
    double ndcg10 = 0.0, ndcg20 = 0.0;
    double phr10 = 0.0, phr20 = 0.0;
    double time_per_request_s = 0.0;
    double leakage10 = 0.0, leakage20 = 0.0;
    double kl_r_u = 0.0;
    double retrain_time_s = 0.0;
    std::uint64_t seed = 0;
    int skipped_users = 0;
};

std::string metric_rows_to_csv(const std::vector<MetricRow>& rows);

}  // namespace unrec
