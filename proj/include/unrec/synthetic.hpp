#pragma once

#include <cstdint>
#include <string>

#include "unrec/corpus.hpp"

namespace unrec {

// Clustered implicit-feedback corpus with a small sensitive item block.
// Users draw their interactions from one taste cluster; a seeded subset of
// users additionally interacts with items of the sensitive category.
struct SyntheticCfParams {
    int n_users = 2000;
    int n_items = 500;
    int n_clusters = 10;
    double sensitive_fraction = 0.05;       // share of items in the sensitive block
    double sensitive_user_fraction = 0.15;  // share of users touching that block
    int main_interactions_min = 18;
    int main_interactions_max = 22;
    int sensitive_min = 3;
    int sensitive_max = 5;
    std::string sensitive_category = "sensitive";
};

InteractionLog make_synthetic_cf(const SyntheticCfParams& params, std::uint64_t seed);

// Clustered next-basket corpus: every user has a fixed number of baskets,
// each drawn from the user's cluster block, with one timestamp per basket.
struct SyntheticNbrParams {
    int n_users = 200;
    int n_items = 50;
    int n_clusters = 5;
    int baskets_per_user = 5;
    int basket_size_min = 3;
    int basket_size_max = 5;
};

InteractionLog make_synthetic_nbr(const SyntheticNbrParams& params, std::uint64_t seed);

// CSV round-trip helper: external ids with a header row, matching the schema
// (user_id, item_id, timestamp, basket_id, category).
std::string log_to_csv(const InteractionLog& log);
CsvSchema synthetic_csv_schema(bool with_baskets, bool with_categories);

}  // namespace unrec
