#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "unrec/corpus.hpp"
#include "unrec/knn.hpp"
#include "unrec/recommender.hpp"

namespace unrec {

// Item-based collaborative filtering: items are rows over user dimensions
// (binary), candidate items score by summed similarity to the user's train
// items over the maintained top-k lists. Deletion is exact via the index.
class ItemKnnModel : public Recommender {
public:
    static ItemKnnModel build(const SplitDataset& split, int k);
    static ItemKnnModel build_from_pairs(std::int32_t n_users, std::int32_t n_items, int k,
                                         const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs);
    int k() const { return k_; }

    std::int32_t n_users() const override { return n_users_; }
    std::int32_t n_items() const override { return n_items_; }
    double score(std::int32_t user, std::int32_t item) const override;
    void score_all(std::int32_t user, std::span<double> out) const override;

    const KnnState& knn() const { return knn_; }
    const std::unordered_set<std::int32_t>& user_items(std::int32_t u) const {
        return user_items_[static_cast<std::size_t>(u)];
    }

    // Exact removal of (user, item) pairs from the training record.
    void remove_user_interactions(std::int32_t user, const std::vector<Interaction>& gone);

private:
    std::int32_t n_users_ = 0;
    std::int32_t n_items_ = 0;
    int k_ = 0;
    KnnState knn_;
    std::vector<std::unordered_set<std::int32_t>> user_items_;
};

ItemKnnModel build_item_knn(const SplitDataset& split, int k);

}  // namespace unrec
