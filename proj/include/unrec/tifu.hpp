#pragma once

#include <cstdint>
#include <vector>

#include "unrec/corpus.hpp"
#include "unrec/knn.hpp"
#include "unrec/recommender.hpp"

namespace unrec {

struct TifuDecay {
    double group_decay = 0.7;   // r_g in (0, 1]
    double within_decay = 0.9;  // r_b in (0, 1]
    int group_size = 7;         // m >= 1

    friend bool operator==(const TifuDecay&, const TifuDecay&) = default;
};

struct TifuHyper {
    TifuDecay decay;
    int k = 300;         // neighbor count, capped at n_users - 1
    double alpha = 0.7;  // blend between own history and neighborhood

    friend bool operator==(const TifuHyper&, const TifuHyper&) = default;
};

// Decayed-frequency vector over items for one user's chronological baskets.
// Baskets are grouped into ceil(B/m) blocks counted from the most recent
// (the oldest block may be partial). A basket of age a within its group is
// weighted r_b^a, group g of G carries r_g^(G-1-g), and both levels average
// over their members.
SparseVector tifu_user_vector(const std::vector<Interaction>& user_train, std::int32_t n_items,
                              const TifuDecay& decay);

// Next-basket recommender: score(u) = alpha * own_vector + (1-alpha) * mean
// of the k nearest user vectors by cosine.
class TifuModel : public Recommender {
public:
    static TifuModel build(const SplitDataset& split, const TifuHyper& hyper);
    static TifuModel build_from_histories(std::int32_t n_users, std::int32_t n_items,
                                          const TifuHyper& hyper,
                                          std::vector<std::vector<Interaction>> histories);

    std::int32_t n_users() const override { return n_users_; }
    std::int32_t n_items() const override { return n_items_; }
    double score(std::int32_t user, std::int32_t item) const override;
    void score_all(std::int32_t user, std::span<double> out) const override;

    const TifuHyper& hyper() const { return hyper_; }
    const KnnState& knn() const { return knn_; }
    const SparseVector& user_vector(std::int32_t u) const { return knn_.row(u); }
    const std::vector<Interaction>& user_train(std::int32_t u) const {
        return train_[static_cast<std::size_t>(u)];
    }

    // Exact deletion: removes the interactions from the stored history,
    // recomputes the user's decayed vector and repairs the index. The result
    // equals a fresh build on the reduced data.
    void remove_user_interactions(std::int32_t user, const std::vector<Interaction>& gone);

    bool equals(const TifuModel& other, double tol) const;

private:
    std::int32_t n_users_ = 0;
    std::int32_t n_items_ = 0;
    TifuHyper hyper_;
    std::vector<std::vector<Interaction>> train_;  // per-user, canonical order
    KnnState knn_;
};

TifuModel build_tifu(const SplitDataset& split, const TifuHyper& hyper);

}  // namespace unrec
