#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

namespace unrec {

// Read-only scoring surface shared by all models.
class Recommender {
public:
    virtual ~Recommender() = default;
    virtual std::int32_t n_users() const = 0;
    virtual std::int32_t n_items() const = 0;
    virtual double score(std::int32_t user, std::int32_t item) const = 0;
    // Writes scores for every item; out.size() must equal n_items().
    virtual void score_all(std::int32_t user, std::span<double> out) const;
};

struct TopK {
    std::vector<std::int32_t> items;  // score-descending, ties by ascending index
    bool truncated = false;           // true when fewer than K items were available
};

TopK recommend_topk(const Recommender& model, std::int32_t user, int k,
                    const std::unordered_set<std::int32_t>& exclude);

}  // namespace unrec
