#pragma once

#include <cstdint>
#include <map>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "unrec/corpus.hpp"
#include "unrec/mf.hpp"
#include "unrec/rng.hpp"

namespace unrec {

// Live view of D_r^i = D \ union of processed forget sets. Supports exact
// removal, uniform sampling over the remaining interactions and an
// order-independent content hash for protocol checks.
class RetainView {
public:
    explicit RetainView(const InteractionLog& train);

    // Removes interactions; each must currently be present.
    void remove(const std::vector<Interaction>& gone);

    std::size_t size() const { return alive_count_; }
    std::int32_t n_items() const { return n_items_; }

    // Uniform draw over the remaining interactions.
    const Interaction& sample(RngStream& rng) const;

    // BPR triple: positive drawn from the view, negative outside the user's
    // remaining items (and outside `extra_exclude` when given).
    BprSample sample_triple(RngStream& rng,
                            const std::unordered_set<std::int32_t>* extra_exclude = nullptr) const;

    const std::unordered_map<std::int32_t, int>& user_items(std::int32_t user) const;
    bool user_has(std::int32_t user, std::int32_t item) const;

    // All items carrying the given category anywhere in the original train
    // log (deletions do not shrink this index).
    const std::unordered_set<std::int32_t>& items_in_category(std::int32_t category) const;

    std::vector<Interaction> materialize() const;  // canonical order
    std::uint64_t content_hash() const;

private:
    using Key = std::tuple<std::int32_t, std::int32_t, std::int64_t, std::int32_t>;

    std::int32_t n_items_ = 0;
    std::vector<Interaction> items_;
    std::vector<char> alive_;
    std::size_t alive_count_ = 0;
    std::map<Key, std::vector<std::size_t>> lookup_;
    std::vector<std::unordered_map<std::int32_t, int>> per_user_;  // item -> multiplicity
    std::unordered_map<std::int32_t, std::unordered_set<std::int32_t>> category_items_;
};

std::uint64_t interactions_hash(std::vector<Interaction> interactions);

}  // namespace unrec
