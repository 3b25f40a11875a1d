#include "unrec/retain.hpp"

#include <algorithm>

#include "unrec/errors.hpp"

namespace unrec {
namespace {

std::uint64_t hash_interaction(std::uint64_t h, const Interaction& it) {
    auto mix = [&h](std::int64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= static_cast<unsigned char>(v >> (8 * b));
            h *= 0x100000001b3ull;
        }
    };
    mix(it.user);
    mix(it.item);
    mix(it.timestamp);
    mix(it.basket);
    mix(it.category);
    return h;
}

}  // namespace

RetainView::RetainView(const InteractionLog& train)
    : n_items_(train.n_items()), items_(train.interactions) {
    alive_.assign(items_.size(), 1);
    alive_count_ = items_.size();
    per_user_.resize(static_cast<std::size_t>(train.n_users()));
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& it = items_[i];
        lookup_[Key{it.user, it.item, it.timestamp, it.basket}].push_back(i);
        per_user_[static_cast<std::size_t>(it.user)][it.item] += 1;
        if (it.category >= 0) category_items_[it.category].insert(it.item);
    }
}

const std::unordered_set<std::int32_t>& RetainView::items_in_category(
    std::int32_t category) const {
    static const std::unordered_set<std::int32_t> kEmpty;
    auto it = category_items_.find(category);
    return it == category_items_.end() ? kEmpty : it->second;
}

void RetainView::remove(const std::vector<Interaction>& gone) {
    for (const auto& it : gone) {
        auto found = lookup_.find(Key{it.user, it.item, it.timestamp, it.basket});
        if (found == lookup_.end() || found->second.empty())
            throw ConsistencyError("RetainView: interaction not present");
        const std::size_t idx = found->second.back();
        found->second.pop_back();
        if (found->second.empty()) lookup_.erase(found);
        alive_[idx] = 0;
        --alive_count_;
        auto& items = per_user_[static_cast<std::size_t>(it.user)];
        auto entry = items.find(it.item);
        if (entry == items.end())
            throw ConsistencyError("RetainView: per-user index out of sync");
        if (--entry->second == 0) items.erase(entry);
    }
}

const Interaction& RetainView::sample(RngStream& rng) const {
    if (alive_count_ == 0) throw EmptyInputError("RetainView: nothing left to sample");
    for (;;) {
        const std::size_t idx = rng.uniform_int(items_.size());
        if (alive_[idx]) return items_[idx];
    }
}

BprSample RetainView::sample_triple(RngStream& rng,
                                    const std::unordered_set<std::int32_t>* extra_exclude) const {
    for (int attempt = 0; attempt < 200; ++attempt) {
        const Interaction& pos = sample(rng);
        const auto& owned = per_user_[static_cast<std::size_t>(pos.user)];
        const std::size_t excluded =
            owned.size() + (extra_exclude ? extra_exclude->size() : 0);
        if (excluded >= static_cast<std::size_t>(n_items_)) continue;
        for (int tries = 0; tries < 1000; ++tries) {
            const auto neg =
                static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(n_items_)));
            if (owned.contains(neg)) continue;
            if (extra_exclude && extra_exclude->contains(neg)) continue;
            return BprSample{pos.user, pos.item, neg};
        }
    }
    throw EmptyInputError("RetainView: could not sample a BPR triple");
}

const std::unordered_map<std::int32_t, int>& RetainView::user_items(std::int32_t user) const {
    return per_user_.at(static_cast<std::size_t>(user));
}

bool RetainView::user_has(std::int32_t user, std::int32_t item) const {
    const auto& items = per_user_.at(static_cast<std::size_t>(user));
    return items.contains(item);
}

std::vector<Interaction> RetainView::materialize() const {
    std::vector<Interaction> out;
    out.reserve(alive_count_);
    for (std::size_t i = 0; i < items_.size(); ++i)
        if (alive_[i]) out.push_back(items_[i]);
    std::sort(out.begin(), out.end(), interaction_less);
    return out;
}

std::uint64_t RetainView::content_hash() const { return interactions_hash(materialize()); }

std::uint64_t interactions_hash(std::vector<Interaction> interactions) {
    std::sort(interactions.begin(), interactions.end(), interaction_less);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& it : interactions) h = hash_interaction(h, it);
    return h;
}

}  // namespace unrec
