#include "unrec/itemknn.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "unrec/errors.hpp"

namespace unrec {

ItemKnnModel ItemKnnModel::build_from_pairs(
    std::int32_t n_users, std::int32_t n_items, int k,
    const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs) {
    if (n_items <= 0) throw EmptyInputError("build_item_knn: no items");
    ItemKnnModel model;
    model.n_users_ = n_users;
    model.n_items_ = n_items;
    model.k_ = k;

    model.user_items_.resize(static_cast<std::size_t>(n_users));
    std::vector<std::set<std::int32_t>> item_users(static_cast<std::size_t>(n_items));
    for (const auto& [user, item] : pairs) {
        model.user_items_[static_cast<std::size_t>(user)].insert(item);
        item_users[static_cast<std::size_t>(item)].insert(user);
    }
    std::vector<SparseVector> rows(static_cast<std::size_t>(n_items));
    for (std::int32_t i = 0; i < n_items; ++i) {
        for (std::int32_t u : item_users[static_cast<std::size_t>(i)]) {
            rows[static_cast<std::size_t>(i)].indices.push_back(u);
            rows[static_cast<std::size_t>(i)].values.push_back(1.0);
        }
    }
    const int capped = std::max(1, std::min(k, n_items - 1));
    model.knn_ = KnnState::build(std::move(rows), capped);
    return model;
}

ItemKnnModel ItemKnnModel::build(const SplitDataset& split, int k) {
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    pairs.reserve(split.train.interactions.size());
    for (const auto& it : split.train.interactions) pairs.emplace_back(it.user, it.item);
    return build_from_pairs(split.train.n_users(), split.train.n_items(), k, pairs);
}

ItemKnnModel build_item_knn(const SplitDataset& split, int k) {
    return ItemKnnModel::build(split, k);
}

double ItemKnnModel::score(std::int32_t user, std::int32_t item) const {
    const auto& owned = user_items_[static_cast<std::size_t>(user)];
    double acc = 0.0;
    for (const auto& nb : knn_.neighbors(item))
        if (owned.contains(nb.entity)) acc += nb.similarity;
    return acc;
}

void ItemKnnModel::score_all(std::int32_t user, std::span<double> out) const {
    if (out.size() != static_cast<std::size_t>(n_items_))
        throw ShapeError("ItemKnnModel::score_all: output size mismatch");
    for (std::int32_t i = 0; i < n_items_; ++i) out[static_cast<std::size_t>(i)] = score(user, i);
}

void ItemKnnModel::remove_user_interactions(std::int32_t user, const std::vector<Interaction>& gone) {
    std::set<std::int32_t> items;
    auto& owned = user_items_[static_cast<std::size_t>(user)];
    for (const auto& g : gone) {
        if (g.user != user)
            throw ConsistencyError("ItemKnnModel: interaction does not belong to the given user");
        if (!owned.contains(g.item) || items.contains(g.item))
            throw ConsistencyError("ItemKnnModel: interaction not present");
        items.insert(g.item);
    }
    const std::int32_t dims[1] = {user};
    for (std::int32_t item : items) {
        knn_.delete_entries(item, std::span<const std::int32_t>(dims, 1));
        owned.erase(item);
    }
}

}  // namespace unrec
