#include "unrec/tifu.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "unrec/errors.hpp"

namespace unrec {

SparseVector tifu_user_vector(const std::vector<Interaction>& user_train, std::int32_t n_items,
                              const TifuDecay& decay) {
    if (decay.group_size < 1) throw std::invalid_argument("tifu: group_size must be >= 1");
    if (!(decay.group_decay > 0.0 && decay.group_decay <= 1.0) ||
        !(decay.within_decay > 0.0 && decay.within_decay <= 1.0))
        throw std::invalid_argument("tifu: decays must be in (0,1]");

    // Baskets in chronological order (interactions are canonically sorted;
    // first occurrence fixes the order). Interactions without basket ids are
    // treated as singleton baskets.
    std::vector<std::set<std::int32_t>> baskets;
    std::unordered_map<std::int32_t, std::size_t> basket_pos;
    for (const auto& it : user_train) {
        if (it.basket < 0) {
            baskets.push_back({it.item});
        } else {
            auto [pos, inserted] = basket_pos.emplace(it.basket, baskets.size());
            if (inserted) baskets.emplace_back();
            baskets[pos->second].insert(it.item);
        }
    }

    SparseVector out;
    const auto n_baskets = static_cast<std::int64_t>(baskets.size());
    if (n_baskets == 0) return out;

    const std::int64_t m = decay.group_size;
    const std::int64_t n_groups = (n_baskets + m - 1) / m;

    std::vector<double> acc(static_cast<std::size_t>(n_items), 0.0);
    // Blocks counted from the most recent basket; the oldest block may be short.
    for (std::int64_t b = 0; b < n_baskets; ++b) {
        const std::int64_t block_from_newest = (n_baskets - 1 - b) / m;
        const std::int64_t group = n_groups - 1 - block_from_newest;  // 0 = oldest
        // Bounds of this group in chronological basket indices.
        const std::int64_t group_end = n_baskets - block_from_newest * m;  // exclusive
        const std::int64_t group_begin = std::max<std::int64_t>(0, group_end - m);
        const std::int64_t group_count = group_end - group_begin;
        const std::int64_t age = group_end - 1 - b;

        const double w = std::pow(decay.within_decay, static_cast<double>(age)) /
                         static_cast<double>(group_count) *
                         std::pow(decay.group_decay, static_cast<double>(n_groups - 1 - group)) /
                         static_cast<double>(n_groups);
        for (std::int32_t item : baskets[static_cast<std::size_t>(b)])
            acc[static_cast<std::size_t>(item)] += w;
    }
    for (std::int32_t i = 0; i < n_items; ++i) {
        if (acc[static_cast<std::size_t>(i)] != 0.0) {
            out.indices.push_back(i);
            out.values.push_back(acc[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

TifuModel TifuModel::build_from_histories(std::int32_t n_users, std::int32_t n_items,
                                          const TifuHyper& hyper,
                                          std::vector<std::vector<Interaction>> histories) {
    if (n_users <= 0) throw EmptyInputError("build_tifu: no users");
    if (histories.size() != static_cast<std::size_t>(n_users))
        throw ShapeError("build_tifu: history count does not match n_users");
    TifuModel model;
    model.n_users_ = n_users;
    model.n_items_ = n_items;
    model.hyper_ = hyper;
    model.train_ = std::move(histories);

    std::vector<SparseVector> rows(static_cast<std::size_t>(n_users));
    for (std::int32_t u = 0; u < n_users; ++u)
        rows[static_cast<std::size_t>(u)] =
            tifu_user_vector(model.train_[static_cast<std::size_t>(u)], n_items, hyper.decay);

    const int k = std::max(1, std::min(hyper.k, n_users - 1));
    model.knn_ = KnnState::build(std::move(rows), k);
    return model;
}

TifuModel TifuModel::build(const SplitDataset& split, const TifuHyper& hyper) {
    const std::int32_t n_users = split.train.n_users();
    std::vector<std::vector<Interaction>> histories(static_cast<std::size_t>(std::max(n_users, 0)));
    for (const auto& it : split.train.interactions)
        histories[static_cast<std::size_t>(it.user)].push_back(it);
    return build_from_histories(n_users, split.train.n_items(), hyper, std::move(histories));
}

TifuModel build_tifu(const SplitDataset& split, const TifuHyper& hyper) {
    return TifuModel::build(split, hyper);
}

void TifuModel::score_all(std::int32_t user, std::span<double> out) const {
    if (out.size() != static_cast<std::size_t>(n_items_))
        throw ShapeError("TifuModel::score_all: output size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    const auto& own = knn_.row(user);
    for (std::size_t i = 0; i < own.indices.size(); ++i)
        out[static_cast<std::size_t>(own.indices[i])] += hyper_.alpha * own.values[i];
    const auto& nbrs = knn_.neighbors(user);
    if (!nbrs.empty()) {
        const double w = (1.0 - hyper_.alpha) / static_cast<double>(nbrs.size());
        for (const auto& nb : nbrs) {
            const auto& row = knn_.row(nb.entity);
            for (std::size_t i = 0; i < row.indices.size(); ++i)
                out[static_cast<std::size_t>(row.indices[i])] += w * row.values[i];
        }
    }
}

double TifuModel::score(std::int32_t user, std::int32_t item) const {
    double s = hyper_.alpha * knn_.row(user).at(item);
    const auto& nbrs = knn_.neighbors(user);
    if (!nbrs.empty()) {
        double acc = 0.0;
        for (const auto& nb : nbrs) acc += knn_.row(nb.entity).at(item);
        s += (1.0 - hyper_.alpha) * acc / static_cast<double>(nbrs.size());
    }
    return s;
}

void TifuModel::remove_user_interactions(std::int32_t user, const std::vector<Interaction>& gone) {
    auto& hist = train_[static_cast<std::size_t>(user)];
    for (const auto& g : gone) {
        if (g.user != user)
            throw ConsistencyError("TifuModel: interaction does not belong to the given user");
        auto it = std::find(hist.begin(), hist.end(), g);
        if (it == hist.end())
            throw ConsistencyError("TifuModel: interaction not present in user history");
        hist.erase(it);
    }
    knn_.update_row(user, tifu_user_vector(hist, n_items_, hyper_.decay));
}

bool TifuModel::equals(const TifuModel& other, double tol) const {
    if (n_users_ != other.n_users_ || n_items_ != other.n_items_) return false;
    for (std::int32_t u = 0; u < n_users_; ++u) {
        const auto& a = knn_.row(u);
        const auto& b = other.knn_.row(u);
        if (a.indices != b.indices) return false;
        for (std::size_t i = 0; i < a.values.size(); ++i)
            if (std::abs(a.values[i] - b.values[i]) > tol) return false;
    }
    return knn_.equals(other.knn_, tol);
}

}  // namespace unrec
