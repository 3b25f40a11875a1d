#include "unrec/knn.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "unrec/errors.hpp"

namespace unrec {

double SparseVector::at(std::int32_t dim) const {
    auto it = std::lower_bound(indices.begin(), indices.end(), dim);
    if (it == indices.end() || *it != dim) return 0.0;
    return values[static_cast<std::size_t>(it - indices.begin())];
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
    double acc = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] < b.indices[j]) {
            ++i;
        } else if (a.indices[i] > b.indices[j]) {
            ++j;
        } else {
            acc += a.values[i] * b.values[j];
            ++i;
            ++j;
        }
    }
    return acc;
}

double sparse_norm(const SparseVector& a) {
    double acc = 0.0;
    for (double v : a.values) acc += v * v;
    return std::sqrt(acc);
}

std::vector<std::int32_t> KnnState::overlap_candidates(const SparseVector& row,
                                                       std::int32_t self) const {
    std::set<std::int32_t> cand;
    for (std::int32_t dim : row.indices) {
        auto it = postings_.find(dim);
        if (it == postings_.end()) continue;
        for (std::int32_t e : it->second)
            if (e != self) cand.insert(e);
    }
    return {cand.begin(), cand.end()};
}

void KnnState::rebuild_topk(std::int32_t entity) {
    const auto e = static_cast<std::size_t>(entity);
    std::vector<Neighbor> list;
    if (norms_[e] > 0.0) {
        list.reserve(dots_[e].size());
        for (const auto& [other, dp] : dots_[e]) {
            const double denom = norms_[e] * norms_[static_cast<std::size_t>(other)];
            if (denom <= 0.0) continue;
            const double sim = dp / denom;
            if (sim > 0.0) list.push_back(Neighbor{other, sim});
        }
    }
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.entity < b.entity;
    });
    if (list.size() > static_cast<std::size_t>(k_)) list.resize(static_cast<std::size_t>(k_));
    topk_[e] = std::move(list);
}

KnnState KnnState::build(std::vector<SparseVector> rows, int k) {
    if (k < 1) throw std::invalid_argument("KnnState: k must be >= 1");
    KnnState st;
    st.k_ = k;
    st.rows_ = std::move(rows);
    const std::size_t n = st.rows_.size();
    st.norms_.resize(n);
    st.dots_.resize(n);
    st.topk_.resize(n);

    for (std::size_t e = 0; e < n; ++e) {
        st.norms_[e] = sparse_norm(st.rows_[e]);
        for (std::int32_t dim : st.rows_[e].indices)
            st.postings_[dim].push_back(static_cast<std::int32_t>(e));
    }
    for (std::size_t e = 0; e < n; ++e) {
        const auto self = static_cast<std::int32_t>(e);
        for (std::int32_t other : st.overlap_candidates(st.rows_[e], self)) {
            if (other < self) continue;  // handle each pair once
            const double dp = sparse_dot(st.rows_[e], st.rows_[static_cast<std::size_t>(other)]);
            if (dp != 0.0) {
                st.dots_[e][other] = dp;
                st.dots_[static_cast<std::size_t>(other)][self] = dp;
            }
        }
    }
    for (std::size_t e = 0; e < n; ++e) st.rebuild_topk(static_cast<std::int32_t>(e));
    return st;
}

void KnnState::update_row(std::int32_t entity, SparseVector new_row) {
    const auto e = static_cast<std::size_t>(entity);
    if (e >= rows_.size()) throw std::out_of_range("KnnState::update_row: bad entity");
    for (std::size_t i = 1; i < new_row.indices.size(); ++i)
        if (new_row.indices[i - 1] >= new_row.indices[i])
            throw ConsistencyError("KnnState::update_row: row indices not strictly ascending");

    // Entities overlapping the old or the new support are the ones whose
    // dot products (and possibly top-k lists) change.
    std::set<std::int32_t> affected;
    for (std::int32_t c : overlap_candidates(rows_[e], entity)) affected.insert(c);

    // Update postings to the new support.
    for (std::int32_t dim : rows_[e].indices) {
        auto& plist = postings_[dim];
        plist.erase(std::remove(plist.begin(), plist.end(), entity), plist.end());
        if (plist.empty()) postings_.erase(dim);
    }
    for (std::int32_t dim : new_row.indices) postings_[dim].push_back(entity);

    rows_[e] = std::move(new_row);
    norms_[e] = sparse_norm(rows_[e]);
    for (std::int32_t c : overlap_candidates(rows_[e], entity)) affected.insert(c);

    for (std::int32_t other : affected) {
        const auto o = static_cast<std::size_t>(other);
        const double dp = sparse_dot(rows_[e], rows_[o]);
        if (dp != 0.0) {
            dots_[e][other] = dp;
            dots_[o][entity] = dp;
        } else {
            dots_[e].erase(other);
            dots_[o].erase(entity);
        }
    }
    // Drop any stale entries pointing at entities that no longer overlap.
    for (auto it = dots_[e].begin(); it != dots_[e].end();) {
        if (!affected.contains(it->first)) {
            dots_[static_cast<std::size_t>(it->first)].erase(entity);
            it = dots_[e].erase(it);
        } else {
            ++it;
        }
    }

    rebuild_topk(entity);
    // Only the updated entity's similarity changed in the other rows'
    // candidate pools, so a list needs repair exactly when it contains the
    // entity or the new similarity earns a slot under the tie rule.
    for (std::int32_t other : affected) {
        const auto o = static_cast<std::size_t>(other);
        const auto& list = topk_[o];
        bool member = false;
        for (const auto& nb : list) {
            if (nb.entity == entity) {
                member = true;
                break;
            }
        }
        bool repair = member;
        if (!repair) {
            double new_sim = 0.0;
            auto dp = dots_[o].find(entity);
            if (dp != dots_[o].end() && norms_[e] > 0.0 && norms_[o] > 0.0)
                new_sim = dp->second / (norms_[e] * norms_[o]);
            if (new_sim > 0.0) {
                if (list.size() < static_cast<std::size_t>(k_)) {
                    repair = true;
                } else {
                    const Neighbor& kth = list.back();
                    repair = new_sim > kth.similarity ||
                             (new_sim == kth.similarity && entity < kth.entity);
                }
            }
        }
        if (repair) rebuild_topk(other);
    }
}

void KnnState::delete_entries(std::int32_t entity, std::span<const std::int32_t> dims) {
    const auto e = static_cast<std::size_t>(entity);
    if (e >= rows_.size()) throw std::out_of_range("KnnState::delete_entries: bad entity");
    std::set<std::int32_t> to_drop(dims.begin(), dims.end());
    for (std::int32_t dim : to_drop)
        if (rows_[e].at(dim) == 0.0)
            throw ConsistencyError("KnnState::delete_entries: dimension " + std::to_string(dim) +
                                   " not present in entity " + std::to_string(entity));
    SparseVector reduced;
    for (std::size_t i = 0; i < rows_[e].indices.size(); ++i) {
        if (!to_drop.contains(rows_[e].indices[i])) {
            reduced.indices.push_back(rows_[e].indices[i]);
            reduced.values.push_back(rows_[e].values[i]);
        }
    }
    update_row(entity, std::move(reduced));
}

const std::vector<Neighbor>& KnnState::neighbors(std::int32_t entity) const {
    return topk_.at(static_cast<std::size_t>(entity));
}

const SparseVector& KnnState::row(std::int32_t entity) const {
    return rows_.at(static_cast<std::size_t>(entity));
}

double KnnState::row_norm(std::int32_t entity) const {
    return norms_.at(static_cast<std::size_t>(entity));
}

double KnnState::similarity(std::int32_t a, std::int32_t b) const {
    const auto& d = dots_.at(static_cast<std::size_t>(a));
    auto it = d.find(b);
    if (it == d.end()) return 0.0;
    const double denom = norms_[static_cast<std::size_t>(a)] * norms_[static_cast<std::size_t>(b)];
    return denom > 0.0 ? it->second / denom : 0.0;
}

bool KnnState::equals(const KnnState& other, double tol) const {
    if (rows_.size() != other.rows_.size() || k_ != other.k_) return false;
    for (std::size_t e = 0; e < rows_.size(); ++e) {
        if (std::abs(norms_[e] - other.norms_[e]) > tol) return false;
        if (topk_[e].size() != other.topk_[e].size()) return false;
        for (std::size_t i = 0; i < topk_[e].size(); ++i) {
            if (topk_[e][i].entity != other.topk_[e][i].entity) return false;
            if (std::abs(topk_[e][i].similarity - other.topk_[e][i].similarity) > tol) return false;
        }
    }
    return true;
}

}  // namespace unrec
