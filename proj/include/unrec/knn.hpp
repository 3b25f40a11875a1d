#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace unrec {

// Sparse row with ascending indices and strictly positive values.
struct SparseVector {
    std::vector<std::int32_t> indices;
    std::vector<double> values;

    std::size_t nnz() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
    double at(std::int32_t dim) const;
};

struct Neighbor {
    std::int32_t entity = -1;
    double similarity = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Cosine top-k index with maintained pairwise dot products, supporting exact
// incremental deletion: after any sequence of row updates the state is
// bit-identical to a fresh build over the reduced data. Dot products are
// always evaluated from the raw rows in ascending-dimension order, so
// incremental repair and full rebuild share one code path.
class KnnState {
public:
    KnnState() = default;
    static KnnState build(std::vector<SparseVector> rows, int k);

    // Replace a row entirely; repairs partial sums, norms and all affected
    // top-k lists.
    void update_row(std::int32_t entity, SparseVector new_row);

    // Remove specific coordinates from a row. Every dim must be present.
    void delete_entries(std::int32_t entity, std::span<const std::int32_t> dims);

    const std::vector<Neighbor>& neighbors(std::int32_t entity) const;
    const SparseVector& row(std::int32_t entity) const;
    double row_norm(std::int32_t entity) const;
    double similarity(std::int32_t a, std::int32_t b) const;
    int k() const { return k_; }
    std::int32_t n_entities() const { return static_cast<std::int32_t>(rows_.size()); }

    bool equals(const KnnState& other, double tol) const;

private:
    int k_ = 0;
    std::vector<SparseVector> rows_;
    std::vector<double> norms_;
    // Symmetric sparse dot products; dots_[a][b] present iff overlap nonzero.
    std::vector<std::unordered_map<std::int32_t, double>> dots_;
    // dim -> entities whose row currently touches that dim.
    std::unordered_map<std::int32_t, std::vector<std::int32_t>> postings_;
    std::vector<std::vector<Neighbor>> topk_;

    void rebuild_topk(std::int32_t entity);
    std::vector<std::int32_t> overlap_candidates(const SparseVector& row, std::int32_t self) const;
};

double sparse_dot(const SparseVector& a, const SparseVector& b);
double sparse_norm(const SparseVector& a);

}  // namespace unrec
