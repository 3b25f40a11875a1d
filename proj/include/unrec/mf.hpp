#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "unrec/corpus.hpp"
#include "unrec/numerics.hpp"
#include "unrec/recommender.hpp"

namespace unrec {

struct MfHyper {
    int d = 16;
    double reg = 1e-4;
    double lr = 0.05;
    int epochs = 20;
    int negatives_per_positive = 1;

    friend bool operator==(const MfHyper&, const MfHyper&) = default;
};

// BPR triple: positive from the user's train set, negative sampled outside it.
struct BprSample {
    std::int32_t user = -1;
    std::int32_t pos = -1;
    std::int32_t neg = -1;
};

// Matrix-factorization recommender with item biases.
// score(u,i) = <U_u, V_i> + b_i over the flat parameter layout
// [user_embeddings (n_users x d), item_embeddings (n_items x d), item_bias (n_items)].
class MfModel : public Recommender {
public:
    MfModel(std::int32_t n_users, std::int32_t n_items, MfHyper hyper, std::uint64_t seed);

    std::int32_t n_users() const override { return n_users_; }
    std::int32_t n_items() const override { return n_items_; }
    double score(std::int32_t user, std::int32_t item) const override;
    void score_all(std::int32_t user, std::span<double> out) const override;

    const MfHyper& hyper() const { return hyper_; }
    std::uint64_t seed() const { return seed_; }
    std::shared_ptr<const SegmentLayout> layout() const { return layout_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    std::span<double> user_row(std::int32_t u);
    std::span<const double> user_row(std::int32_t u) const;
    std::span<double> item_row(std::int32_t i);
    std::span<const double> item_row(std::int32_t i) const;
    double& item_bias(std::int32_t i);
    double item_bias(std::int32_t i) const;

    std::size_t user_offset(std::int32_t u) const;
    std::size_t item_offset(std::int32_t i) const;
    std::size_t bias_offset(std::int32_t i) const;

private:
    std::int32_t n_users_;
    std::int32_t n_items_;
    MfHyper hyper_;
    std::uint64_t seed_;
    std::shared_ptr<const SegmentLayout> layout_;
    std::vector<double> params_;
};

// Which parameter coordinates an update or derivative is restricted to.
struct SubsetSelector {
    bool all_user_rows = false;
    std::vector<std::int32_t> user_rows;  // specific rows, ignored when all_user_rows
    bool item_table = false;
    bool item_bias = false;

    static SubsetSelector all() { return {true, {}, true, true}; }
    static SubsetSelector users_and_items(std::vector<std::int32_t> users) {
        return {false, std::move(users), true, false};
    }
    // 1 where selected, per flat coordinate.
    std::vector<char> mask(const MfModel& model) const;
};

struct TrainDiagnostics {
    std::vector<double> epoch_loss;  // mean per-sample loss, one entry per epoch
};

// Seeded BPR-SGD training. Deterministic for a fixed (split, hyper, seed).
MfModel train_mf_bpr(const SplitDataset& split, const MfHyper& hyper, std::uint64_t seed,
                     TrainDiagnostics* diagnostics = nullptr);

// Per-sample BPR loss at arbitrary parameter values.
double bpr_loss_at(std::span<const double> params, const MfModel& shape, const BprSample& s);

// grad += weight * d loss(s) / d params, at arbitrary parameter values.
void bpr_grad_accumulate(std::span<const double> params, const MfModel& shape, const BprSample& s,
                         double weight, std::span<double> grad);

// Mean gradient over `samples` on the selected segments, zero elsewhere.
ParamVector mf_gradient(const MfModel& model, std::span<const BprSample> samples,
                        const SubsetSelector& subset);

// Weighted-sum gradient at arbitrary parameters, masked to `subset`.
ParamVector mf_weighted_gradient_at(const MfModel& shape, std::span<const double> params,
                                    std::span<const BprSample> samples,
                                    std::span<const double> weights, const SubsetSelector& subset);

// v -> (H + damping I) v where H is the Hessian of the weighted sample loss,
// restricted to the subset, approximated by central differences of the
// analytic gradient with step eps = 1e-4 * (1 + |theta|_inf).
HvpOracle mf_hvp_oracle(const MfModel& model, std::vector<BprSample> samples,
                        std::vector<double> weights, SubsetSelector subset, double damping);

HvpOracle mf_hvp_oracle(const MfModel& model, std::vector<BprSample> samples,
                        const SubsetSelector& subset, double damping);

}  // namespace unrec
