#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unrec/itemknn.hpp"
#include "unrec/mf.hpp"
#include "unrec/retain.hpp"
#include "unrec/rng.hpp"
#include "unrec/tifu.hpp"

namespace unrec {

struct UnlearnOutcome {
    double wall_time_s = 0.0;
    double update_norm = 0.0;  // l2 norm of the parameter delta, before clipping for SCIF
    bool failed = false;
    std::string failure_reason;
    std::map<std::string, double> diagnostics;
};

// Which parameter segments an unlearner touches.
struct SubsetPolicy {
    bool affected_user_rows = true;  // rows of the users in the forget request
    bool all_user_rows = false;
    bool item_table = true;
    bool item_bias = false;
};

SubsetSelector resolve_subset(const SubsetPolicy& policy, std::int32_t forget_user);

struct ScifConfig {
    int bs = 32;               // retain samples included in the update
    double damping = 0.01;     // lambda
    std::optional<double> clip = 1.0;  // absent = unclipped variant
    int cg_max_iter = 32;
    double cg_tol = 1e-6;
    bool replacement_mode = false;  // keep the replacement term (z -> z_bar)
    SubsetPolicy subset;
};

struct KookminConfig {
    double p = 0.01;  // reset fraction of all parameters, in (0, 1]
    int retain_rounds = 5;
    int retain_multiplier = 32;  // samples per round = multiplier * |D_f|
    double lr = 0.05;
    double reduced_lr_factor = 0.1;  // applied to coordinates that were not reset
    double reinit_std = 0.02;
};

struct FanchuanConfig {
    int forget_epochs = 8;
    int repair_epochs = 4;          // alternates contrastive / retain-training modes
    int retain_cap_multiplier = 10; // retain samples per repair round = 10 * |D_f|
    int contrastive_retain_count = 16;
    double temperature = 1.0;
    double lr = 0.05;
    int candidate_samples = 99;  // sampled items added to the forget items for the softmax
};

// The linear system behind one SCIF update; exposed so tests can compare the
// CG route against a dense solve of the same operator.
struct ScifSystem {
    std::vector<BprSample> samples;
    std::vector<double> weights;          // signed, for the gradient
    std::vector<double> hessian_weights;  // absolute, for the curvature
    SubsetSelector subset;
    std::vector<std::size_t> coords;  // flat parameter indices of the subset
    ParamVector gradient;             // compact, one entry per coords[i]
    HvpOracle oracle;                 // compact v -> compact (H + damping I) v
};

ScifSystem scif_build_system(const MfModel& model, const RetainView& retain,
                             const ForgetRequest& forget, const ScifConfig& cfg, RngStream rng);

UnlearnOutcome scif_unlearn(MfModel& model, const RetainView& retain, const ForgetRequest& forget,
                            const ScifConfig& cfg, RngStream rng);

// Coordinate selection used by kookmin_unlearn: the floor(p*|theta|) indices
// with the smallest |grad_forget - grad_retain|, ties by ascending index.
std::vector<std::size_t> kookmin_select(const std::vector<double>& forget_grad,
                                        const std::vector<double>& retain_grad, double p);

UnlearnOutcome kookmin_unlearn(MfModel& model, const RetainView& retain,
                               const ForgetRequest& forget, const KookminConfig& cfg,
                               RngStream rng);

UnlearnOutcome fanchuan_unlearn(MfModel& model, const RetainView& retain,
                                const ForgetRequest& forget, const FanchuanConfig& cfg,
                                RngStream rng);

UnlearnOutcome exact_knn_unlearn(TifuModel& model, const ForgetRequest& forget);
UnlearnOutcome exact_knn_unlearn(ItemKnnModel& model, const ForgetRequest& forget);

}  // namespace unrec
