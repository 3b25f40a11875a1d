#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <set>
#include <unordered_set>

#include "unrec/errors.hpp"
#include "unrec/unlearn.hpp"

namespace unrec {

SubsetSelector resolve_subset(const SubsetPolicy& policy, std::int32_t forget_user) {
    SubsetSelector sel;
    sel.all_user_rows = policy.all_user_rows;
    if (!policy.all_user_rows && policy.affected_user_rows) sel.user_rows = {forget_user};
    sel.item_table = policy.item_table;
    sel.item_bias = policy.item_bias;
    return sel;
}

namespace {

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    const auto dt = std::chrono::steady_clock::now() - t0;
    const double s = std::chrono::duration<double>(dt).count();
    return std::max(s, 1e-9);
}

}  // namespace

ScifSystem scif_build_system(const MfModel& model, const RetainView& retain,
                             const ForgetRequest& forget, const ScifConfig& cfg, RngStream rng) {
    if (forget.interactions.empty())
        throw EmptyInputError("scif: empty forget request");
    if (cfg.bs < 0) throw std::invalid_argument("scif: bs must be >= 0");

    // Items being unlearned never serve as negatives, and neither does the
    // rest of their category: the removal step pushes negatives up, which
    // must not re-promote the very category being deleted.
    std::unordered_set<std::int32_t> neg_exclude;
    for (const auto& it : forget.interactions) {
        neg_exclude.insert(it.item);
        if (it.category >= 0) {
            const auto& cat = retain.items_in_category(it.category);
            neg_exclude.insert(cat.begin(), cat.end());
        }
    }

    RngStream neg_rng = rng.substream("forget-neg");
    const std::int32_t n_items = model.n_items();
    auto draw_negative = [&](std::int32_t user, RngStream& r) {
        const auto& owned = retain.user_items(user);
        for (int tries = 0; tries < 2000; ++tries) {
            const auto cand = static_cast<std::int32_t>(r.uniform_int(static_cast<std::uint64_t>(n_items)));
            if (owned.contains(cand) || neg_exclude.contains(cand)) continue;
            return cand;
        }
        throw EmptyInputError("scif: no negative item available");
    };

    ScifSystem sys;
    // z: the forget interactions as BPR terms.
    std::vector<BprSample> forget_triples;
    for (const auto& it : forget.interactions)
        forget_triples.push_back(BprSample{it.user, it.item, draw_negative(it.user, neg_rng)});

    // z_bar: forget triples with the positive swapped for a retained item of
    // the same user; only meaningful in replacement mode.
    std::vector<BprSample> replacement_triples;
    bool replacement = cfg.replacement_mode;
    if (replacement) {
        RngStream rep_rng = rng.substream("replacement");
        const auto& owned = retain.user_items(forget.user);
        if (owned.empty()) {
            replacement = false;  // nothing to replace with; fall back to pure deletion
        } else {
            std::vector<std::int32_t> retained;
            retained.reserve(owned.size());
            for (const auto& [item, count] : owned) retained.push_back(item);
            std::sort(retained.begin(), retained.end());
            for (const auto& t : forget_triples) {
                const std::int32_t pos = retained[rep_rng.uniform_int(retained.size())];
                replacement_triples.push_back(BprSample{t.user, pos, draw_negative(t.user, rep_rng)});
            }
        }
    }

    RngStream retain_rng = rng.substream("retain-samples");
    std::vector<BprSample> retain_triples;
    for (int i = 0; i < cfg.bs; ++i) retain_triples.push_back(retain.sample_triple(retain_rng));

    // Pure deletion drops the replacement term and renormalizes by (1 + bs).
    const double denom = replacement ? (2.0 + cfg.bs) : (1.0 + cfg.bs);
    for (const auto& t : forget_triples) {
        sys.samples.push_back(t);
        sys.weights.push_back(-1.0 / denom);
    }
    for (const auto& t : replacement_triples) {
        sys.samples.push_back(t);
        sys.weights.push_back(1.0 / denom);
    }
    for (const auto& t : retain_triples) {
        sys.samples.push_back(t);
        sys.weights.push_back(1.0 / denom);
    }

    sys.subset = resolve_subset(cfg.subset, forget.user);
    const std::vector<char> mask = sys.subset.mask(model);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) sys.coords.push_back(i);

    // The curvature is that of the plain loss over the same sample
    // collection; only the gradient carries the removal sign. The oracle
    // works in the compact subset space with preallocated scratch.
    sys.hessian_weights.resize(sys.weights.size());
    for (std::size_t i = 0; i < sys.weights.size(); ++i)
        sys.hessian_weights[i] = std::abs(sys.weights[i]);

    struct Scratch {
        std::vector<double> plus, minus, gp, gm;
        std::vector<std::size_t> touched;  // coords any sample writes
    };
    auto scratch = std::make_shared<Scratch>();
    scratch->plus = model.params();
    scratch->minus = model.params();
    scratch->gp.assign(model.params().size(), 0.0);
    scratch->gm.assign(model.params().size(), 0.0);
    {
        auto& touched = scratch->touched;
        const auto d = static_cast<std::size_t>(model.hyper().d);
        for (const auto& s : sys.samples) {
            for (std::size_t k = 0; k < d; ++k) {
                touched.push_back(model.user_offset(s.user) + k);
                touched.push_back(model.item_offset(s.pos) + k);
                touched.push_back(model.item_offset(s.neg) + k);
            }
            touched.push_back(model.bias_offset(s.pos));
            touched.push_back(model.bias_offset(s.neg));
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    }

    // Compact gradient over the subset coordinates, accumulated in scratch.
    sys.gradient = ParamVector(nullptr, std::vector<double>(sys.coords.size()));
    for (std::size_t i = 0; i < sys.samples.size(); ++i)
        bpr_grad_accumulate(model.params(), model, sys.samples[i], sys.weights[i], scratch->gp);
    for (std::size_t i = 0; i < sys.coords.size(); ++i)
        sys.gradient.values[i] = scratch->gp[sys.coords[i]];
    for (std::size_t c : scratch->touched) scratch->gp[c] = 0.0;

    ParamVector theta(model.layout(), model.params());
    const double eps = 1e-4 * (1.0 + norm_inf(theta));
    const double damping = cfg.damping;

    HvpOracle oracle;
    oracle.damping = damping;
    oracle.apply = [&model, scratch, coords = sys.coords, samples = sys.samples,
                    hweights = sys.hessian_weights, eps, damping](const ParamVector& v) {
        if (v.size() != coords.size()) throw ShapeError("scif hvp: compact size mismatch");
        auto& s = *scratch;
        for (std::size_t i = 0; i < coords.size(); ++i) {
            s.plus[coords[i]] += eps * v.values[i];
            s.minus[coords[i]] -= eps * v.values[i];
        }
        for (std::size_t c : s.touched) {
            s.gp[c] = 0.0;
            s.gm[c] = 0.0;
        }
        for (std::size_t k = 0; k < samples.size(); ++k) {
            bpr_grad_accumulate(s.plus, model, samples[k], hweights[k], s.gp);
            bpr_grad_accumulate(s.minus, model, samples[k], hweights[k], s.gm);
        }
        ParamVector out(nullptr, std::vector<double>(coords.size()));
        for (std::size_t i = 0; i < coords.size(); ++i)
            out.values[i] =
                (s.gp[coords[i]] - s.gm[coords[i]]) / (2.0 * eps) + damping * v.values[i];
        // Restore the perturbed coordinates for the next application.
        const auto& params = model.params();
        for (std::size_t i = 0; i < coords.size(); ++i) {
            s.plus[coords[i]] = params[coords[i]];
            s.minus[coords[i]] = params[coords[i]];
        }
        return out;
    };
    sys.oracle = std::move(oracle);
    return sys;
}

UnlearnOutcome scif_unlearn(MfModel& model, const RetainView& retain, const ForgetRequest& forget,
                            const ScifConfig& cfg, RngStream rng) {
    UnlearnOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        ScifSystem sys = scif_build_system(model, retain, forget, cfg, rng);
        const double gnorm = norm2(sys.gradient);
        out.diagnostics["gradient_norm"] = gnorm;
        if (gnorm == 0.0) {
            out.wall_time_s = elapsed_s(t0);
            return out;  // zero gradient: nothing to apply
        }

        CgResult cg = conjugate_gradient(sys.oracle, sys.gradient, cfg.cg_max_iter, cfg.cg_tol);
        out.diagnostics["cg_iterations"] = cg.iterations;
        out.diagnostics["cg_relative_residual"] = cg.relative_residual;
        out.diagnostics["cg_converged"] = cg.converged ? 1.0 : 0.0;

        if (!all_finite(cg.x)) {
            out.failed = true;
            out.failure_reason = "non-finite update";
            out.wall_time_s = elapsed_s(t0);
            return out;
        }

        const double step_norm = norm2(cg.x);
        out.update_norm = step_norm;  // recorded before clipping
        double factor = 1.0;
        if (cfg.clip && step_norm > *cfg.clip) factor = *cfg.clip / step_norm;
        out.diagnostics["applied_norm"] = step_norm * factor;

        auto& params = model.params();
        for (std::size_t i = 0; i < sys.coords.size(); ++i)
            params[sys.coords[i]] -= factor * cg.x.values[i];
    } catch (const NumericalError& e) {
        out.failed = true;
        out.failure_reason = e.what();
    }
    out.wall_time_s = elapsed_s(t0);
    return out;
}

UnlearnOutcome exact_knn_unlearn(TifuModel& model, const ForgetRequest& forget) {
    UnlearnOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    model.remove_user_interactions(forget.user, forget.interactions);
    out.diagnostics["deleted"] = static_cast<double>(forget.interactions.size());
    out.wall_time_s = elapsed_s(t0);
    return out;
}

UnlearnOutcome exact_knn_unlearn(ItemKnnModel& model, const ForgetRequest& forget) {
    UnlearnOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    model.remove_user_interactions(forget.user, forget.interactions);
    out.diagnostics["deleted"] = static_cast<double>(forget.interactions.size());
    out.wall_time_s = elapsed_s(t0);
    return out;
}

}  // namespace unrec
