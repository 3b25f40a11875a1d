#include "unrec/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "unrec/errors.hpp"

namespace unrec {

SegmentLayout SegmentLayout::build(
    const std::vector<std::pair<std::string, std::vector<std::int64_t>>>& specs) {
    SegmentLayout l;
    std::size_t offset = 0;
    for (const auto& [name, shape] : specs) {
        std::size_t size = 1;
        for (std::int64_t d : shape) {
            if (d < 0) throw ShapeError("segment '" + name + "' has negative dimension");
            size *= static_cast<std::size_t>(d);
        }
        l.segments_.push_back(Segment{name, shape, offset, size});
        offset += size;
    }
    l.total_ = offset;
    return l;
}

const Segment& SegmentLayout::at(std::string_view name) const {
    for (const auto& s : segments_)
        if (s.name == name) return s;
    throw std::out_of_range("no segment named '" + std::string(name) + "'");
}

bool SegmentLayout::has(std::string_view name) const {
    for (const auto& s : segments_)
        if (s.name == name) return true;
    return false;
}

double dot(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.values[i] * b.values[i];
    return acc;
}

double norm2(const ParamVector& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const ParamVector& a) {
    double m = 0.0;
    for (double v : a.values) m = std::max(m, std::abs(v));
    return m;
}

void axpy(double alpha, const ParamVector& x, ParamVector& y) {
    if (x.size() != y.size()) throw ShapeError("axpy: size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y.values[i] += alpha * x.values[i];
}

void scale(ParamVector& x, double alpha) {
    for (double& v : x.values) v *= alpha;
}

bool all_finite(const ParamVector& a) {
    for (double v : a.values)
        if (!std::isfinite(v)) return false;
    return true;
}

CgResult conjugate_gradient(const HvpOracle& oracle, const ParamVector& g, int max_iter,
                            double tol) {
    const double gnorm = norm2(g);
    CgResult res;
    res.x = ParamVector(g.layout, std::vector<double>(g.size(), 0.0));
    if (gnorm == 0.0) {
        res.converged = true;
        return res;
    }

    ParamVector x = res.x;
    ParamVector r = g;  // r = g - A*0
    ParamVector p = r;
    double rs = dot(r, r);

    ParamVector best_x = x;
    double best_res = std::sqrt(rs);

    for (int it = 0; it < max_iter; ++it) {
        ParamVector ap = oracle.apply(p);
        if (!all_finite(ap)) throw NumericalError("conjugate_gradient: non-finite Hv", it);
        const double pap = dot(p, ap);
        if (!std::isfinite(pap)) throw NumericalError("conjugate_gradient: non-finite curvature", it);
        if (pap <= 0.0) {
            // Non-positive curvature: the operator is not SPD along p. On the
            // very first direction fall back to the damped-only pseudo-solve
            // (curvature treated as zero), otherwise keep the best iterate.
            res.iterations = it;
            if (it == 0) {
                res.x = g;
                if (oracle.damping > 0.0) scale(res.x, 1.0 / oracle.damping);
                ParamVector rr = oracle.apply(res.x);
                for (std::size_t i = 0; i < rr.size(); ++i)
                    rr.values[i] = g.values[i] - rr.values[i];
                res.relative_residual = norm2(rr) / gnorm;
            } else {
                // Partial Newton step: every CG iterate is a valid direction.
                res.x = x;
                res.relative_residual = norm2(r) / gnorm;
            }
            res.converged = false;
            return res;
        }
        const double alpha = rs / pap;
        axpy(alpha, p, x);
        axpy(-alpha, ap, r);
        if (!all_finite(x) || !all_finite(r))
            throw NumericalError("conjugate_gradient: non-finite iterate", it);
        const double rn = norm2(r);
        if (rn < best_res) {
            best_res = rn;
            best_x = x;
        }
        res.iterations = it + 1;
        if (rn <= tol * gnorm) {
            res.x = x;
            res.relative_residual = rn / gnorm;
            res.converged = true;
            return res;
        }
        const double rs_new = dot(r, r);
        const double beta = rs_new / rs;
        rs = rs_new;
        // p = r + beta p
        for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = r.values[i] + beta * p.values[i];
    }
    res.x = best_x;
    res.relative_residual = best_res / gnorm;
    res.converged = false;
    return res;
}

double finite_diff_gradient_check(const std::function<double(const ParamVector&)>& loss,
                                  const ParamVector& theta, const ParamVector& analytic_grad,
                                  double eps, std::size_t max_coords, std::uint64_t probe_seed) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff_gradient_check: eps must be positive");
    if (theta.size() != analytic_grad.size())
        throw ShapeError("finite_diff_gradient_check: size mismatch");

    std::vector<std::size_t> coords;
    const std::size_t n = theta.size();
    if (max_coords == 0 || max_coords >= n) {
        coords.resize(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
        RngStream rng(probe_seed);
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        for (std::size_t i = 0; i < max_coords; ++i) {
            const std::size_t j = i + rng.uniform_int(n - i);
            std::swap(all[i], all[j]);
            coords.push_back(all[i]);
        }
        std::sort(coords.begin(), coords.end());
    }

    double grad_scale = 0.0;
    for (std::size_t i : coords) grad_scale = std::max(grad_scale, std::abs(analytic_grad[i]));

    double max_rel = 0.0;
    ParamVector probe = theta;
    for (std::size_t i : coords) {
        const double orig = probe[i];
        probe.values[i] = orig + eps;
        const double lp = loss(probe);
        probe.values[i] = orig - eps;
        const double lm = loss(probe);
        probe.values[i] = orig;
        const double fd = (lp - lm) / (2.0 * eps);
        const double denom = std::max({std::abs(fd), std::abs(analytic_grad[i]), grad_scale, 1e-12});
        max_rel = std::max(max_rel, std::abs(fd - analytic_grad[i]) / denom);
    }
    return max_rel;
}

double log_sum_exp(std::span<const double> x) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : x) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double v : x) acc += std::exp(v - m);
    return m + std::log(acc);
}

double softmax_kl(std::span<const double> p_logits, std::span<const double> q_logits) {
    if (p_logits.size() != q_logits.size()) throw ShapeError("softmax_kl: length mismatch");
    if (p_logits.empty()) throw ShapeError("softmax_kl: empty input");
    const double lse_p = log_sum_exp(p_logits);
    const double lse_q = log_sum_exp(q_logits);
    double kl = 0.0;
    for (std::size_t i = 0; i < p_logits.size(); ++i) {
        const double logp = p_logits[i] - lse_p;
        const double logq = q_logits[i] - lse_q;
        kl += std::exp(logp) * (logp - logq);
    }
    return std::max(kl, 0.0);
}

}  // namespace unrec
