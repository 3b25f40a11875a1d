#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unrec/rng.hpp"

namespace unrec {

// Named contiguous ranges over a flat parameter array.
struct Segment {
    std::string name;
    std::vector<std::int64_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

class SegmentLayout {
public:
    SegmentLayout() = default;
    static SegmentLayout build(
        const std::vector<std::pair<std::string, std::vector<std::int64_t>>>& specs);

    std::size_t total() const { return total_; }
    const Segment& at(std::string_view name) const;
    bool has(std::string_view name) const;
    const std::vector<Segment>& segments() const { return segments_; }

private:
    std::vector<Segment> segments_;
    std::size_t total_ = 0;
};

// Flat vector of reals, optionally carrying the layout it was built against.
struct ParamVector {
    std::shared_ptr<const SegmentLayout> layout;
    std::vector<double> values;

    ParamVector() = default;
    explicit ParamVector(std::size_t n) : values(n, 0.0) {}
    ParamVector(std::shared_ptr<const SegmentLayout> l, std::vector<double> v)
        : layout(std::move(l)), values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

// Sequential reductions in index-ascending order; reproducible across runs.
double dot(const ParamVector& a, const ParamVector& b);
double norm2(const ParamVector& a);
double norm_inf(const ParamVector& a);
void axpy(double alpha, const ParamVector& x, ParamVector& y);  // y += alpha * x
void scale(ParamVector& x, double alpha);
bool all_finite(const ParamVector& a);

// Callback computing v -> (H + damping I) v for a fixed loss/parameters/data.
struct HvpOracle {
    std::function<ParamVector(const ParamVector&)> apply;
    double damping = 0.0;
};

struct CgResult {
    ParamVector x;
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

// Solves (H + damping I) x = g with plain conjugate gradients. Returns the
// iterate with the smallest residual seen if max_iter is exhausted or a
// direction of non-positive curvature is met. Throws NumericalError when
// non-finite values appear.
CgResult conjugate_gradient(const HvpOracle& oracle, const ParamVector& g, int max_iter,
                            double tol);

// Max relative error between an analytic gradient and central differences of
// `loss`. When max_coords < dimension, a seeded coordinate subset is probed.
double finite_diff_gradient_check(const std::function<double(const ParamVector&)>& loss,
                                  const ParamVector& theta, const ParamVector& analytic_grad,
                                  double eps, std::size_t max_coords = 0,
                                  std::uint64_t probe_seed = 0);

// KL(softmax(p) || softmax(q)) computed in log-space. Never negative.
double softmax_kl(std::span<const double> p_logits, std::span<const double> q_logits);

// log(sum(exp(x))) with max-shift, sequential order.
double log_sum_exp(std::span<const double> x);

}  // namespace unrec
