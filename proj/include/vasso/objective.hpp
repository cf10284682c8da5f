#ifndef VASSO_OBJECTIVE_HPP
#define VASSO_OBJECTIVE_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vasso/core.hpp"
#include "vasso/rng.hpp"

namespace vasso {

/// Minibatch as an explicit list of sample indices.
using Batch = std::vector<std::size_t>;
using BatchView = std::span<const std::size_t>;

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

/// f(x) = E_B[f_B(x)].
///
/// Objectives with a finite dataset report num_samples() > 0 and average over
/// the listed indices. Streaming objectives report 0: every index names an
/// independent sample, and full_* return the exact expectation.
class StochasticObjective {
public:
    virtual ~StochasticObjective() = default;

    virtual Eigen::Index dim() const = 0;
    virtual std::size_t num_samples() const = 0;
    virtual std::string name() const = 0;

    virtual LossGrad loss_grad(const ParamVector& x, BatchView batch) const = 0;
    virtual double loss(const ParamVector& x, BatchView batch) const { return loss_grad(x, batch).loss; }
    ParamVector grad(const ParamVector& x, BatchView batch) const { return loss_grad(x, batch).grad; }

    virtual double full_loss(const ParamVector& x) const = 0;
    virtual ParamVector full_grad(const ParamVector& x) const = 0;

    virtual bool has_analytic_hvp() const { return false; }
    /// Hessian of the full objective applied to v. Falls back to central
    /// differences of full_grad when no analytic form exists.
    virtual ParamVector hvp(const ParamVector& x, const ParamVector& v) const;

    /// Per-sample gradient noise E||g_i(x) - grad f(x)||^2 when known a priori,
    /// NaN otherwise.
    virtual double noise_variance() const { return std::numeric_limits<double>::quiet_NaN(); }

    /// Smoothness constant when known a priori, NaN otherwise.
    virtual double lipschitz() const { return std::numeric_limits<double>::quiet_NaN(); }
};

/// Default finite-difference step 1e-3 * (1 + ||x||_inf).
double default_hvp_step(const ParamVector& x);

/// (full_grad(x + h v/|v|) - full_grad(x - h v/|v|)) * |v| / (2h). Zero v maps
/// to zero.
ParamVector hvp_finite_difference(const StochasticObjective& obj, const ParamVector& x,
                                  const ParamVector& v, double h);
ParamVector hvp_finite_difference(const StochasticObjective& obj, const ParamVector& x,
                                  const ParamVector& v);

/// Draws minibatches. Finite datasets are traversed without replacement and
/// reshuffled every epoch (a trailing partial batch is dropped). Streaming
/// objectives get fresh random 64-bit sample ids.
class MinibatchSampler {
public:
    MinibatchSampler(std::size_t num_samples, std::size_t batch_size, Rng rng);

    Batch next();
    std::size_t batch_size() const { return batch_size_; }
    std::int64_t epoch() const { return epoch_; }

private:
    void reshuffle();

    std::size_t num_samples_;
    std::size_t batch_size_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::int64_t epoch_ = -1;
};

}  // namespace vasso

#endif  // VASSO_OBJECTIVE_HPP
