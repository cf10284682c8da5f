#ifndef VASSO_QUADRATIC_HPP
#define VASSO_QUADRATIC_HPP

#include <memory>

#include "vasso/objective.hpp"

namespace vasso {

/// f(x) = 1/2 x^T A x + b^T x with additive isotropic gradient noise.
///
/// Streaming objective: sample id i carries its own noise vector
/// zeta_i ~ N(0, sigma^2 I), generated from (noise_seed, i). A batch sees the
/// mean of its samples' noise, so g_B(x) = A x + b + zeta_B and repeated
/// evaluations on the same batch agree exactly. The per-sample loss is
/// f(x) + zeta_i^T x.
class NoisyQuadratic final : public StochasticObjective {
public:
    NoisyQuadratic(DenseMatrix A, ParamVector b, double sigma, std::uint64_t noise_seed);

    Eigen::Index dim() const override { return b_.size(); }
    std::size_t num_samples() const override { return 0; }
    std::string name() const override { return "quadratic"; }

    LossGrad loss_grad(const ParamVector& x, BatchView batch) const override;
    double full_loss(const ParamVector& x) const override;
    ParamVector full_grad(const ParamVector& x) const override;
    bool has_analytic_hvp() const override { return true; }
    ParamVector hvp(const ParamVector& x, const ParamVector& v) const override;

    /// dim * sigma^2
    double noise_variance() const override;
    /// Largest eigenvalue of A.
    double lipschitz() const override { return lambda_max_; }

    const DenseMatrix& hessian() const { return A_; }
    const ParamVector& linear() const { return b_; }
    double sigma() const { return sigma_; }

    /// Mean noise vector of a batch.
    ParamVector batch_noise(BatchView batch) const;

private:
    DenseMatrix A_;
    ParamVector b_;
    double sigma_;
    std::uint64_t noise_seed_;
    double lambda_max_;
};

/// Validates A (square, symmetric, PSD) and builds the objective.
std::unique_ptr<NoisyQuadratic> quadratic_objective(DenseMatrix A, ParamVector b, double sigma,
                                                    std::uint64_t noise_seed);

/// Diagonal A with the given spectrum.
std::unique_ptr<NoisyQuadratic> diagonal_quadratic(const ParamVector& spectrum, double sigma,
                                                   std::uint64_t noise_seed);

}  // namespace vasso

#endif  // VASSO_QUADRATIC_HPP
