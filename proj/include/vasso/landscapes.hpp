#ifndef VASSO_LANDSCAPES_HPP
#define VASSO_LANDSCAPES_HPP

#include <array>
#include <memory>
#include <vector>

#include "vasso/objective.hpp"

namespace vasso {

/// q(x) = floor + curvature / 2 * (x - center)^2
struct Basin {
    double center = 0.0;
    double curvature = 1.0;
    double floor = 0.0;
};

/// One-dimensional landscape made of quadratic basins joined by a soft minimum,
///   f(x) = -tau log sum_k exp(-q_k(x) / tau),
/// with optional additive gradient noise keyed by sample id (as in
/// NoisyQuadratic). Each basin keeps its own curvature up to the ridge.
class WellsObjective final : public StochasticObjective {
public:
    WellsObjective(std::vector<Basin> basins, double temperature, double sigma, std::uint64_t noise_seed);

    Eigen::Index dim() const override { return 1; }
    std::size_t num_samples() const override { return 0; }
    std::string name() const override { return "wells"; }

    LossGrad loss_grad(const ParamVector& x, BatchView batch) const override;
    double full_loss(const ParamVector& x) const override;
    ParamVector full_grad(const ParamVector& x) const override;
    bool has_analytic_hvp() const override { return true; }
    ParamVector hvp(const ParamVector& x, const ParamVector& v) const override;
    double noise_variance() const override { return sigma_ * sigma_; }

    double value(double x) const;
    double slope(double x) const;
    double curvature(double x) const;

    const std::vector<Basin>& basins() const { return basins_; }

private:
    std::vector<double> weights(double x, double& q_min) const;

    std::vector<Basin> basins_;
    double temperature_;
    double sigma_;
    std::uint64_t noise_seed_;
};

/// A sharp deep basin at -1 (curvature 50) beside a flat shallower one at +2
/// (curvature 1, floor 0.1).
std::unique_ptr<WellsObjective> sharp_flat_wells(double sigma = 0.0, std::uint64_t noise_seed = 0);

/// Four-sample dataset with per-sample loss l_i(w) = a_i w^2 + b_i w and
/// (a, b) = (0, 1), (0, -1), (-1, 0), (1, 0).
enum class Partition {
    by_b,  ///< {1, 2} and {3, 4}
    by_a,  ///< {1, 3} and {2, 4}
};

/// Summed loss of one partition cell as a function of (w, delta).
struct PartitionLoss {
    double a = 0.0;
    double b = 0.0;

    double operator()(double w, double delta) const {
        const double u = w + delta;
        return a * u * u + b * u;
    }
    /// max over |delta| <= rho, in closed form.
    double max_over_ball(double w, double rho) const;
};

struct MSharpnessExample {
    std::array<PartitionLoss, 2> cells;

    /// 2-sharpness objective: sum over cells of the worst-case cell loss.
    double objective(double w, double rho) const {
        return cells[0].max_over_ball(w, rho) + cells[1].max_over_ball(w, rho);
    }
};

MSharpnessExample m_sharpness_example(Partition partition);

}  // namespace vasso

#endif  // VASSO_LANDSCAPES_HPP
