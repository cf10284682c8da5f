#include "vasso/landscapes.hpp"

#include <algorithm>
#include <cmath>

namespace vasso {

WellsObjective::WellsObjective(std::vector<Basin> basins, double temperature, double sigma,
                               std::uint64_t noise_seed)
    : basins_(std::move(basins)), temperature_(temperature), sigma_(sigma), noise_seed_(noise_seed) {
    if (basins_.empty()) throw Error("wells: need at least one basin");
    if (!(temperature_ > 0.0)) throw Error("wells: temperature must be positive");
    for (const auto& b : basins_) {
        if (!(b.curvature > 0.0)) throw Error("wells: curvatures must be positive");
    }
}

// Softmax weights of the basins at x, plus the smallest basin value.
std::vector<double> WellsObjective::weights(double x, double& q_min) const {
    std::vector<double> q(basins_.size());
    for (std::size_t k = 0; k < basins_.size(); ++k) {
        const double u = x - basins_[k].center;
        q[k] = basins_[k].floor + 0.5 * basins_[k].curvature * u * u;
    }
    q_min = *std::min_element(q.begin(), q.end());
    double total = 0.0;
    for (double& v : q) {
        v = std::exp(-(v - q_min) / temperature_);
        total += v;
    }
    for (double& v : q) v /= total;
    return q;
}

double WellsObjective::value(double x) const {
    double q_min = 0.0;
    double total = 0.0;
    weights(x, q_min);
    for (const auto& b : basins_) {
        const double u = x - b.center;
        total += std::exp(-(b.floor + 0.5 * b.curvature * u * u - q_min) / temperature_);
    }
    return q_min - temperature_ * std::log(total);
}

double WellsObjective::slope(double x) const {
    double q_min = 0.0;
    const auto w = weights(x, q_min);
    double g = 0.0;
    for (std::size_t k = 0; k < basins_.size(); ++k) {
        g += w[k] * basins_[k].curvature * (x - basins_[k].center);
    }
    return g;
}

double WellsObjective::curvature(double x) const {
    double q_min = 0.0;
    const auto w = weights(x, q_min);
    double mean_h = 0.0, mean_s = 0.0, mean_s2 = 0.0;
    for (std::size_t k = 0; k < basins_.size(); ++k) {
        const double s = basins_[k].curvature * (x - basins_[k].center);
        mean_h += w[k] * basins_[k].curvature;
        mean_s += w[k] * s;
        mean_s2 += w[k] * s * s;
    }
    return mean_h - (mean_s2 - mean_s * mean_s) / temperature_;
}

LossGrad WellsObjective::loss_grad(const ParamVector& x, BatchView batch) const {
    if (x.size() != 1) throw DimensionError("wells: objective is one-dimensional");
    double zeta = 0.0;
    if (sigma_ > 0.0 && !batch.empty()) {
        for (const std::size_t idx : batch) {
            Rng rng(noise_seed_, static_cast<std::uint64_t>(idx));
            zeta += rng.normal();
        }
        zeta *= sigma_ / static_cast<double>(batch.size());
    }
    LossGrad out;
    out.loss = value(x[0]) + zeta * x[0];
    out.grad = ParamVector::Constant(1, slope(x[0]) + zeta);
    return out;
}

double WellsObjective::full_loss(const ParamVector& x) const {
    if (x.size() != 1) throw DimensionError("wells: objective is one-dimensional");
    return value(x[0]);
}

ParamVector WellsObjective::full_grad(const ParamVector& x) const {
    if (x.size() != 1) throw DimensionError("wells: objective is one-dimensional");
    return ParamVector::Constant(1, slope(x[0]));
}

ParamVector WellsObjective::hvp(const ParamVector& x, const ParamVector& v) const {
    if (x.size() != 1 || v.size() != 1) throw DimensionError("wells: objective is one-dimensional");
    return ParamVector::Constant(1, curvature(x[0]) * v[0]);
}

std::unique_ptr<WellsObjective> sharp_flat_wells(double sigma, std::uint64_t noise_seed) {
    return std::make_unique<WellsObjective>(std::vector<Basin>{{-1.0, 50.0, 0.0}, {2.0, 1.0, 0.1}}, 0.01, sigma,
                                            noise_seed);
}

double PartitionLoss::max_over_ball(double w, double rho) const {
    // Quadratic in u = w + delta on [w - rho, w + rho]: the max sits at an
    // endpoint, or at the vertex of a concave parabola.
    const double lo = w - rho;
    const double hi = w + rho;
    auto q = [this](double u) { return a * u * u + b * u; };
    double best = std::max(q(lo), q(hi));
    if (a < 0.0) {
        const double vertex = -b / (2.0 * a);
        if (vertex > lo && vertex < hi) best = std::max(best, q(vertex));
    }
    return best;
}

MSharpnessExample m_sharpness_example(Partition partition) {
    constexpr std::array<std::array<double, 2>, 4> samples{{{0, 1}, {0, -1}, {-1, 0}, {1, 0}}};
    auto cell = [&](int i, int j) {
        return PartitionLoss{samples[i][0] + samples[j][0], samples[i][1] + samples[j][1]};
    };
    if (partition == Partition::by_b) {
        return {{cell(0, 1), cell(2, 3)}};
    }
    return {{cell(0, 2), cell(1, 3)}};
}

}  // namespace vasso
