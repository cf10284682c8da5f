#include "vasso/quadratic.hpp"

#include <cmath>

namespace vasso {

NoisyQuadratic::NoisyQuadratic(DenseMatrix A, ParamVector b, double sigma, std::uint64_t noise_seed)
    : A_(std::move(A)), b_(std::move(b)), sigma_(sigma), noise_seed_(noise_seed), lambda_max_(0.0) {
    if (A_.rows() > 0) {
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(A_, Eigen::EigenvaluesOnly);
        lambda_max_ = es.eigenvalues().maxCoeff();
    }
}

ParamVector NoisyQuadratic::batch_noise(BatchView batch) const {
    ParamVector zeta = ParamVector::Zero(dim());
    if (sigma_ == 0.0 || batch.empty()) {
        return zeta;
    }
    for (const std::size_t idx : batch) {
        Rng rng(noise_seed_, static_cast<std::uint64_t>(idx));
        for (Eigen::Index j = 0; j < zeta.size(); ++j) {
            zeta[j] += rng.normal();
        }
    }
    zeta *= sigma_ / static_cast<double>(batch.size());
    return zeta;
}

LossGrad NoisyQuadratic::loss_grad(const ParamVector& x, BatchView batch) const {
    if (x.size() != dim()) {
        throw DimensionError("quadratic: x has dimension " + std::to_string(x.size()) +
                             ", expected " + std::to_string(dim()));
    }
    const ParamVector zeta = batch_noise(batch);
    const ParamVector Ax = A_ * x;
    LossGrad out;
    out.loss = 0.5 * x.dot(Ax) + (b_ + zeta).dot(x);
    out.grad = Ax + b_ + zeta;
    return out;
}

double NoisyQuadratic::full_loss(const ParamVector& x) const {
    return 0.5 * x.dot(A_ * x) + b_.dot(x);
}

ParamVector NoisyQuadratic::full_grad(const ParamVector& x) const {
    require_same_dim(x, b_, "quadratic full_grad");
    return A_ * x + b_;
}

ParamVector NoisyQuadratic::hvp(const ParamVector& /*x*/, const ParamVector& v) const {
    require_same_dim(v, b_, "quadratic hvp");
    return A_ * v;
}

double NoisyQuadratic::noise_variance() const {
    return static_cast<double>(dim()) * sigma_ * sigma_;
}

std::unique_ptr<NoisyQuadratic> quadratic_objective(DenseMatrix A, ParamVector b, double sigma,
                                                    std::uint64_t noise_seed) {
    if (A.rows() != A.cols()) {
        throw DimensionError("quadratic: A must be square");
    }
    if (A.rows() != b.size()) {
        throw DimensionError("quadratic: A and b dimensions differ");
    }
    if (A.rows() == 0) {
        throw DimensionError("quadratic: empty problem");
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw Error("quadratic: sigma must be finite and nonnegative");
    }
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw Error("quadratic: A is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(A, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
        throw Error("quadratic: A is not positive semidefinite");
    }
    return std::make_unique<NoisyQuadratic>(std::move(A), std::move(b), sigma, noise_seed);
}

std::unique_ptr<NoisyQuadratic> diagonal_quadratic(const ParamVector& spectrum, double sigma,
                                                   std::uint64_t noise_seed) {
    return quadratic_objective(spectrum.asDiagonal(), ParamVector::Zero(spectrum.size()), sigma,
                               noise_seed);
}

}  // namespace vasso
