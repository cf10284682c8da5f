#include "vasso/objective.hpp"

#include <algorithm>

namespace vasso {

ParamVector StochasticObjective::hvp(const ParamVector& x, const ParamVector& v) const {
    return hvp_finite_difference(*this, x, v);
}

double default_hvp_step(const ParamVector& x) {
    const double inf_norm = x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
    return 1e-3 * (1.0 + inf_norm);
}

ParamVector hvp_finite_difference(const StochasticObjective& obj, const ParamVector& x,
                                  const ParamVector& v, double h) {
    if (!(h > 0.0)) {
        throw Error("hvp_finite_difference: step must be positive");
    }
    require_same_dim(x, v, "hvp_finite_difference");
    if (x.size() != obj.dim()) {
        throw DimensionError("hvp_finite_difference: x does not match objective dimension");
    }
    const double vn = v.norm();
    if (vn == 0.0) {
        return ParamVector::Zero(v.size());
    }
    const ParamVector dir = v / vn;
    const ParamVector plus = obj.full_grad(x + h * dir);
    const ParamVector minus = obj.full_grad(x - h * dir);
    return (plus - minus) * (vn / (2.0 * h));
}

ParamVector hvp_finite_difference(const StochasticObjective& obj, const ParamVector& x,
                                  const ParamVector& v) {
    return hvp_finite_difference(obj, x, v, default_hvp_step(x));
}

MinibatchSampler::MinibatchSampler(std::size_t num_samples, std::size_t batch_size, Rng rng)
    : num_samples_(num_samples), batch_size_(batch_size), rng_(rng) {
    if (batch_size == 0) {
        throw Error("batch size must be positive");
    }
    if (num_samples > 0 && batch_size > num_samples) {
        throw Error("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                    std::to_string(num_samples));
    }
}

void MinibatchSampler::reshuffle() {
    order_ = permutation(num_samples_, rng_);
    cursor_ = 0;
    ++epoch_;
}

Batch MinibatchSampler::next() {
    Batch batch(batch_size_);
    if (num_samples_ == 0) {
        for (auto& idx : batch) {
            idx = static_cast<std::size_t>(rng_.next_u64());
        }
        return batch;
    }
    if (epoch_ < 0 || cursor_ + batch_size_ > num_samples_) {
        reshuffle();
    }
    std::copy_n(order_.begin() + static_cast<std::ptrdiff_t>(cursor_), batch_size_, batch.begin());
    cursor_ += batch_size_;
    return batch;
}

}  // namespace vasso
