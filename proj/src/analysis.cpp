#include "vasso/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "vasso/mlp.hpp"

namespace vasso {

double StabilityTrace::mean() const {
    if (drifts.empty()) return 0.0;
    return std::accumulate(drifts.begin(), drifts.end(), 0.0) / static_cast<double>(drifts.size());
}

double StabilityTrace::max() const {
    return drifts.empty() ? 0.0 : *std::max_element(drifts.begin(), drifts.end());
}

StabilityTrace track_drift(std::span<const ParamVector> epsilons, double rho) {
    StabilityTrace trace;
    trace.rho = rho;
    for (std::size_t t = 1; t < epsilons.size(); ++t) {
        require_same_dim(epsilons[t], epsilons[t - 1], "track_drift");
        trace.drifts.push_back((epsilons[t] - epsilons[t - 1]).norm());
    }
    return trace;
}

double ema_steady_state_mse(double theta, double sigma2) {
    return theta / (2.0 - theta) * sigma2;
}

MseEstimate mse_suppression(const StochasticObjective& obj, const ParamVector& x_fixed, double theta,
                            std::size_t n_steps, Rng& rng, std::size_t batch_size) {
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw Error("mse_suppression: theta must lie in (0, 1]");
    }
    if (n_steps == 0) {
        throw Error("mse_suppression: need at least one step");
    }
    const ParamVector truth = obj.full_grad(x_fixed);
    const auto burn_in = static_cast<std::size_t>(std::ceil(10.0 / theta));
    MinibatchSampler sampler(obj.num_samples(), batch_size, rng.fork(rng.next_u64()));

    ParamVector d;
    double sum_d = 0.0;
    double sum_g = 0.0;
    for (std::size_t step = 0; step < burn_in + n_steps; ++step) {
        const Batch batch = sampler.next();
        const ParamVector g = obj.grad(x_fixed, batch);
        if (d.size() == 0) {
            d = g;
        } else {
            d = (1.0 - theta) * d + theta * g;
        }
        if (step >= burn_in) {
            sum_d += (d - truth).squaredNorm();
            sum_g += (g - truth).squaredNorm();
        }
    }
    const auto n = static_cast<double>(n_steps);
    return {sum_d / n, sum_g / n};
}

DeltaStability delta_stability(const StochasticObjective& obj, const ParamVector& x,
                               const SlopeSampler& sample_slope, double rho, std::size_t n_samples,
                               Rng& rng) {
    if (n_samples == 0) {
        throw Error("delta_stability: need at least one sample");
    }
    const ParamVector truth = obj.full_grad(x);
    const double f = obj.full_loss(x);
    const double l_truth = f + rho * truth.norm();
    DeltaStability out;
    out.samples = n_samples;
    double sum_gap = 0.0;
    double sum_err = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const ParamVector v = sample_slope(rng);
        require_same_dim(v, truth, "delta_stability");
        const double gap = std::abs((f + rho * v.norm()) - l_truth);
        const double bound = rho * (v - truth).norm();
        // Allow for rounding in the two norms and the shared f(x) offset.
        const double slack = 8.0 * std::numeric_limits<double>::epsilon() *
                             (std::abs(f) + rho * (v.norm() + truth.norm()));
        if (gap > bound + slack) {
            ++out.bound_violations;
        }
        sum_gap += gap;
        sum_err += bound;
    }
    out.delta = sum_gap / static_cast<double>(n_samples);
    out.mean_slope_error = sum_err / static_cast<double>(n_samples);
    return out;
}

SlopeSampler sam_slope_sampler(const StochasticObjective& obj, const ParamVector& x,
                               std::size_t batch_size, std::uint64_t seed) {
    auto sampler = std::make_shared<MinibatchSampler>(obj.num_samples(), batch_size,
                                                      Rng(seed, streams::kSampler));
    return [&obj, x, sampler](Rng&) { return obj.grad(x, sampler->next()); };
}

SlopeSampler vasso_slope_sampler(const StochasticObjective& obj, const ParamVector& x, double theta,
                                 std::size_t batch_size, std::uint64_t seed) {
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw Error("vasso_slope_sampler: theta must lie in (0, 1]");
    }
    struct State {
        MinibatchSampler sampler;
        ParamVector d;
    };
    auto state = std::make_shared<State>(
        State{MinibatchSampler(obj.num_samples(), batch_size, Rng(seed, streams::kSampler)), ParamVector()});
    auto advance = [&obj, x, theta, state]() {
        const ParamVector g = obj.grad(x, state->sampler.next());
        if (state->d.size() == 0) {
            state->d = g;
        } else {
            state->d = (1.0 - theta) * state->d + theta * g;
        }
    };
    const auto burn_in = static_cast<std::size_t>(std::ceil(10.0 / theta));
    for (std::size_t i = 0; i < burn_in; ++i) advance();
    return [state, advance](Rng&) {
        advance();
        return state->d;
    };
}

double expected_gaussian_norm(double scale, Eigen::Index dim) {
    const double k = static_cast<double>(dim);
    return scale * std::sqrt(2.0) * std::exp(std::lgamma((k + 1.0) / 2.0) - std::lgamma(k / 2.0));
}

double snr_of_scale(const ParamVector& true_grad, double scale) {
    return true_grad.norm() / expected_gaussian_norm(scale, true_grad.size());
}

double scale_for_snr(const ParamVector& true_grad, double snr) {
    if (!(snr > 0.0)) throw Error("scale_for_snr: snr must be positive");
    return true_grad.norm() / (snr * expected_gaussian_norm(1.0, true_grad.size()));
}

std::vector<SpreadStats> snr_adversary_spread(const ParamVector& true_grad, std::span<const double> noise_scales,
                                              std::size_t n_draws, double rho, Rng& rng) {
    const double gnorm = true_grad.norm();
    if (!(gnorm > 0.0)) {
        throw Error("snr_adversary_spread: true gradient must be non-zero");
    }
    if (n_draws == 0) {
        throw Error("snr_adversary_spread: need at least one draw");
    }
    std::vector<ParamVector> base;
    base.reserve(n_draws);
    for (std::size_t i = 0; i < n_draws; ++i) {
        base.push_back(rng.normal_vector(true_grad.size()));
    }
    const ParamVector unit = true_grad / gnorm;
    std::vector<SpreadStats> out;
    for (const double scale : noise_scales) {
        if (!(scale >= 0.0)) throw Error("snr_adversary_spread: noise scales must be nonnegative");
        double sum = 0.0;
        double sum_sq = 0.0;
        for (const auto& z : base) {
            const ParamVector eps = normalize_to_sphere(ParamVector(true_grad + scale * z), rho);
            const double n = eps.norm();
            const double c = n > 0.0 ? eps.dot(unit) / n : 0.0;
            sum += c;
            sum_sq += c * c;
        }
        const auto n = static_cast<double>(n_draws);
        SpreadStats s;
        s.noise_scale = scale;
        s.snr = scale > 0.0 ? snr_of_scale(true_grad, scale) : std::numeric_limits<double>::infinity();
        s.mean_cos = sum / n;
        s.std_cos = std::sqrt(std::max(0.0, sum_sq / n - s.mean_cos * s.mean_cos));
        out.push_back(s);
    }
    return out;
}

SpectrumEstimate lanczos_spectrum(const StochasticObjective& obj, const ParamVector& x, int k, int iters,
                                  Rng& rng) {
    const Eigen::Index n = obj.dim();
    if (k < 1 || iters < k || iters > n) {
        throw Error("lanczos_spectrum: need 1 <= k <= iters <= dim");
    }
    DenseMatrix Q(n, iters);
    std::vector<double> alpha;
    std::vector<double> beta;

    ParamVector q = rng.normal_vector(n);
    q.normalize();
    SpectrumEstimate out;
    double scale = 0.0;
    for (int j = 0; j < iters; ++j) {
        Q.col(j) = q;
        ParamVector w = obj.hvp(x, q);
        const double a = q.dot(w);
        alpha.push_back(a);
        scale = std::max(scale, std::abs(a));
        // Full reorthogonalisation, applied twice.
        for (int pass = 0; pass < 2; ++pass) {
            const ParamVector coeffs = Q.leftCols(j + 1).transpose() * w;
            w -= Q.leftCols(j + 1) * coeffs;
        }
        if (j + 1 == iters) break;
        const double b = w.norm();
        scale = std::max(scale, b);
        if (b <= 1e-12 * std::max(scale, 1.0)) {
            out.breakdown = true;
            break;
        }
        beta.push_back(b);
        q = w / b;
    }
    const int m = static_cast<int>(alpha.size());
    out.lanczos_iters = m;

    DenseMatrix T = DenseMatrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) {
            T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(T);
    const int found = std::min(k, m);
    for (int r = 0; r < found; ++r) {
        const int col = m - 1 - r;  // eigenvalues ascend
        const double lambda = es.eigenvalues()[col];
        const ParamVector y = Q.leftCols(m) * es.eigenvectors().col(col);
        out.top_eigenvalues.push_back(lambda);
        out.residuals.push_back((obj.hvp(x, y) - lambda * y).norm());
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

ParamVector normalize_direction(const StochasticObjective& obj, const ParamVector& center,
                                const ParamVector& direction) {
    require_same_dim(center, direction, "normalize_direction");
    if (!(direction.norm() > 0.0)) {
        throw Error("landscape direction must be non-zero");
    }
    const auto* mlp = dynamic_cast<const MlpObjective*>(&obj);
    if (mlp == nullptr) {
        return direction / direction.norm();
    }
    ParamVector out = direction;
    const Mlp& net = mlp->network();
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (int neuron = 0; neuron < net.layer_sizes()[l + 1]; ++neuron) {
            const auto idx = net.neuron_parameters(l, neuron);
            double dn = 0.0;
            double xn = 0.0;
            for (const auto i : idx) {
                dn += direction[i] * direction[i];
                xn += center[i] * center[i];
            }
            dn = std::sqrt(dn);
            xn = std::sqrt(xn);
            const double factor = dn > 0.0 ? xn / dn : 0.0;
            for (const auto i : idx) out[i] = direction[i] * factor;
        }
    }
    return out;
}

LandscapeGrid landscape_slice(const StochasticObjective& obj, const ParamVector& center,
                              std::span<const ParamVector> directions, std::span<const double> alphas,
                              std::span<const double> betas) {
    if (directions.empty() || directions.size() > 2) {
        throw Error("landscape_slice: need one or two directions");
    }
    if (directions.size() == 2 && betas.empty()) {
        throw Error("landscape_slice: two directions need a beta grid");
    }
    for (const double a : alphas) {
        if (!std::isfinite(a)) throw Error("landscape_slice: grid must be finite");
    }
    for (const double b : betas) {
        if (!std::isfinite(b)) throw Error("landscape_slice: grid must be finite");
    }
    const ParamVector d1 = normalize_direction(obj, center, directions[0]);
    LandscapeGrid grid;
    grid.alphas.assign(alphas.begin(), alphas.end());
    if (directions.size() == 1) {
        grid.losses.resize(static_cast<Eigen::Index>(alphas.size()), 1);
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            grid.losses(static_cast<Eigen::Index>(i), 0) = obj.full_loss(center + alphas[i] * d1);
        }
        return grid;
    }
    const ParamVector d2 = normalize_direction(obj, center, directions[1]);
    grid.betas.assign(betas.begin(), betas.end());
    grid.losses.resize(static_cast<Eigen::Index>(alphas.size()), static_cast<Eigen::Index>(betas.size()));
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        for (std::size_t j = 0; j < betas.size(); ++j) {
            grid.losses(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                obj.full_loss(center + alphas[i] * d1 + betas[j] * d2);
        }
    }
    return grid;
}

}  // namespace vasso
