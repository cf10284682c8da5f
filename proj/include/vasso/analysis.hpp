#ifndef VASSO_ANALYSIS_HPP
#define VASSO_ANALYSIS_HPP

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "vasso/core.hpp"
#include "vasso/objective.hpp"
#include "vasso/rng.hpp"

namespace vasso {

/// drifts[t] = |eps_{t+1} - eps_t|.
struct StabilityTrace {
    std::vector<double> drifts;
    double rho = 0.0;

    double mean() const;
    double max() const;
};

StabilityTrace track_drift(std::span<const ParamVector> epsilons, double rho);

struct MseEstimate {
    double mse_d = 0.0;  ///< E|d_t - grad f|^2
    double mse_g = 0.0;  ///< E|g_t - grad f|^2
};

/// Runs the EMA d_t = (1 - theta) d_{t-1} + theta g_t at a frozen x, discards
/// ceil(10 / theta) burn-in steps and averages both squared errors over the
/// next n_steps. Batches come from a MinibatchSampler seeded by `rng`.
MseEstimate mse_suppression(const StochasticObjective& obj, const ParamVector& x_fixed, double theta,
                            std::size_t n_steps, Rng& rng, std::size_t batch_size = 1);

/// Steady-state EMA error for iid noise: theta / (2 - theta) * sigma^2.
double ema_steady_state_mse(double theta, double sigma2);

using SlopeSampler = std::function<ParamVector(Rng&)>;

struct DeltaStability {
    double delta = 0.0;               ///< mean |L(v) - L(grad f)|
    double mean_slope_error = 0.0;    ///< mean rho |v - grad f|
    std::size_t samples = 0;
    std::size_t bound_violations = 0; ///< draws with |L(v) - L(grad f)| > rho |v - grad f|
};

/// Monte-Carlo estimate of E|L(v) - L(grad f(x))| with
/// L(v) = f(x) + max_{|eps| <= rho} <v, eps> = f(x) + rho |v|.
DeltaStability delta_stability(const StochasticObjective& obj, const ParamVector& x,
                               const SlopeSampler& sample_slope, double rho, std::size_t n_samples,
                               Rng& rng);

/// v = g_B(x) on a fresh batch.
SlopeSampler sam_slope_sampler(const StochasticObjective& obj, const ParamVector& x,
                               std::size_t batch_size, std::uint64_t seed);

/// v = d_t, the EMA slope at a frozen x, advanced once per draw after a
/// ceil(10 / theta) burn-in.
SlopeSampler vasso_slope_sampler(const StochasticObjective& obj, const ParamVector& x, double theta,
                                 std::size_t batch_size, std::uint64_t seed);

struct SpreadStats {
    double noise_scale = 0.0;
    double snr = 0.0;
    double mean_cos = 0.0;
    double std_cos = 0.0;
};

/// E|zeta| for zeta ~ N(0, s^2 I_dim).
double expected_gaussian_norm(double scale, Eigen::Index dim);

/// SNR = |grad f| / E|zeta|, and its inverse.
double snr_of_scale(const ParamVector& true_grad, double scale);
double scale_for_snr(const ParamVector& true_grad, double snr);

/// For each scale s draws eps = rho (grad f + zeta) / |grad f + zeta| with
/// zeta ~ N(0, s^2 I) and summarises cos(eps, grad f). Every scale reuses the
/// same standard-normal draws.
std::vector<SpreadStats> snr_adversary_spread(const ParamVector& true_grad, std::span<const double> noise_scales,
                                              std::size_t n_draws, double rho, Rng& rng);

struct SpectrumEstimate {
    std::vector<double> top_eigenvalues;  ///< descending
    std::vector<double> residuals;        ///< |H y - lambda y| per Ritz pair
    int lanczos_iters = 0;
    bool breakdown = false;               ///< Krylov space exhausted early
};

/// Top-k Ritz values of the Hessian at x by Lanczos with full
/// reorthogonalisation. Uses obj.hvp (analytic or finite-difference).
SpectrumEstimate lanczos_spectrum(const StochasticObjective& obj, const ParamVector& x, int k, int iters,
                                  Rng& rng);

struct LandscapeGrid {
    std::vector<double> alphas;
    std::vector<double> betas;  ///< empty for a 1-D slice
    DenseMatrix losses;         ///< alphas.size() x max(1, betas.size())
};

/// Evenly spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Scales a direction for plotting. Network objectives get per-neuron
/// normalisation (each neuron's incoming weights and bias rescaled to the
/// norm of the same block of `center`); anything else is scaled to unit norm.
ParamVector normalize_direction(const StochasticObjective& obj, const ParamVector& center,
                                const ParamVector& direction);

/// Full-data loss on center + alpha d1 (+ beta d2) over the grid, with directions
/// normalised by normalize_direction.
LandscapeGrid landscape_slice(const StochasticObjective& obj, const ParamVector& center,
                              std::span<const ParamVector> directions, std::span<const double> alphas,
                              std::span<const double> betas = {});

}  // namespace vasso

#endif  // VASSO_ANALYSIS_HPP
