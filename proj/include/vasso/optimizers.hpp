#ifndef VASSO_OPTIMIZERS_HPP
#define VASSO_OPTIMIZERS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "vasso/core.hpp"
#include "vasso/objective.hpp"
#include "vasso/rng.hpp"
#include "vasso/schedule.hpp"

namespace vasso {

enum class Method {
    sgd,
    sam,
    vasso,
    evasso,
    sam_db,
    esam,  ///< SAM gated by the eVASSO Bernoulli schedule (eVASSO with theta = 1).
};

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct OptimizerConfig {
    double rho = 0.05;
    double theta = 0.2;
    double p = 1.0;
    Schedule lr = Schedule::constant(0.1);
    /// Perturbation radius schedule; absent means constant rho.
    std::optional<Schedule> rho_schedule;
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    bool operator==(const OptimizerConfig&) const = default;
};

/// Throws vasso::Error when a field is out of range.
void validate(const OptimizerConfig& cfg);

double lr_at(const OptimizerConfig& cfg, std::int64_t t);
double rho_at(const OptimizerConfig& cfg, std::int64_t t);

/// VASSO's adversary state: the EMA slope and its cached norm. The adversary
/// itself is recovered on demand as rho * d / |d|.
struct AdversaryState {
    ParamVector d;
    double d_norm = 0.0;

    bool initialized() const { return d.size() > 0; }
    ParamVector epsilon(double rho) const;
};

struct StepReport {
    double loss = 0.0;
    int grad_evals = 0;
    ParamVector epsilon;
    bool perturbed = false;
};

/// Everything an optimizer carries between iterations.
struct OptimizerState {
    std::int64_t t = 0;
    ParamVector momentum;
    AdversaryState adversary;
};

/// rho * g / |g|, zero for a degenerate g.
ParamVector sam_adversary(const ParamVector& g, double rho);

/// d <- (1 - theta) d + theta g, then eps = rho d / |d|. An uninitialised state
/// takes d = g.
std::pair<AdversaryState, ParamVector> vasso_update(const AdversaryState& state, const ParamVector& g,
                                                    double theta, double rho);

/// v <- momentum v + g + weight_decay x;  x <- x - lr v.
void base_update(ParamVector& x, const ParamVector& g_update, double lr, const OptimizerConfig& cfg,
                 ParamVector& momentum_buffer);

StepReport sgd_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                    const OptimizerConfig& cfg, OptimizerState& state);

StepReport sam_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                    const OptimizerConfig& cfg, OptimizerState& state);

StepReport vasso_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                      const OptimizerConfig& cfg, OptimizerState& state);

/// One eVASSO iteration. The slope d is refreshed every call; the perturbed
/// gradient is computed only when the gate fires (one draw from `gate` per call,
/// regardless of p).
StepReport evasso_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                       const OptimizerConfig& cfg, OptimizerState& state, Rng& gate);

/// Gated SAM: perturb with the SAM adversary when the gate fires, else SGD.
StepReport esam_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                     const OptimizerConfig& cfg, OptimizerState& state, Rng& gate);

/// SAM with the adversary taken from a separate batch.
StepReport samdb_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                      BatchView adv_batch, const OptimizerConfig& cfg, OptimizerState& state);

/// Draws hat g_t at the current iterate from `batch_size` samples.
using LinearGradSampler = std::function<ParamVector(const ParamVector& x, std::size_t batch_size, Rng& rng)>;

/// Stochastic Frank-Wolfe over the sphere of radius rho:
///   v_{t+1} = argmax_{|v| = rho} <hat g_t, v>,  x_{t+1} = (1 - gamma_t) x_t + gamma_t v_{t+1}.
/// Runs gammas.size() iterations from x0.
ParamVector sfw_solve(const LinearGradSampler& sampler, double rho, std::span<const std::size_t> batch_sizes,
                      std::span<const double> gammas, Rng& rng, const ParamVector& x0);

}  // namespace vasso

#endif  // VASSO_OPTIMIZERS_HPP
