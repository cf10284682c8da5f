#include "vasso/optimizers.hpp"

#include <cmath>

namespace vasso {

namespace {

LossGrad checked_loss_grad(const StochasticObjective& obj, const ParamVector& x, BatchView batch,
                           std::int64_t t) {
    if (batch.empty()) {
        throw Error("optimizer step needs a non-empty batch");
    }
    LossGrad lg = obj.loss_grad(x, batch);
    if (!std::isfinite(lg.loss)) {
        throw NonFiniteError("non-finite loss", t);
    }
    if (!lg.grad.allFinite()) {
        throw NonFiniteError("non-finite gradient", t);
    }
    return lg;
}

ParamVector checked_grad(const StochasticObjective& obj, const ParamVector& x, BatchView batch,
                         std::int64_t t) {
    ParamVector g = obj.grad(x, batch);
    if (!g.allFinite()) {
        throw NonFiniteError("non-finite perturbed gradient", t);
    }
    return g;
}

void finish_step(ParamVector& x, const ParamVector& g_update, const OptimizerConfig& cfg,
                 OptimizerState& state) {
    base_update(x, g_update, lr_at(cfg, state.t), cfg, state.momentum);
    if (!x.allFinite()) {
        throw NonFiniteError("non-finite iterate", state.t);
    }
    ++state.t;
}

StepReport perturbed_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                          const OptimizerConfig& cfg, OptimizerState& state, double loss,
                          ParamVector eps) {
    const ParamVector g_adv = checked_grad(obj, x + eps, batch, state.t);
    finish_step(x, g_adv, cfg, state);
    return {loss, 2, std::move(eps), true};
}

StepReport plain_step(ParamVector& x, const LossGrad& lg, const OptimizerConfig& cfg,
                      OptimizerState& state) {
    finish_step(x, lg.grad, cfg, state);
    return {lg.loss, 1, ParamVector::Zero(x.size()), false};
}

void refresh_slope(OptimizerState& state, const ParamVector& g, double theta) {
    AdversaryState& adv = state.adversary;
    if (!adv.initialized()) {
        adv.d = g;
    } else {
        adv.d = (1.0 - theta) * adv.d + theta * g;
    }
    adv.d_norm = adv.d.norm();
}

}  // namespace

std::string_view to_string(Method m) {
    switch (m) {
        case Method::sgd: return "sgd";
        case Method::sam: return "sam";
        case Method::vasso: return "vasso";
        case Method::evasso: return "evasso";
        case Method::sam_db: return "sam_db";
        case Method::esam: return "esam";
    }
    return "sgd";
}

Method parse_method(std::string_view name) {
    if (name == "sgd") return Method::sgd;
    if (name == "sam") return Method::sam;
    if (name == "vasso") return Method::vasso;
    if (name == "evasso") return Method::evasso;
    if (name == "sam_db" || name == "sam-db") return Method::sam_db;
    if (name == "esam") return Method::esam;
    throw Error("unknown optimizer '" + std::string(name) + "'");
}

void validate(const OptimizerConfig& cfg) {
    if (!(cfg.rho >= 0.0) || !std::isfinite(cfg.rho)) throw Error("rho must be finite and nonnegative");
    if (!(cfg.theta > 0.0 && cfg.theta <= 1.0)) throw Error("theta must lie in (0, 1]");
    if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) throw Error("p must lie in [0, 1]");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
    if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay)) {
        throw Error("weight_decay must be finite and nonnegative");
    }
    if (!(cfg.lr.base >= 0.0) || cfg.lr.horizon <= 0) throw Error("invalid learning-rate schedule");
    if (cfg.rho_schedule && (!(cfg.rho_schedule->base >= 0.0) || cfg.rho_schedule->horizon <= 0)) {
        throw Error("invalid rho schedule");
    }
}

double lr_at(const OptimizerConfig& cfg, std::int64_t t) {
    return schedule_value(cfg.lr, t);
}

double rho_at(const OptimizerConfig& cfg, std::int64_t t) {
    return cfg.rho_schedule ? schedule_value(*cfg.rho_schedule, t) : cfg.rho;
}

ParamVector AdversaryState::epsilon(double rho) const {
    if (!(d_norm > kDegenerateTol)) {
        return ParamVector::Zero(d.size());
    }
    return (rho / d_norm) * d;
}

ParamVector sam_adversary(const ParamVector& g, double rho) {
    return normalize_to_sphere(g, rho);
}

std::pair<AdversaryState, ParamVector> vasso_update(const AdversaryState& state, const ParamVector& g,
                                                    double theta, double rho) {
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw Error("vasso_update: theta must lie in (0, 1]");
    }
    if (state.initialized()) {
        require_same_dim(state.d, g, "vasso_update");
    }
    OptimizerState tmp;
    tmp.adversary = state;
    refresh_slope(tmp, g, theta);
    ParamVector eps = tmp.adversary.epsilon(rho);
    return {std::move(tmp.adversary), std::move(eps)};
}

void base_update(ParamVector& x, const ParamVector& g_update, double lr, const OptimizerConfig& cfg,
                 ParamVector& momentum_buffer) {
    require_same_dim(x, g_update, "base_update");
    if (momentum_buffer.size() == 0) {
        momentum_buffer = ParamVector::Zero(x.size());
    }
    momentum_buffer = cfg.momentum * momentum_buffer + g_update + cfg.weight_decay * x;
    x -= lr * momentum_buffer;
}

StepReport sgd_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                    const OptimizerConfig& cfg, OptimizerState& state) {
    const LossGrad lg = checked_loss_grad(obj, x, batch, state.t);
    return plain_step(x, lg, cfg, state);
}

StepReport sam_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                    const OptimizerConfig& cfg, OptimizerState& state) {
    const LossGrad lg = checked_loss_grad(obj, x, batch, state.t);
    ParamVector eps = sam_adversary(lg.grad, rho_at(cfg, state.t));
    return perturbed_step(obj, x, batch, cfg, state, lg.loss, std::move(eps));
}

StepReport vasso_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                      const OptimizerConfig& cfg, OptimizerState& state) {
    const LossGrad lg = checked_loss_grad(obj, x, batch, state.t);
    refresh_slope(state, lg.grad, cfg.theta);
    ParamVector eps = state.adversary.epsilon(rho_at(cfg, state.t));
    return perturbed_step(obj, x, batch, cfg, state, lg.loss, std::move(eps));
}

StepReport evasso_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                       const OptimizerConfig& cfg, OptimizerState& state, Rng& gate) {
    const LossGrad lg = checked_loss_grad(obj, x, batch, state.t);
    refresh_slope(state, lg.grad, cfg.theta);
    if (gate.bernoulli(cfg.p)) {
        ParamVector eps = state.adversary.epsilon(rho_at(cfg, state.t));
        return perturbed_step(obj, x, batch, cfg, state, lg.loss, std::move(eps));
    }
    return plain_step(x, lg, cfg, state);
}

StepReport esam_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                     const OptimizerConfig& cfg, OptimizerState& state, Rng& gate) {
    const LossGrad lg = checked_loss_grad(obj, x, batch, state.t);
    if (gate.bernoulli(cfg.p)) {
        ParamVector eps = sam_adversary(lg.grad, rho_at(cfg, state.t));
        return perturbed_step(obj, x, batch, cfg, state, lg.loss, std::move(eps));
    }
    return plain_step(x, lg, cfg, state);
}

StepReport samdb_step(const StochasticObjective& obj, ParamVector& x, BatchView batch,
                      BatchView adv_batch, const OptimizerConfig& cfg, OptimizerState& state) {
    if (batch.empty()) {
        throw Error("optimizer step needs a non-empty batch");
    }
    const double loss = obj.loss(x, batch);
    if (!std::isfinite(loss)) {
        throw NonFiniteError("non-finite loss", state.t);
    }
    // The adversary-batch gradient takes the place of g_t(x_t), so the step
    // still costs two gradient evaluations.
    const LossGrad adv = checked_loss_grad(obj, x, adv_batch, state.t);
    ParamVector eps = sam_adversary(adv.grad, rho_at(cfg, state.t));
    return perturbed_step(obj, x, batch, cfg, state, loss, std::move(eps));
}

ParamVector sfw_solve(const LinearGradSampler& sampler, double rho, std::span<const std::size_t> batch_sizes,
                      std::span<const double> gammas, Rng& rng, const ParamVector& x0) {
    if (gammas.empty()) {
        throw Error("sfw_solve: need at least one iteration");
    }
    if (batch_sizes.size() != gammas.size()) {
        throw Error("sfw_solve: batch_sizes and gammas must have the same length");
    }
    ParamVector x = x0;
    for (std::size_t t = 0; t < gammas.size(); ++t) {
        const ParamVector g_hat = sampler(x, batch_sizes[t], rng);
        require_same_dim(g_hat, x, "sfw_solve");
        const ParamVector v = normalize_to_sphere(g_hat, rho);
        x = (1.0 - gammas[t]) * x + gammas[t] * v;
    }
    return x;
}

}  // namespace vasso
