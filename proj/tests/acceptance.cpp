#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "vasso/analysis.hpp"
#include "vasso/dataset.hpp"
#include "vasso/harness.hpp"
#include "vasso/landscapes.hpp"
#include "vasso/mlp.hpp"
#include "vasso/optimizers.hpp"
#include "vasso/quadratic.hpp"

using namespace vasso;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ParamVector vec(std::initializer_list<double> v) {
    ParamVector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

OptimizerConfig constant_lr(double lr, double rho) {
    OptimizerConfig cfg;
    cfg.lr = Schedule::constant(lr);
    cfg.rho = rho;
    return cfg;
}

std::shared_ptr<const Dataset> blobs(int dim, int classes, int per_class, std::uint64_t seed) {
    BlobSpec spec;
    spec.dim = dim;
    spec.num_classes = classes;
    spec.samples_per_class = per_class;
    Rng rng(seed, streams::kData);
    return std::make_shared<const Dataset>(make_blobs(spec, rng));
}

enum class Kind { sgd, sam, vasso, evasso };

std::vector<double> trajectory(const StochasticObjective& obj, ParamVector x, Kind kind, const OptimizerConfig& cfg,
                               int steps, std::uint64_t seed, std::size_t batch) {
    MinibatchSampler sampler(obj.num_samples(), batch, Rng(seed, streams::kSampler));
    Rng gate(seed, streams::kGate);
    OptimizerState state;
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
        const Batch b = sampler.next();
        StepReport r;
        switch (kind) {
            case Kind::sgd: r = sgd_step(obj, x, b, cfg, state); break;
            case Kind::sam: r = sam_step(obj, x, b, cfg, state); break;
            case Kind::vasso: r = vasso_step(obj, x, b, cfg, state); break;
            case Kind::evasso: r = evasso_step(obj, x, b, cfg, state, gate); break;
        }
        losses.push_back(r.loss);
    }
    return losses;
}

Outcome sfw_equivalence() {
    Rng rng(1, streams::kProbe);
    const std::size_t one = 1;
    const double gamma = 1.0;
    double worst = 0.0;
    int pairs = 0;
    for (Eigen::Index dim : {3, 50, 1000}) {
        for (int k = 0; k < 100; ++k, ++pairs) {
            const ParamVector g = rng.normal_vector(dim);
            const double rho = 0.01 + rng.uniform();
            const ParamVector x0 = rng.normal_vector(dim);
            const LinearGradSampler fixed = [&](const ParamVector&, std::size_t, Rng&) { return g; };
            const ParamVector sfw = sfw_solve(fixed, rho, {&one, 1}, {&gamma, 1}, rng, x0);
            worst = std::max(worst, (sfw - sam_adversary(g, rho)).cwiseAbs().maxCoeff());
        }
    }
    return {worst <= 1e-12, fmt("%d pairs, max deviation %.3g", pairs, worst)};
}

Outcome collapse_identities() {
    const int T = 1000;
    auto q = diagonal_quadratic(vec({0.5, 1, 2, 4}), 0.8, 4);
    const ParamVector xq = vec({1, 2, -1, 0.5});
    auto mlp = mlp_objective({2, 6, 2}, Activation::tanh, blobs(2, 2, 20, 1));
    Rng init(1, streams::kInit);
    const ParamVector xm = mlp->network().init_parameters(init);

    int held = 0, total = 0;
    auto check = [&](const StochasticObjective& obj, const ParamVector& x0, std::size_t batch, double lr) {
        OptimizerConfig cfg = constant_lr(lr, 0.05);
        cfg.momentum = 0.5;
        OptimizerConfig theta1 = cfg, p1 = cfg, p0 = cfg;
        theta1.theta = 1.0;
        p1.p = 1.0;
        p0.p = 0.0;
        held += trajectory(obj, x0, Kind::vasso, theta1, T, 1, batch) == trajectory(obj, x0, Kind::sam, cfg, T, 1, batch);
        held += trajectory(obj, x0, Kind::evasso, p1, T, 2, batch) == trajectory(obj, x0, Kind::vasso, cfg, T, 2, batch);
        held += trajectory(obj, x0, Kind::evasso, p0, T, 3, batch) == trajectory(obj, x0, Kind::sgd, cfg, T, 3, batch);
        total += 3;
    };
    check(*q, xq, 4, 0.05);
    check(*mlp, xm, 8, 0.1);
    return {held == total, fmt("%d/%d identities bit-identical over T=%d", held, total, T)};
}

Outcome variance_suppression() {
    // sigma^2 = dim * s^2 = 4 * 0.25 = 1
    auto q = diagonal_quadratic(vec({1, 2, 3, 4}), 0.5, 3);
    const ParamVector x = vec({0.5, -1, 2, 0});
    bool ok = true;
    std::string detail;
    for (double theta : {0.2, 0.4, 0.9}) {
        Rng rng(11, streams::kProbe);
        const auto m = mse_suppression(*q, x, theta, 100000, rng);
        const double oracle = theta / (2.0 - theta);
        const bool pass = std::abs(m.mse_d - oracle) <= 0.10 * oracle && m.mse_d < theta &&
                          std::abs(m.mse_g - 1.0) <= 0.05;
        ok = ok && pass;
        detail += fmt("theta=%.1f mse_d=%.4f (oracle %.4f) mse_g=%.4f; ", theta, m.mse_d, oracle, m.mse_g);
    }
    return {ok, detail};
}

Outcome delta_stability_bound() {
    auto q = diagonal_quadratic(vec({1, 2, 3, 4}), 0.5, 4);
    const ParamVector x = vec({1, 1, -1, 0.5});
    const double rho = 0.05;
    auto sam = sam_slope_sampler(*q, x, 1, 7);
    auto vas = vasso_slope_sampler(*q, x, 0.2, 1, 7);
    Rng rng(5, streams::kProbe);
    std::size_t violations = 0;
    int ordered = 0;
    const int batches = 100;
    for (int b = 0; b < batches; ++b) {
        const auto ds = delta_stability(*q, x, sam, rho, 10000, rng);
        const auto dv = delta_stability(*q, x, vas, rho, 10000, rng);
        violations += ds.bound_violations + dv.bound_violations;
        ordered += dv.delta < ds.delta;
    }
    return {violations == 0 && ordered == batches,
            fmt("%zu violations over %d draws, VASSO below SAM in %d/%d batches", violations, 2 * batches * 10000,
                ordered, batches)};
}

ExperimentConfig drift_quadratic(Method m) {
    ExperimentConfig c;
    c.objective.kind = ObjectiveKind::quadratic;
    c.objective.spectrum = {0.5, 1, 2, 4, 8};
    c.objective.sigma = 0.5;
    c.objective.noise_seed = 1;
    c.optimizer.method = m;
    c.optimizer.hyper = constant_lr(0.05, 0.05);
    c.horizon = 5000;
    c.batch_size = 4;
    c.metrics_every = 5000;
    return c;
}

ExperimentConfig drift_mlp(Method m) {
    ExperimentConfig c;
    c.objective.kind = ObjectiveKind::mlp;
    c.objective.layers = {2, 8, 2};
    c.objective.blobs.samples_per_class = 100;
    c.objective.data_seed = 1;
    c.optimizer.method = m;
    c.optimizer.hyper = constant_lr(0.1, 0.05);
    c.horizon = 5000;
    c.batch_size = 16;
    c.metrics_every = 5000;
    return c;
}

Outcome drift_ordering() {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
    RunOptions opts;
    opts.keep_rows = false;
    bool ok = true;
    std::string detail;
    for (const auto& [name, make] : {std::pair<const char*, std::function<ExperimentConfig(Method)>>{"quadratic", drift_quadratic},
                                     {"mlp", drift_mlp}}) {
        const auto sam = make(Method::sam);
        const auto vas = make(Method::vasso);
        const BuiltObjective obj = build_objective(sam.objective);
        int wins = 0;
        double worst = 0.0;
        for (std::uint64_t s : seeds) {
            const auto rs = run_seed(sam, *obj.train, nullptr, s, opts);
            const auto rv = run_seed(vas, *obj.train, nullptr, s, opts);
            wins += rv.mean_drift < rs.mean_drift;
            worst = std::max({worst, rs.max_drift, rv.max_drift});
        }
        const double rho = sam.optimizer.hyper.rho;
        ok = ok && wins >= 18 && worst <= 2.0 * rho + 1e-10;
        detail += fmt("%s: VASSO wins %d/20, max drift %.4f (2rho %.2f); ", name, wins, worst, 2.0 * rho);
    }
    return {ok, detail};
}

Outcome evasso_accounting() {
    auto q = diagonal_quadratic(vec({1, 2}), 0.1, 6);
    const int T = 10000;
    auto count = [&](double p) {
        OptimizerConfig cfg = constant_lr(0.01, 0.05);
        cfg.p = p;
        OptimizerState st;
        ParamVector x = vec({1, 1});
        Rng gate(7, streams::kGate);
        MinibatchSampler sampler(0, 1, Rng(7, streams::kSampler));
        long evals = 0;
        for (int t = 0; t < T; ++t) evals += evasso_step(*q, x, sampler.next(), cfg, st, gate).grad_evals;
        return evals;
    };
    const long at03 = count(0.3);
    const double tol = 3.0 * std::sqrt(0.3 * 0.7 * T);
    bool monotone = true;
    long prev = -1;
    std::string sweep;
    for (double p : {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}) {
        const long c = count(p);
        monotone = monotone && c > prev;
        prev = c;
        sweep += fmt(" %ld", c);
    }
    return {std::abs(at03 - 13000.0) <= tol && monotone,
            fmt("p=0.3: %ld evals (13000 +- %.1f); sweep%s", at03, tol, sweep.c_str())};
}

ExperimentConfig high_noise_quadratic(Method m) {
    ExperimentConfig c;
    c.objective.kind = ObjectiveKind::quadratic;
    c.objective.spectrum = {0.1, 0.5, 1, 2, 5, 10};
    c.objective.sigma = 2.0;
    c.objective.noise_seed = 2;
    c.optimizer.method = m;
    c.optimizer.hyper = constant_lr(0.02, 0.1);
    c.horizon = 2000;
    c.batch_size = 8;
    c.metrics_every = 2000;
    return c;
}

Outcome friendly_adversary() {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
    RunOptions opts;
    opts.keep_rows = false;
    const auto cmp = paired_compare(high_noise_quadratic(Method::sam_db), high_noise_quadratic(Method::sam), seeds,
                                    CompareMetric::final_loss, opts);
    const bool degraded = cmp.wins_b > cmp.wins_a && cmp.p_value < 0.05;

    auto q = diagonal_quadratic(vec({0.1, 0.5, 1, 2, 5, 10}), 2.0, 2);
    const OptimizerConfig cfg = constant_lr(0.02, 0.1);
    ParamVector xa = ParamVector::Ones(6), xb = xa;
    OptimizerState sa, sb;
    MinibatchSampler sampler(0, 8, Rng(1, streams::kSampler));
    bool identical = true;
    for (int t = 0; t < 1000; ++t) {
        const Batch b = sampler.next();
        identical = identical && samdb_step(*q, xa, b, b, cfg, sa).loss == sam_step(*q, xb, b, cfg, sb).loss;
    }
    identical = identical && xa == xb;
    return {degraded && identical,
            fmt("SAM better in %d/20, SAM-db better in %d/20, ties %d, p=%.3g; adv_batch==batch identical: %s",
                cmp.wins_b, cmp.wins_a, cmp.ties, cmp.p_value, identical ? "yes" : "no")};
}

Outcome snr_spread() {
    const ParamVector g = vec({0.2, -0.1, 0.6});
    std::vector<double> scales;
    for (double snr : {5.0, 1.0, 0.1, 0.01}) scales.push_back(scale_for_snr(g, snr));
    Rng rng(2, streams::kNoise);
    const auto s = snr_adversary_spread(g, scales, 10000, 1.0, rng);
    bool monotone = true;
    for (std::size_t i = 1; i < s.size(); ++i) monotone = monotone && s[i].mean_cos <= s[i - 1].mean_cos;
    return {s[0].mean_cos > 0.9 && std::abs(s[3].mean_cos) <= 0.1 && monotone,
            fmt("mean cos at SNR 5/1/0.1/0.01: %.4f %.4f %.4f %.4f", s[0].mean_cos, s[1].mean_cos, s[2].mean_cos,
                s[3].mean_cos)};
}

Outcome lanczos() {
    ParamVector spec = ParamVector::Ones(500);
    spec.head(5) << 10, 5, 4, 3, 2;
    auto q = diagonal_quadratic(spec, 0.0, 1);
    Rng rng(3, streams::kProbe);
    const auto est = lanczos_spectrum(*q, ParamVector::Zero(500), 5, 50, rng);
    if (est.top_eigenvalues.size() < 5) return {false, "fewer than 5 Ritz values"};
    const double l1 = est.top_eigenvalues[0];
    const double ratio = l1 / est.top_eigenvalues[4];
    return {std::abs(l1 - 10.0) <= 0.01 * 10.0 && std::abs(ratio - 5.0) <= 0.02 * 5.0,
            fmt("lambda1=%.6f, lambda1/lambda5=%.6f", l1, ratio)};
}

Outcome convergence_trend() {
    RunOptions opts;
    opts.keep_rows = false;
    opts.track_grad_norm = true;
    bool ok = true;
    std::string detail;
    for (Method m : {Method::sgd, Method::sam, Method::vasso}) {
        double mean[2] = {0.0, 0.0};
        int i = 0;
        for (std::int64_t T : {256, 4096}) {
            ExperimentConfig c;
            c.objective.kind = ObjectiveKind::quadratic;
            c.objective.spectrum = {0.5, 1, 2, 4};
            c.objective.sigma = 0.5;
            c.objective.noise_seed = 3;
            c.optimizer.method = m;
            c.optimizer.hyper.lr = Schedule::theory(1.0, T);
            c.optimizer.hyper.rho = 0.5;
            c.optimizer.hyper.rho_schedule = Schedule::theory(0.5, T);
            c.horizon = T;
            c.batch_size = 1;
            c.metrics_every = T;
            const BuiltObjective obj = build_objective(c.objective);
            for (std::uint64_t s = 1; s <= 10; ++s) mean[i] += run_seed(c, *obj.train, nullptr, s, opts).mean_sq_grad_norm;
            mean[i] /= 10.0;
            ++i;
        }
        ok = ok && mean[1] < mean[0];
        detail += fmt("%s: %.4f (T=256) vs %.4f (T=4096); ", std::string(to_string(m)).c_str(), mean[0], mean[1]);
    }
    return {ok, detail};
}

Outcome m_sharpness() {
    // Closed form at w = 0, rho = 0.5. Pairing {1,2},{3,4} gives cells a=0, b=0 and a loss
    // identically zero. Pairing {1,3},{2,4} gives -u^2 + u (max 1/4 at the vertex u = 1/2)
    // and u^2 - u (max 3/4 at the endpoint u = -1/2).
    const double expected = 0.25 + 0.75 - 0.0;
    const double diff = m_sharpness_example(Partition::by_a).objective(0.0, 0.5) -
                        m_sharpness_example(Partition::by_b).objective(0.0, 0.5);
    return {diff == expected && diff != 0.0, fmt("difference %.17g, closed form %.17g", diff, expected)};
}

Outcome gradient_check() {
    struct Arch {
        std::vector<int> layers;
        Activation act;
    };
    double worst = 0.0;
    int points = 0;
    for (const Arch& arch : {Arch{{2, 3}, Activation::tanh}, Arch{{2, 8, 3}, Activation::tanh},
                             Arch{{2, 6, 5, 3}, Activation::relu}}) {
        auto obj = mlp_objective(arch.layers, arch.act, blobs(2, 3, 5, 2));
        Rng rng(4, streams::kProbe);
        for (int k = 0; k < 10; ++k, ++points) {
            const ParamVector x = rng.normal_vector(obj->dim());
            const double h = 1e-5;
            ParamVector fd(x.size());
            ParamVector xp = x;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                xp(i) = x(i) + h;
                const double fp = obj->full_loss(xp);
                xp(i) = x(i) - h;
                const double fm = obj->full_loss(xp);
                xp(i) = x(i);
                fd(i) = (fp - fm) / (2.0 * h);
            }
            const ParamVector g = obj->full_grad(x);
            worst = std::max(worst, (g - fd).norm() / std::max({g.norm(), fd.norm(), 1e-12}));
        }
    }
    return {worst < 1e-5, fmt("%d points, max relative error %.3g", points, worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"SFW one-step equals the SAM adversary", sfw_equivalence},
        {"collapse identities", collapse_identities},
        {"variance suppression", variance_suppression},
        {"delta-stability bound", delta_stability_bound},
        {"adversary drift ordering", drift_ordering},
        {"eVASSO gradient accounting", evasso_accounting},
        {"SAM-db degradation", friendly_adversary},
        {"SNR adversary spread", snr_spread},
        {"Lanczos spectrum", lanczos},
        {"convergence trend", convergence_trend},
        {"m-sharpness partitions differ", m_sharpness},
        {"MLP gradient check", gradient_check},
    };
    int failed = 0;
    int n = 0;
    for (const auto& [name, run] : criteria) {
        ++n;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s criterion %d: %s (%s) [%.2fs]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
