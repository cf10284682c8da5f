#include "vasso/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "CLI11.hpp"
#include "vasso/analysis.hpp"
#include "vasso/csv.hpp"
#include "vasso/harness.hpp"

namespace vasso {

using nlohmann::json;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || !std::isfinite(v)) {
            throw UsageError(flag + ": bad number '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(flag + ": empty list");
    return out;
}

// "lo:hi:n"
std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw UsageError(flag + ": expected lo:hi:n");
    const auto lo_hi = parse_list(parts[0] + "," + parts[1], flag);
    const auto n = parse_list(parts[2], flag)[0];
    if (n < 1 || n != std::floor(n)) throw UsageError(flag + ": n must be a positive integer");
    return linspace(lo_hi[0], lo_hi[1], static_cast<std::size_t>(n));
}

void emit(const std::string& content, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
    } else {
        write_text_file(path, content);
    }
}

// Shared config-driven options: flags named after config keys override the file.
struct ConfigFlags {
    std::string config;
    std::uint64_t seed = 0;
    int num_seeds = 0;
    std::string out;
    std::optional<std::int64_t> horizon;
    std::optional<std::int64_t> batch_size;
    std::optional<std::int64_t> metrics_every;
    std::optional<std::string> optimizer;
    std::optional<double> rho;
    std::optional<double> theta;
    std::optional<double> p;
    std::optional<double> lr;
    std::optional<double> momentum;
    std::optional<double> weight_decay;
    std::optional<double> sigma;

    void attach(CLI::App* cmd, bool with_config = true) {
        if (with_config) cmd->add_option("--config", config, "Experiment config (JSON)")->required();
        cmd->add_option("--seed", seed, "Base seed; runs use seed, seed+1, ...")->required()->default_str("");
        cmd->add_option("--num_seeds,--num-seeds", num_seeds, "Number of seeds (default: as many as the config lists)")
            ->default_str("");
        cmd->add_option("--horizon", horizon, "Override horizon");
        cmd->add_option("--batch_size", batch_size, "Override batch_size");
        cmd->add_option("--metrics_every", metrics_every, "Override metrics_every");
        cmd->add_option("--optimizer", optimizer, "Override optimizer.kind");
        cmd->add_option("--rho", rho, "Override optimizer.rho");
        cmd->add_option("--theta", theta, "Override optimizer.theta");
        cmd->add_option("--p", p, "Override optimizer.p");
        cmd->add_option("--lr", lr, "Override optimizer.lr.base");
        cmd->add_option("--momentum", momentum, "Override optimizer.momentum");
        cmd->add_option("--weight_decay", weight_decay, "Override optimizer.weight_decay");
        cmd->add_option("--sigma", sigma, "Override objective.sigma");
    }

    ExperimentConfig load(const std::string& path) const {
        json j;
        try {
            j = json::parse(read_text_file(path));
        } catch (const json::parse_error& e) {
            throw ConfigError("", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("", "expected an object");
        if (horizon) j["horizon"] = *horizon;
        if (batch_size) j["batch_size"] = *batch_size;
        if (metrics_every) j["metrics_every"] = *metrics_every;
        if (!out.empty()) j["output_path"] = out;
        if (j.contains("optimizer") && j["optimizer"].is_object()) {
            json& o = j["optimizer"];
            if (optimizer) o["kind"] = *optimizer;
            if (rho) o["rho"] = *rho;
            if (theta) o["theta"] = *theta;
            if (p) o["p"] = *p;
            if (momentum) o["momentum"] = *momentum;
            if (weight_decay) o["weight_decay"] = *weight_decay;
            if (lr && o.contains("lr") && o["lr"].is_object()) o["lr"]["base"] = *lr;
        }
        if (sigma && j.contains("objective") && j["objective"].is_object()) j["objective"]["sigma"] = *sigma;
        // Seeds come from the command line.
        const std::size_t listed = j.contains("seeds") && j["seeds"].is_array() ? j["seeds"].size() : 0;
        const std::size_t n = num_seeds > 0 ? static_cast<std::size_t>(num_seeds) : std::max<std::size_t>(1, listed);
        json seeds = json::array();
        for (std::size_t i = 0; i < n; ++i) seeds.push_back(seed + i);
        j["seeds"] = seeds;
        return parse_config(j);
    }

    ExperimentConfig load() const { return load(config); }
};

int resolve_threads(int flag) {
    return flag > 0 ? flag : 1;
}

// Trains the first seed and returns the objective plus the final iterate.
struct TrainedPoint {
    BuiltObjective objective;
    ParamVector x;
};

TrainedPoint trained_point(const ExperimentConfig& cfg, bool train) {
    TrainedPoint tp{build_objective(cfg.objective), {}};
    const std::uint64_t seed = cfg.seeds.front();
    ParamVector x = initial_point(cfg.objective, *tp.objective.train, seed);
    if (train) {
        const StochasticObjective& obj = *tp.objective.train;
        OptimizerConfig hyper = cfg.optimizer.hyper;
        hyper.seed = seed;
        MinibatchSampler sampler(obj.num_samples(), cfg.batch_size, Rng(seed, streams::kSampler));
        MinibatchSampler adv(obj.num_samples(),
                             cfg.optimizer.adv_batch_size ? cfg.optimizer.adv_batch_size : cfg.batch_size,
                             Rng(seed, streams::kAdversaryBatch));
        Rng gate(seed, streams::kGate);
        OptimizerState state;
        for (std::int64_t t = 0; t < cfg.horizon; ++t) {
            const Batch batch = sampler.next();
            switch (cfg.optimizer.method) {
                case Method::sgd: sgd_step(obj, x, batch, hyper, state); break;
                case Method::sam: sam_step(obj, x, batch, hyper, state); break;
                case Method::vasso: vasso_step(obj, x, batch, hyper, state); break;
                case Method::evasso: evasso_step(obj, x, batch, hyper, state, gate); break;
                case Method::esam: esam_step(obj, x, batch, hyper, state, gate); break;
                case Method::sam_db: samdb_step(obj, x, batch, adv.next(), hyper, state); break;
            }
        }
    }
    tp.x = std::move(x);
    return tp;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sharpness-aware optimizers with variance-suppressed adversaries", "vasso-opt"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_help_flag("-h,--help", "Print help for every subcommand and exit");
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads for seed-parallel runs (default 1)")->default_str("")->envname("VASSO_OPT_THREADS");

    // train
    ConfigFlags train_flags;
    auto* train = app.add_subcommand("train", "Run an experiment config and write metrics CSV plus summary JSON");
    train_flags.attach(train);
    train->add_option("--out,--output_path", train_flags.out, "Metrics CSV path");

    // tradeoff
    ConfigFlags trade_flags;
    std::string trade_ps = "0.2,0.4,0.6,0.8,1";
    auto* tradeoff = app.add_subcommand("tradeoff", "eVASSO computation/quality sweep over p");
    trade_flags.attach(tradeoff);
    tradeoff->add_option("--p_values,--p-values", trade_ps, "Comma-separated gate probabilities");
    std::string trade_out;
    tradeoff->add_option("--out", trade_out, "Output CSV (default stdout)");

    // compare
    ConfigFlags cmp_flags;
    std::string cmp_b;
    std::string cmp_metric = "final_loss";
    std::string cmp_out;
    auto* compare = app.add_subcommand("compare", "Paired-seed sign test between two configs");
    cmp_flags.attach(compare);
    compare->add_option("--config_b,--config-b", cmp_b, "Second config (differs only in optimizer)")->required();
    compare->add_option("--metric", cmp_metric, "final_loss or mean_drift");
    compare->add_option("--out", cmp_out, "Output JSON (default stdout)");

    // stability
    ConfigFlags stab_flags;
    std::string stab_out;
    auto* stability = app.add_subcommand("stability", "Adversary drift trace |eps_t - eps_{t-1}| for the first seed");
    stab_flags.attach(stability);
    stability->add_option("--out", stab_out, "Output CSV (default stdout)");

    // mse
    std::uint64_t mse_seed = 0;
    int mse_dim = 10;
    double mse_sigma2 = 1.0;
    std::string mse_thetas = "0.2,0.4,0.9";
    std::int64_t mse_steps = 100000;
    std::string mse_out;
    auto* mse = app.add_subcommand("mse", "EMA slope error vs minibatch gradient error at a fixed point");
    mse->add_option("--seed", mse_seed, "Seed")->required()->default_str("");
    mse->add_option("--dim", mse_dim, "Quadratic dimension");
    mse->add_option("--sigma2", mse_sigma2, "Total gradient noise variance");
    mse->add_option("--thetas", mse_thetas, "Comma-separated EMA weights");
    mse->add_option("--steps", mse_steps, "Steps after burn-in");
    mse->add_option("--out", mse_out, "Output CSV (default stdout)");

    // delta
    std::uint64_t delta_seed = 0;
    int delta_dim = 10;
    double delta_sigma2 = 1.0;
    double delta_rho = 0.05;
    double delta_theta = 0.2;
    std::int64_t delta_samples = 10000;
    std::string delta_out;
    auto* delta = app.add_subcommand("delta", "delta-stability of SAM and VASSO slopes at a fixed point");
    delta->add_option("--seed", delta_seed, "Seed")->required()->default_str("");
    delta->add_option("--dim", delta_dim, "Quadratic dimension");
    delta->add_option("--sigma2", delta_sigma2, "Total gradient noise variance");
    delta->add_option("--rho", delta_rho, "Perturbation radius");
    delta->add_option("--theta", delta_theta, "EMA weight");
    delta->add_option("--samples", delta_samples, "Monte-Carlo draws");
    delta->add_option("--out", delta_out, "Output CSV (default stdout)");

    // snr
    std::uint64_t snr_seed = 0;
    std::string snr_grad = "0.2,-0.1,0.6";
    std::string snr_scales;
    std::string snr_values;
    std::int64_t snr_draws = 100;
    double snr_rho = 1.0;
    std::string snr_out;
    auto* snr = app.add_subcommand("snr", "Spread of SAM adversaries around a known gradient");
    snr->add_option("--seed", snr_seed, "Seed")->required()->default_str("");
    snr->add_option("--grad", snr_grad, "True gradient, comma-separated");
    auto* scales_opt = snr->add_option("--scales", snr_scales, "Noise standard deviations");
    snr->add_option("--snr", snr_values, "Target SNR values (alternative to --scales)")->excludes(scales_opt);
    snr->add_option("--draws", snr_draws, "Adversaries per scale");
    snr->add_option("--rho", snr_rho, "Sphere radius");
    snr->add_option("--out", snr_out, "Output CSV (default stdout)");

    // spectrum
    ConfigFlags spec_flags;
    int spec_k = 5;
    int spec_iters = 50;
    bool spec_no_train = false;
    std::string spec_out;
    auto* spectrum = app.add_subcommand("spectrum", "Top Hessian eigenvalues by Lanczos at the trained point");
    spec_flags.attach(spectrum);
    spectrum->add_option("--k", spec_k, "Eigenvalues to report");
    spectrum->add_option("--iters", spec_iters, "Lanczos iterations");
    spectrum->add_flag("--no_train,--no-train", spec_no_train, "Evaluate at the initial point");
    spectrum->add_option("--out", spec_out, "Output CSV (default stdout)");

    // slice
    ConfigFlags slice_flags;
    std::string slice_alphas = "-1:1:21";
    std::string slice_betas;
    bool slice_no_train = false;
    std::string slice_out;
    auto* slice = app.add_subcommand("slice", "Loss along normalised random directions through the trained point");
    slice_flags.attach(slice);
    slice->add_option("--alphas", slice_alphas, "First-axis grid lo:hi:n");
    slice->add_option("--betas", slice_betas, "Second-axis grid lo:hi:n (2-D slice)");
    slice->add_flag("--no_train,--no-train", slice_no_train, "Slice through the initial point");
    slice->add_option("--out", slice_out, "Output CSV (default stdout)");

    // sfw-check
    std::uint64_t sfw_seed = 0;
    int sfw_dim = 50;
    double sfw_rho = 0.1;
    int sfw_trials = 100;
    auto* sfw = app.add_subcommand("sfw-check", "Compare one-step Frank-Wolfe on the sphere with the SAM adversary");
    sfw->add_option("--seed", sfw_seed, "Seed")->required()->default_str("");
    sfw->add_option("--dim", sfw_dim, "Dimension");
    sfw->add_option("--rho", sfw_rho, "Sphere radius");
    sfw->add_option("--trials", sfw_trials, "Random gradients to test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << "run with --help for usage\n";
        return kExitUsage;
    }

    const int nthreads = resolve_threads(threads);
    RunOptions run_opts;
    run_opts.threads = nthreads;

    try {
        if (*train) {
            const ExperimentConfig cfg = train_flags.load();
            if (cfg.output_path.empty()) throw UsageError("train: --out or output_path is required");
            const ExperimentResult res = run_experiment(cfg, run_opts);
            write_outputs(cfg, res);
            bool aborted = false;
            for (const auto& s : res.seeds) {
                err << "seed " << s.seed << ": final_loss " << format_double(s.final_loss) << ", grad_evals "
                    << s.total_grad_evals << (s.aborted ? " (aborted: " + s.error + ")" : "") << "\n";
                aborted = aborted || s.aborted;
            }
            return aborted ? kExitRuntime : kExitOk;
        }
        if (*tradeoff) {
            const ExperimentConfig cfg = trade_flags.load();
            const auto ps = parse_list(trade_ps, "--p_values");
            for (double p : ps)
                if (!(p >= 0.0 && p <= 1.0)) throw UsageError("--p_values: entries must lie in [0, 1]");
            const auto rows = tradeoff_sweep(cfg, ps, cfg.seeds, run_opts);
            emit(tradeoff_csv(rows), trade_out, out);
            return kExitOk;
        }
        if (*compare) {
            const ExperimentConfig a = cmp_flags.load();
            const ExperimentConfig b = cmp_flags.load(cmp_b);
            const auto metric = parse_compare_metric(cmp_metric);
            const auto cmp = paired_compare(a, b, a.seeds, metric, run_opts);
            emit(to_json(cmp, a.seeds).dump(2) + "\n", cmp_out, out);
            return kExitOk;
        }
        if (*stability) {
            ExperimentConfig cfg = stab_flags.load();
            cfg.seeds.resize(1);
            const BuiltObjective built = build_objective(cfg.objective);
            const SeedResult r = run_seed(cfg, *built.train, nullptr, cfg.seeds.front(), run_opts);
            std::string csv = "t,drift\n";
            for (const auto& row : r.rows) {
                if (row.eps_drift) csv += std::to_string(row.t) + "," + format_double(*row.eps_drift) + "\n";
            }
            emit(csv, stab_out, out);
            return r.aborted ? kExitRuntime : kExitOk;
        }
        if (*mse) {
            if (mse_dim < 1 || mse_sigma2 < 0.0 || mse_steps < 1) throw UsageError("mse: invalid dimension, variance or steps");
            const double sigma = std::sqrt(mse_sigma2 / mse_dim);
            auto obj = diagonal_quadratic(ParamVector::LinSpaced(mse_dim, 1.0, 2.0), sigma, mse_seed);
            Rng rng(mse_seed, streams::kProbe);
            const ParamVector x = rng.normal_vector(mse_dim);
            std::string csv = "theta,mse_d,mse_g,ema_oracle\n";
            for (const double theta : parse_list(mse_thetas, "--thetas")) {
                Rng run_rng(mse_seed, streams::kSampler);
                const MseEstimate m = mse_suppression(*obj, x, theta, static_cast<std::size_t>(mse_steps), run_rng);
                csv += format_double(theta) + "," + format_double(m.mse_d) + "," + format_double(m.mse_g) + "," +
                       format_double(ema_steady_state_mse(theta, obj->noise_variance())) + "\n";
            }
            emit(csv, mse_out, out);
            return kExitOk;
        }
        if (*delta) {
            if (delta_dim < 1 || delta_sigma2 < 0.0 || delta_samples < 1) throw UsageError("delta: invalid arguments");
            const double sigma = std::sqrt(delta_sigma2 / delta_dim);
            auto obj = diagonal_quadratic(ParamVector::LinSpaced(delta_dim, 1.0, 2.0), sigma, delta_seed);
            Rng rng(delta_seed, streams::kProbe);
            const ParamVector x = rng.normal_vector(delta_dim);
            const auto n = static_cast<std::size_t>(delta_samples);
            Rng r1(delta_seed, streams::kSampler);
            const auto sam = delta_stability(*obj, x, sam_slope_sampler(*obj, x, 1, delta_seed), delta_rho, n, r1);
            Rng r2(delta_seed, streams::kSampler);
            const auto vas = delta_stability(*obj, x, vasso_slope_sampler(*obj, x, delta_theta, 1, delta_seed),
                                             delta_rho, n, r2);
            std::string csv = "slope,delta,mean_slope_error,bound_violations\n";
            csv += "sam," + format_double(sam.delta) + "," + format_double(sam.mean_slope_error) + "," +
                   std::to_string(sam.bound_violations) + "\n";
            csv += "vasso," + format_double(vas.delta) + "," + format_double(vas.mean_slope_error) + "," +
                   std::to_string(vas.bound_violations) + "\n";
            emit(csv, delta_out, out);
            return kExitOk;
        }
        if (*snr) {
            const auto g = parse_list(snr_grad, "--grad");
            const ParamVector grad = Eigen::Map<const ParamVector>(g.data(), static_cast<Eigen::Index>(g.size()));
            std::vector<double> scales;
            if (!snr_values.empty()) {
                for (const double s : parse_list(snr_values, "--snr")) scales.push_back(scale_for_snr(grad, s));
            } else if (!snr_scales.empty()) {
                scales = parse_list(snr_scales, "--scales");
            } else {
                throw UsageError("snr: give --scales or --snr");
            }
            if (snr_draws < 1) throw UsageError("snr: --draws must be positive");
            Rng rng(snr_seed, streams::kNoise);
            const auto stats = snr_adversary_spread(grad, scales, static_cast<std::size_t>(snr_draws), snr_rho, rng);
            emit(spread_csv(stats), snr_out, out);
            return kExitOk;
        }
        if (*spectrum) {
            ExperimentConfig cfg = spec_flags.load();
            const TrainedPoint tp = trained_point(cfg, !spec_no_train);
            Rng rng(cfg.seeds.front(), streams::kProbe);
            const auto est = lanczos_spectrum(*tp.objective.train, tp.x, spec_k, spec_iters, rng);
            if (est.breakdown) err << "warning: Lanczos breakdown after " << est.lanczos_iters << " iterations\n";
            emit(spectrum_csv(est), spec_out, out);
            return kExitOk;
        }
        if (*slice) {
            ExperimentConfig cfg = slice_flags.load();
            const TrainedPoint tp = trained_point(cfg, !slice_no_train);
            Rng rng(cfg.seeds.front(), streams::kProbe);
            std::vector<ParamVector> dirs{rng.normal_vector(tp.x.size())};
            const auto alphas = parse_grid(slice_alphas, "--alphas");
            std::vector<double> betas;
            if (!slice_betas.empty()) {
                betas = parse_grid(slice_betas, "--betas");
                dirs.push_back(rng.normal_vector(tp.x.size()));
            }
            const auto grid = landscape_slice(*tp.objective.train, tp.x, dirs, alphas, betas);
            emit(landscape_csv(grid), slice_out, out);
            return kExitOk;
        }
        if (*sfw) {
            if (sfw_dim < 1 || sfw_trials < 1 || !(sfw_rho > 0.0)) throw UsageError("sfw-check: invalid arguments");
            Rng rng(sfw_seed, streams::kProbe);
            double worst = 0.0;
            for (int trial = 0; trial < sfw_trials; ++trial) {
                const ParamVector g = rng.normal_vector(sfw_dim);
                const ParamVector x0 = normalize_to_sphere(rng.normal_vector(sfw_dim), sfw_rho);
                const std::size_t batch = 1;
                const double gamma = 1.0;
                const LinearGradSampler sampler = [&g](const ParamVector&, std::size_t, Rng&) { return g; };
                const ParamVector sfw_out = sfw_solve(sampler, sfw_rho, {&batch, 1}, {&gamma, 1}, rng, x0);
                worst = std::max(worst, (sfw_out - sam_adversary(g, sfw_rho)).cwiseAbs().maxCoeff());
            }
            out << "trials," << sfw_trials << "\nmax_abs_deviation," << format_double(worst) << "\n";
            return worst <= 1e-12 ? kExitOk : kExitRuntime;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("vasso-opt");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace vasso
