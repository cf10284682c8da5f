#include "vasso/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <thread>

#include "vasso/csv.hpp"

namespace vasso {

using nlohmann::json;

namespace {

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

// Strict reader over one JSON object: every key must be consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(path_, "expected an object");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) {
            throw ConfigError(join_path(path_, key), "required field missing");
        }
        return j_.at(key);
    }

    void mark(const std::string& key) { seen_.insert(key); }

    std::string path(const std::string& key) const { return join_path(path_, key); }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError(path(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(path(key), "must be finite");
        return d;
    }
    double number(const std::string& key, double fallback) {
        mark(key);
        return has(key) ? number(key) : fallback;
    }

    std::int64_t integer(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
        return v.get<std::int64_t>();
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        mark(key);
        return has(key) ? integer(key) : fallback;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        mark(key);
        if (!has(key)) return fallback;
        return as_unsigned(j_.at(key), path(key));
    }

    bool boolean(const std::string& key, bool fallback) {
        mark(key);
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(path(key), "expected a boolean");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError(path(key), "expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        mark(key);
        return has(key) ? string(key) : fallback;
    }

    std::vector<double> numbers(const std::string& key) {
        mark(key);
        if (!has(key)) return {};
        const json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(path(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(index_path(path(key), i), "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    static std::uint64_t as_unsigned(const json& v, const std::string& where) {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        throw ConfigError(where, "expected a nonnegative integer");
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw ConfigError(join_path(path_, it.key()), "unknown key");
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Schedule parse_schedule(const json& j, const std::string& path, std::int64_t default_horizon) {
    ObjectReader r(j, path);
    Schedule s;
    try {
        s.kind = parse_schedule_kind(r.string("kind"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(r.path("kind"), e.what());
    }
    s.base = r.number("base");
    s.horizon = r.integer("horizon", default_horizon);
    if (s.base < 0.0) throw ConfigError(r.path("base"), "must be nonnegative");
    if (s.horizon <= 0) throw ConfigError(r.path("horizon"), "must be positive");
    r.finish();
    return s;
}

json schedule_json(const Schedule& s) {
    return json{{"kind", std::string(to_string(s.kind))}, {"base", s.base}, {"horizon", s.horizon}};
}

std::string_view objective_kind_name(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::quadratic: return "quadratic";
        case ObjectiveKind::mlp: return "mlp";
        case ObjectiveKind::dataset: return "dataset";
        case ObjectiveKind::wells: return "wells";
    }
    return "quadratic";
}

std::vector<int> parse_layers(ObjectReader& r) {
    const json& v = r.at("layers");
    if (!v.is_array() || v.size() < 2) throw ConfigError(r.path("layers"), "expected at least two layer sizes");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer() || v[i].get<std::int64_t>() <= 0) {
            throw ConfigError(index_path(r.path("layers"), i), "expected a positive integer");
        }
        out.push_back(v[i].get<int>());
    }
    return out;
}

Activation parse_activation_field(ObjectReader& r) {
    const std::string name = r.string("activation", "tanh");
    try {
        return parse_activation(name);
    } catch (const Error& e) {
        throw ConfigError(r.path("activation"), e.what());
    }
}

ObjectiveSpec parse_objective(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    ObjectiveSpec s;
    const std::string kind = r.string("kind");
    s.x0 = r.numbers("x0");
    if (kind == "quadratic") {
        s.kind = ObjectiveKind::quadratic;
        s.spectrum = r.numbers("spectrum");
        r.mark("matrix");
        if (r.has("matrix")) {
            const json& m = j.at("matrix");
            if (!m.is_array()) throw ConfigError(r.path("matrix"), "expected an array of rows");
            for (std::size_t i = 0; i < m.size(); ++i) {
                if (!m[i].is_array()) throw ConfigError(index_path(r.path("matrix"), i), "expected a row array");
                std::vector<double> row;
                for (std::size_t k = 0; k < m[i].size(); ++k) {
                    if (!m[i][k].is_number()) {
                        throw ConfigError(index_path(index_path(r.path("matrix"), i), k), "expected a number");
                    }
                    row.push_back(m[i][k].get<double>());
                }
                s.matrix.push_back(std::move(row));
            }
        }
        if (s.spectrum.empty() == s.matrix.empty()) {
            throw ConfigError(path, "quadratic needs exactly one of 'spectrum' or 'matrix'");
        }
        s.b = r.numbers("b");
        s.sigma = r.number("sigma", 0.0);
        s.noise_seed = r.unsigned_integer("noise_seed", 0);
        s.init_scale = r.number("init_scale", 1.0);
        if (s.sigma < 0.0) throw ConfigError(r.path("sigma"), "must be nonnegative");
    } else if (kind == "mlp") {
        s.kind = ObjectiveKind::mlp;
        s.layers = parse_layers(r);
        s.activation = parse_activation_field(r);
        s.label_noise = r.number("label_noise", 0.0);
        s.data_seed = r.unsigned_integer("data_seed", 0);
        s.test_samples_per_class = static_cast<int>(r.integer("test_samples_per_class", 0));
        r.mark("blobs");
        if (r.has("blobs")) {
            ObjectReader b(j.at("blobs"), r.path("blobs"));
            s.blobs.num_classes = static_cast<int>(b.integer("num_classes", s.blobs.num_classes));
            s.blobs.blobs_per_class = static_cast<int>(b.integer("blobs_per_class", s.blobs.blobs_per_class));
            s.blobs.dim = static_cast<int>(b.integer("dim", s.blobs.dim));
            s.blobs.samples_per_class = static_cast<int>(b.integer("samples_per_class", s.blobs.samples_per_class));
            s.blobs.separation = b.number("separation", s.blobs.separation);
            s.blobs.spread = b.number("spread", s.blobs.spread);
            b.finish();
        }
        if (s.test_samples_per_class < 0) throw ConfigError(r.path("test_samples_per_class"), "must be nonnegative");
    } else if (kind == "dataset") {
        s.kind = ObjectiveKind::dataset;
        s.path = r.string("path");
        s.has_header = r.boolean("has_header", false);
        s.layers = parse_layers(r);
        s.activation = parse_activation_field(r);
        s.label_noise = r.number("label_noise", 0.0);
        s.data_seed = r.unsigned_integer("data_seed", 0);
    } else if (kind == "wells") {
        s.kind = ObjectiveKind::wells;
        s.sigma = r.number("sigma", 0.0);
        s.noise_seed = r.unsigned_integer("noise_seed", 0);
        s.init_scale = r.number("init_scale", 1.0);
        if (s.sigma < 0.0) throw ConfigError(r.path("sigma"), "must be nonnegative");
    } else {
        throw ConfigError(r.path("kind"), "unknown objective '" + kind + "'");
    }
    if (s.label_noise < 0.0 || s.label_noise > 1.0) {
        throw ConfigError(r.path("label_noise"), "must lie in [0, 1]");
    }
    r.finish();
    return s;
}

json objective_json(const ObjectiveSpec& s) {
    json j{{"kind", std::string(objective_kind_name(s.kind))}};
    if (!s.x0.empty()) j["x0"] = s.x0;
    switch (s.kind) {
        case ObjectiveKind::quadratic:
            if (!s.matrix.empty()) {
                j["matrix"] = s.matrix;
            } else {
                j["spectrum"] = s.spectrum;
            }
            if (!s.b.empty()) j["b"] = s.b;
            j["sigma"] = s.sigma;
            j["noise_seed"] = s.noise_seed;
            j["init_scale"] = s.init_scale;
            break;
        case ObjectiveKind::mlp:
            j["layers"] = s.layers;
            j["activation"] = std::string(to_string(s.activation));
            j["label_noise"] = s.label_noise;
            j["data_seed"] = s.data_seed;
            j["test_samples_per_class"] = s.test_samples_per_class;
            j["blobs"] = json{{"num_classes", s.blobs.num_classes},
                              {"blobs_per_class", s.blobs.blobs_per_class},
                              {"dim", s.blobs.dim},
                              {"samples_per_class", s.blobs.samples_per_class},
                              {"separation", s.blobs.separation},
                              {"spread", s.blobs.spread}};
            break;
        case ObjectiveKind::dataset:
            j["path"] = s.path;
            j["has_header"] = s.has_header;
            j["layers"] = s.layers;
            j["activation"] = std::string(to_string(s.activation));
            j["label_noise"] = s.label_noise;
            j["data_seed"] = s.data_seed;
            break;
        case ObjectiveKind::wells:
            j["sigma"] = s.sigma;
            j["noise_seed"] = s.noise_seed;
            j["init_scale"] = s.init_scale;
            break;
    }
    return j;
}

OptimizerSpec parse_optimizer(const json& j, const std::string& path, std::int64_t horizon) {
    ObjectReader r(j, path);
    OptimizerSpec s;
    try {
        s.method = parse_method(r.string("kind"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(r.path("kind"), e.what());
    }
    OptimizerConfig& h = s.hyper;
    h.rho = r.number("rho", 0.05);
    h.theta = r.number("theta", 0.2);
    h.p = r.number("p", 1.0);
    h.momentum = r.number("momentum", 0.0);
    h.weight_decay = r.number("weight_decay", 0.0);
    h.lr = parse_schedule(r.at("lr"), r.path("lr"), horizon);
    r.mark("rho_schedule");
    if (r.has("rho_schedule")) {
        h.rho_schedule = parse_schedule(j.at("rho_schedule"), r.path("rho_schedule"), horizon);
    }
    s.adv_batch_size = static_cast<std::size_t>(r.unsigned_integer("adv_batch_size", 0));
    r.finish();
    try {
        validate(h);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
    return s;
}

json optimizer_json(const OptimizerSpec& s) {
    json j{{"kind", std::string(to_string(s.method))},
           {"rho", s.hyper.rho},
           {"theta", s.hyper.theta},
           {"p", s.hyper.p},
           {"momentum", s.hyper.momentum},
           {"weight_decay", s.hyper.weight_decay},
           {"lr", schedule_json(s.hyper.lr)},
           {"adv_batch_size", s.adv_batch_size}};
    if (s.hyper.rho_schedule) j["rho_schedule"] = schedule_json(*s.hyper.rho_schedule);
    return j;
}

ParamVector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const ParamVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double metric_value(const SeedResult& r, CompareMetric metric) {
    if (r.aborted) return std::numeric_limits<double>::infinity();
    if (metric == CompareMetric::mean_drift) return r.mean_drift;
    return r.heldout_loss ? *r.heldout_loss : r.final_loss;
}

json nullable(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    ObjectReader r(j, "");
    ExperimentConfig cfg;
    cfg.horizon = r.integer("horizon");
    if (cfg.horizon <= 0) throw ConfigError("horizon", "must be positive");
    cfg.objective = parse_objective(r.at("objective"), "objective");
    cfg.optimizer = parse_optimizer(r.at("optimizer"), "optimizer", cfg.horizon);
    const std::int64_t batch = r.integer("batch_size");
    if (batch <= 0) throw ConfigError("batch_size", "must be positive");
    cfg.batch_size = static_cast<std::size_t>(batch);
    const json& seeds = r.at("seeds");
    if (!seeds.is_array() || seeds.empty()) throw ConfigError("seeds", "expected a non-empty array");
    std::set<std::uint64_t> unique;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto s = ObjectReader::as_unsigned(seeds[i], index_path("seeds", i));
        if (!unique.insert(s).second) throw ConfigError(index_path("seeds", i), "duplicate seed");
        cfg.seeds.push_back(s);
    }
    cfg.metrics_every = r.integer("metrics_every", 1);
    if (cfg.metrics_every <= 0) throw ConfigError("metrics_every", "must be positive");
    cfg.output_path = r.string("output_path", "");
    cfg.record_wallclock = r.boolean("record_wallclock", false);
    r.finish();
    return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

ExperimentConfig load_config(const std::string& path) {
    return parse_config_text(read_text_file(path));
}

json to_json(const ExperimentConfig& cfg) {
    return json{{"objective", objective_json(cfg.objective)},
                {"optimizer", optimizer_json(cfg.optimizer)},
                {"horizon", cfg.horizon},
                {"batch_size", cfg.batch_size},
                {"seeds", cfg.seeds},
                {"metrics_every", cfg.metrics_every},
                {"output_path", cfg.output_path},
                {"record_wallclock", cfg.record_wallclock}};
}

void validate(const ExperimentConfig& cfg) {
    // Re-parsing the serialised form applies every field check.
    parse_config(to_json(cfg));
}

BuiltObjective build_objective(const ObjectiveSpec& spec) {
    BuiltObjective out;
    switch (spec.kind) {
        case ObjectiveKind::quadratic: {
            DenseMatrix A;
            if (!spec.matrix.empty()) {
                const auto n = static_cast<Eigen::Index>(spec.matrix.size());
                A.resize(n, n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const auto& row = spec.matrix[static_cast<std::size_t>(i)];
                    if (static_cast<Eigen::Index>(row.size()) != n) throw ConfigError("objective.matrix", "must be square");
                    for (Eigen::Index k = 0; k < n; ++k) A(i, k) = row[static_cast<std::size_t>(k)];
                }
            } else {
                A = to_vector(spec.spectrum).asDiagonal();
            }
            ParamVector b = spec.b.empty() ? ParamVector::Zero(A.rows()) : to_vector(spec.b);
            out.train = quadratic_objective(std::move(A), std::move(b), spec.sigma, spec.noise_seed);
            break;
        }
        case ObjectiveKind::mlp: {
            BlobSpec blobs = spec.blobs;
            blobs.samples_per_class += spec.test_samples_per_class;
            Rng data_rng(spec.data_seed, streams::kData);
            const Dataset all = make_blobs(blobs, data_rng);
            const int train_per_class = spec.blobs.samples_per_class;
            auto train = std::make_shared<Dataset>();
            auto test = std::make_shared<Dataset>();
            train->num_classes = test->num_classes = all.num_classes;
            std::vector<Eigen::Index> train_rows;
            std::vector<Eigen::Index> test_rows;
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(all.size()); ++i) {
                const auto within = i % blobs.samples_per_class;
                (within < train_per_class ? train_rows : test_rows).push_back(i);
            }
            auto gather = [&all](Dataset& d, const std::vector<Eigen::Index>& rows) {
                d.features.resize(static_cast<Eigen::Index>(rows.size()), all.feature_dim());
                for (std::size_t k = 0; k < rows.size(); ++k) {
                    d.features.row(static_cast<Eigen::Index>(k)) = all.features.row(rows[k]);
                    d.labels.push_back(all.labels[static_cast<std::size_t>(rows[k])]);
                }
            };
            gather(*train, train_rows);
            Rng noise_rng(spec.data_seed, streams::kNoise);
            auto noisy = std::make_shared<const Dataset>(inject_label_noise(*train, spec.label_noise, noise_rng));
            out.train = mlp_objective(spec.layers, spec.activation, noisy);
            if (!test_rows.empty()) {
                gather(*test, test_rows);
                out.heldout = mlp_objective(spec.layers, spec.activation, test);
            }
            break;
        }
        case ObjectiveKind::dataset: {
            const Dataset raw = read_csv_dataset(spec.path, spec.has_header);
            Rng noise_rng(spec.data_seed, streams::kNoise);
            auto noisy = std::make_shared<const Dataset>(inject_label_noise(raw, spec.label_noise, noise_rng));
            out.train = mlp_objective(spec.layers, spec.activation, noisy);
            break;
        }
        case ObjectiveKind::wells:
            out.train = sharp_flat_wells(spec.sigma, spec.noise_seed);
            break;
    }
    return out;
}

ParamVector initial_point(const ObjectiveSpec& spec, const StochasticObjective& obj, std::uint64_t seed) {
    if (!spec.x0.empty()) {
        if (static_cast<Eigen::Index>(spec.x0.size()) != obj.dim()) {
            throw ConfigError("objective.x0", "has " + std::to_string(spec.x0.size()) + " entries, objective needs " +
                                                  std::to_string(obj.dim()));
        }
        return to_vector(spec.x0);
    }
    Rng rng(seed, streams::kInit);
    if (const auto* mlp = dynamic_cast<const MlpObjective*>(&obj)) {
        return mlp->network().init_parameters(rng);
    }
    return rng.normal_vector(obj.dim(), spec.init_scale);
}

SeedResult run_seed(const ExperimentConfig& cfg, const StochasticObjective& obj,
                    const StochasticObjective* heldout, std::uint64_t seed, const RunOptions& opts) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    auto elapsed_ms = [&start]() {
        return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    };

    SeedResult res;
    res.seed = seed;
    OptimizerConfig hyper = cfg.optimizer.hyper;
    hyper.seed = seed;
    const Method method = cfg.optimizer.method;

    MinibatchSampler sampler(obj.num_samples(), cfg.batch_size, Rng(seed, streams::kSampler));
    const std::size_t adv_size = cfg.optimizer.adv_batch_size ? cfg.optimizer.adv_batch_size : cfg.batch_size;
    std::optional<MinibatchSampler> adv_sampler;
    if (method == Method::sam_db) {
        adv_sampler.emplace(obj.num_samples(), adv_size, Rng(seed, streams::kAdversaryBatch));
    }
    Rng gate(seed, streams::kGate);

    ParamVector x = initial_point(cfg.objective, obj, seed);
    OptimizerState state;
    ParamVector last_eps;
    double drift_sum = 0.0;
    std::int64_t drift_count = 0;
    double sq_grad_sum = 0.0;

    for (std::int64_t t = 0; t < cfg.horizon; ++t) {
        MetricsRow row;
        row.seed = seed;
        row.t = t;
        const bool sample_norm = t % cfg.metrics_every == 0;
        if (sample_norm || opts.track_grad_norm) {
            const double gn = obj.full_grad(x).norm();
            if (sample_norm) row.full_grad_norm = gn;
            sq_grad_sum += gn * gn;
        }
        const Batch batch = sampler.next();
        StepReport report;
        try {
            switch (method) {
                case Method::sgd: report = sgd_step(obj, x, batch, hyper, state); break;
                case Method::sam: report = sam_step(obj, x, batch, hyper, state); break;
                case Method::vasso: report = vasso_step(obj, x, batch, hyper, state); break;
                case Method::evasso: report = evasso_step(obj, x, batch, hyper, state, gate); break;
                case Method::esam: report = esam_step(obj, x, batch, hyper, state, gate); break;
                case Method::sam_db: {
                    const Batch adv = adv_sampler->next();
                    report = samdb_step(obj, x, batch, adv, hyper, state);
                    break;
                }
            }
        } catch (const NonFiniteError& e) {
            res.aborted = true;
            res.error = e.what();
            break;
        }
        res.total_grad_evals += report.grad_evals;
        if (report.perturbed) {
            if (last_eps.size() > 0) {
                const double drift = (report.epsilon - last_eps).norm();
                row.eps_drift = drift;
                drift_sum += drift;
                ++drift_count;
                res.max_drift = std::max(res.max_drift, drift);
            }
            last_eps = report.epsilon;
        }
        row.loss = report.loss;
        row.grad_evals_cum = res.total_grad_evals;
        if (cfg.record_wallclock) row.wallclock_ms = elapsed_ms();
        res.losses.push_back(report.loss);
        if (opts.keep_rows) res.rows.push_back(row);
        ++res.steps_completed;
    }

    res.mean_drift = drift_count > 0 ? drift_sum / static_cast<double>(drift_count) : 0.0;
    res.mean_sq_grad_norm = res.steps_completed > 0 ? sq_grad_sum / static_cast<double>(res.steps_completed) : 0.0;
    if (res.aborted) {
        res.final_loss = std::numeric_limits<double>::quiet_NaN();
        res.final_grad_norm = std::numeric_limits<double>::quiet_NaN();
    } else {
        res.final_loss = obj.full_loss(x);
        res.final_grad_norm = obj.full_grad(x).norm();
        if (heldout != nullptr) res.heldout_loss = heldout->full_loss(x);
    }
    if (cfg.record_wallclock) res.wallclock_ms = elapsed_ms();
    return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (cfg.seeds.empty()) throw ConfigError("seeds", "expected a non-empty array");
    const BuiltObjective built = build_objective(cfg.objective);
    ExperimentResult result;
    result.seeds.resize(cfg.seeds.size());

    const int workers = std::max(1, std::min<int>(opts.threads, static_cast<int>(cfg.seeds.size())));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(cfg.seeds.size());
    auto work = [&]() {
        for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
            try {
                result.seeds[i] = run_seed(cfg, *built.train, built.heldout.get(), cfg.seeds[i], opts);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return result;
}

double ExperimentResult::mean_final_loss() const {
    double s = 0.0;
    for (const auto& r : seeds) s += r.heldout_loss ? *r.heldout_loss : r.final_loss;
    return seeds.empty() ? 0.0 : s / static_cast<double>(seeds.size());
}

double ExperimentResult::mean_drift() const {
    double s = 0.0;
    for (const auto& r : seeds) s += r.mean_drift;
    return seeds.empty() ? 0.0 : s / static_cast<double>(seeds.size());
}

double ExperimentResult::mean_grad_evals() const {
    double s = 0.0;
    for (const auto& r : seeds) s += static_cast<double>(r.total_grad_evals);
    return seeds.empty() ? 0.0 : s / static_cast<double>(seeds.size());
}

std::string metrics_csv(const ExperimentResult& result) {
    std::string out = std::string(kMetricsHeader) + "\n";
    for (const auto& seed : result.seeds) {
        for (const auto& row : seed.rows) {
            out += std::to_string(row.seed) + "," + std::to_string(row.t) + "," + format_double(row.loss) + "," +
                   format_optional(row.full_grad_norm) + "," + format_optional(row.eps_drift) + "," +
                   std::to_string(row.grad_evals_cum) + "," + format_optional(row.wallclock_ms) + "\n";
        }
    }
    return out;
}

json summary_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
    json seeds = json::array();
    std::int64_t aborted = 0;
    for (const auto& r : result.seeds) {
        json s{{"seed", r.seed},
               {"steps_completed", r.steps_completed},
               {"aborted", r.aborted},
               {"final_loss", nullable(r.final_loss)},
               {"final_grad_norm", nullable(r.final_grad_norm)},
               {"mean_drift", r.mean_drift},
               {"max_drift", r.max_drift},
               {"total_grad_evals", r.total_grad_evals}};
        if (r.aborted) s["error"] = r.error;
        if (r.heldout_loss) s["heldout_loss"] = nullable(*r.heldout_loss);
        if (r.wallclock_ms) s["wallclock_ms"] = *r.wallclock_ms;
        aborted += r.aborted ? 1 : 0;
        seeds.push_back(std::move(s));
    }
    return json{{"config", to_json(cfg)},
                {"seeds", std::move(seeds)},
                {"aggregate",
                 {{"num_seeds", result.seeds.size()},
                  {"aborted_seeds", aborted},
                  {"mean_final_loss", nullable(result.mean_final_loss())},
                  {"mean_drift", result.mean_drift()},
                  {"mean_total_grad_evals", result.mean_grad_evals()}}}};
}

std::string summary_path_for(const std::string& output_path) {
    std::filesystem::path p(output_path);
    p.replace_extension();
    return p.string() + ".summary.json";
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
    if (cfg.output_path.empty()) throw ConfigError("output_path", "required to write outputs");
    write_text_file(cfg.output_path, metrics_csv(result));
    write_text_file(summary_path_for(cfg.output_path), summary_json(cfg, result).dump(2) + "\n");
}

std::vector<TradeoffRow> tradeoff_sweep(const ExperimentConfig& base, std::span<const double> p_values,
                                        std::span<const std::uint64_t> seeds, const RunOptions& opts) {
    for (const double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error("tradeoff_sweep: p values must lie in [0, 1]");
    }
    RunOptions run_opts = opts;
    run_opts.keep_rows = false;
    auto run_row = [&](Method method, double p) {
        ExperimentConfig cfg = base;
        cfg.seeds.assign(seeds.begin(), seeds.end());
        cfg.optimizer.method = method;
        cfg.optimizer.hyper.p = p;
        const ExperimentResult res = run_experiment(cfg, run_opts);
        TradeoffRow row;
        row.method = std::string(to_string(method));
        row.p = p;
        row.mean_final_loss = res.mean_final_loss();
        row.mean_grad_evals = res.mean_grad_evals();
        if (base.record_wallclock) {
            double w = 0.0;
            for (const auto& s : res.seeds) w += s.wallclock_ms.value_or(0.0);
            row.mean_wallclock_ms = w / static_cast<double>(res.seeds.size());
        }
        for (const auto& s : res.seeds) row.final_losses.push_back(s.heldout_loss ? *s.heldout_loss : s.final_loss);
        return row;
    };
    std::vector<TradeoffRow> rows;
    for (const double p : p_values) rows.push_back(run_row(Method::evasso, p));
    for (const double p : p_values) rows.push_back(run_row(Method::esam, p));
    rows.push_back(run_row(Method::sam, 1.0));
    return rows;
}

std::string tradeoff_csv(const std::vector<TradeoffRow>& rows) {
    std::string out = "method,p,mean_final_loss,mean_grad_evals,mean_wallclock_ms\n";
    for (const auto& r : rows) {
        out += r.method + "," + format_double(r.p) + "," + format_double(r.mean_final_loss) + "," +
               format_double(r.mean_grad_evals) + "," + format_optional(r.mean_wallclock_ms) + "\n";
    }
    return out;
}

CompareMetric parse_compare_metric(std::string_view name) {
    if (name == "final_loss") return CompareMetric::final_loss;
    if (name == "mean_drift") return CompareMetric::mean_drift;
    throw Error("unknown comparison metric '" + std::string(name) + "'");
}

double sign_test_p_value(int wins_a, int wins_b) {
    const int n = wins_a + wins_b;
    if (n == 0) return 1.0;
    const int k = std::min(wins_a, wins_b);
    // P(X <= k) for X ~ Binomial(n, 1/2), accumulated in log space.
    double tail = 0.0;
    for (int i = 0; i <= k; ++i) {
        const double log_term = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                                n * std::log(2.0);
        tail += std::exp(log_term);
    }
    return std::min(1.0, 2.0 * tail);
}

PairedComparison paired_compare(const ExperimentConfig& a, const ExperimentConfig& b,
                                std::span<const std::uint64_t> seeds, CompareMetric metric,
                                const RunOptions& opts) {
    auto shared_fields = [](const ExperimentConfig& c) {
        json j = to_json(c);
        j.erase("optimizer");
        j.erase("seeds");
        j.erase("output_path");
        return j;
    };
    const json fa = shared_fields(a);
    const json fb = shared_fields(b);
    if (fa != fb) {
        for (auto it = fa.begin(); it != fa.end(); ++it) {
            if (!fb.contains(it.key()) || fb.at(it.key()) != it.value()) {
                throw ConfigError(it.key(), "configs under comparison may differ only in the optimizer");
            }
        }
        throw ConfigError("", "configs under comparison may differ only in the optimizer");
    }
    RunOptions run_opts = opts;
    run_opts.keep_rows = false;
    ExperimentConfig ca = a;
    ExperimentConfig cb = b;
    ca.seeds.assign(seeds.begin(), seeds.end());
    cb.seeds.assign(seeds.begin(), seeds.end());
    const ExperimentResult ra = run_experiment(ca, run_opts);
    const ExperimentResult rb = run_experiment(cb, run_opts);

    PairedComparison cmp;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const double va = metric_value(ra.seeds[i], metric);
        const double vb = metric_value(rb.seeds[i], metric);
        const double diff = (std::isinf(va) && std::isinf(vb)) ? 0.0 : va - vb;
        cmp.differences.push_back(diff);
        if (diff < 0.0) {
            ++cmp.wins_a;
        } else if (diff > 0.0) {
            ++cmp.wins_b;
        } else {
            ++cmp.ties;
        }
    }
    cmp.p_value = sign_test_p_value(cmp.wins_a, cmp.wins_b);
    return cmp;
}

json to_json(const PairedComparison& cmp, std::span<const std::uint64_t> seeds) {
    json per_seed = json::array();
    for (std::size_t i = 0; i < cmp.differences.size(); ++i) {
        per_seed.push_back(json{{"seed", seeds[i]}, {"difference", nullable(cmp.differences[i])}});
    }
    return json{{"per_seed", std::move(per_seed)},
                {"wins_a", cmp.wins_a},
                {"wins_b", cmp.wins_b},
                {"ties", cmp.ties},
                {"p_value", cmp.p_value}};
}

}  // namespace vasso
