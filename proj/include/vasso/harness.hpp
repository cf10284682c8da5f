#ifndef VASSO_HARNESS_HPP
#define VASSO_HARNESS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vasso/dataset.hpp"
#include "vasso/landscapes.hpp"
#include "vasso/mlp.hpp"
#include "vasso/optimizers.hpp"
#include "vasso/quadratic.hpp"

namespace vasso {

/// Config parse failure; `path` names the offending field (e.g. "optimizer.rho").
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& message)
        : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

enum class ObjectiveKind { quadratic, mlp, dataset, wells };

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::quadratic;

    // quadratic
    std::vector<double> spectrum;             ///< diagonal of A (used when matrix is empty)
    std::vector<std::vector<double>> matrix;  ///< dense A
    std::vector<double> b;                    ///< defaults to zero
    double sigma = 0.0;
    std::uint64_t noise_seed = 0;

    // all kinds
    std::vector<double> x0;   ///< explicit start; otherwise drawn from the init stream
    double init_scale = 1.0;  ///< x0 = init_scale * N(0, I) for quadratic and wells

    // mlp / dataset
    std::vector<int> layers;
    Activation activation = Activation::tanh;
    double label_noise = 0.0;
    BlobSpec blobs;
    int test_samples_per_class = 0;
    std::uint64_t data_seed = 0;
    std::string path;
    bool has_header = false;

    bool operator==(const ObjectiveSpec&) const = default;
};

struct OptimizerSpec {
    Method method = Method::sgd;
    OptimizerConfig hyper;
    /// SAM-db adversary batch size; 0 means the training batch size.
    std::size_t adv_batch_size = 0;

    bool operator==(const OptimizerSpec&) const = default;
};

struct ExperimentConfig {
    ObjectiveSpec objective;
    OptimizerSpec optimizer;
    std::int64_t horizon = 0;
    std::size_t batch_size = 1;
    std::vector<std::uint64_t> seeds;
    std::int64_t metrics_every = 1;
    std::string output_path;
    bool record_wallclock = false;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys and missing required fields raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Every field, defaults included.
nlohmann::json to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

/// Objective instance plus its held-out counterpart (when one exists).
struct BuiltObjective {
    std::unique_ptr<StochasticObjective> train;
    std::unique_ptr<StochasticObjective> heldout;
};

BuiltObjective build_objective(const ObjectiveSpec& spec);
ParamVector initial_point(const ObjectiveSpec& spec, const StochasticObjective& obj, std::uint64_t seed);

struct MetricsRow {
    std::uint64_t seed = 0;
    std::int64_t t = 0;
    double loss = 0.0;
    std::optional<double> full_grad_norm;
    std::optional<double> eps_drift;
    std::int64_t grad_evals_cum = 0;
    std::optional<double> wallclock_ms;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::int64_t steps_completed = 0;
    bool aborted = false;
    std::string error;
    double final_loss = 0.0;           ///< full objective at the last iterate
    double final_grad_norm = 0.0;
    std::optional<double> heldout_loss;
    double mean_drift = 0.0;
    double max_drift = 0.0;
    std::int64_t total_grad_evals = 0;
    double mean_sq_grad_norm = 0.0;    ///< mean over t of |grad f(x_t)|^2
    std::optional<double> wallclock_ms;
    std::vector<MetricsRow> rows;
    std::vector<double> losses;        ///< minibatch loss per step
};

struct ExperimentResult {
    std::vector<SeedResult> seeds;

    double mean_final_loss() const;
    double mean_drift() const;
    double mean_grad_evals() const;
};

struct RunOptions {
    int threads = 1;
    /// Keep per-step metrics rows (needed for the CSV).
    bool keep_rows = true;
    /// Evaluate |grad f(x_t)|^2 at every step for mean_sq_grad_norm.
    bool track_grad_norm = false;
};

/// Runs one seed of the configured training loop.
SeedResult run_seed(const ExperimentConfig& cfg, const StochasticObjective& obj,
                    const StochasticObjective* heldout, std::uint64_t seed, const RunOptions& opts);

/// Runs every seed; results are ordered like cfg.seeds whatever the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

inline constexpr const char* kMetricsHeader = "seed,t,loss,full_grad_norm,eps_drift,grad_evals_cum,wallclock_ms";

std::string metrics_csv(const ExperimentResult& result);
nlohmann::json summary_json(const ExperimentConfig& cfg, const ExperimentResult& result);
/// `<output stem>.summary.json` beside the metrics file.
std::string summary_path_for(const std::string& output_path);
/// Writes metrics CSV and summary JSON.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

struct TradeoffRow {
    std::string method;
    double p = 1.0;
    double mean_final_loss = 0.0;
    double mean_grad_evals = 0.0;
    std::optional<double> mean_wallclock_ms;
    std::vector<double> final_losses;  ///< per seed
};

/// eVASSO at every p, the gated-SAM analog at every p, and a SAM reference row.
std::vector<TradeoffRow> tradeoff_sweep(const ExperimentConfig& base, std::span<const double> p_values,
                                        std::span<const std::uint64_t> seeds, const RunOptions& opts = {});
std::string tradeoff_csv(const std::vector<TradeoffRow>& rows);

enum class CompareMetric { final_loss, mean_drift };
CompareMetric parse_compare_metric(std::string_view name);

struct PairedComparison {
    std::vector<double> differences;  ///< metric(a) - metric(b), per seed
    int wins_a = 0;                   ///< seeds where a is strictly lower
    int wins_b = 0;
    int ties = 0;
    double p_value = 1.0;             ///< two-sided sign test, ties excluded
};

/// Two-sided sign test p-value for `wins` successes out of `n` at rate 1/2.
double sign_test_p_value(int wins_a, int wins_b);

PairedComparison paired_compare(const ExperimentConfig& a, const ExperimentConfig& b,
                                std::span<const std::uint64_t> seeds, CompareMetric metric,
                                const RunOptions& opts = {});
nlohmann::json to_json(const PairedComparison& cmp, std::span<const std::uint64_t> seeds);

}  // namespace vasso

#endif  // VASSO_HARNESS_HPP
