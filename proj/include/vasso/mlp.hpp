#ifndef VASSO_MLP_HPP
#define VASSO_MLP_HPP

#include <memory>
#include <string_view>
#include <vector>

#include "vasso/dataset.hpp"
#include "vasso/objective.hpp"

namespace vasso {

enum class Activation { relu, tanh };
enum class LossKind { cross_entropy };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Fully connected network with flattened parameters.
///
/// Layer l maps sizes[l] -> sizes[l+1] and occupies a row-major weight block
/// (one row per output neuron) followed by its bias. Hidden layers apply the
/// activation; the last layer emits logits.
class Mlp {
public:
    Mlp(std::vector<int> layer_sizes, Activation activation);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    Activation activation() const { return activation_; }
    std::size_t num_layers() const { return sizes_.size() - 1; }
    Eigen::Index num_parameters() const { return num_params_; }

    Eigen::Index weight_offset(std::size_t layer) const { return offsets_[layer]; }
    Eigen::Index bias_offset(std::size_t layer) const;

    /// Parameter indices feeding one output neuron: its weight row and bias.
    std::vector<Eigen::Index> neuron_parameters(std::size_t layer, int neuron) const;

    /// Weights ~ N(0, 1/fan_in), biases zero.
    ParamVector init_parameters(Rng& rng) const;

    DenseMatrix logits(const ParamVector& params, const DenseMatrix& inputs) const;

    /// Mean cross-entropy over the rows of `inputs` and its gradient.
    LossGrad loss_grad(const ParamVector& params, const DenseMatrix& inputs,
                       std::span<const int> labels) const;

private:
    std::vector<int> sizes_;
    Activation activation_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index num_params_ = 0;
};

class MlpObjective final : public StochasticObjective {
public:
    MlpObjective(Mlp net, std::shared_ptr<const Dataset> data);

    Eigen::Index dim() const override { return net_.num_parameters(); }
    std::size_t num_samples() const override { return data_->size(); }
    std::string name() const override { return "mlp"; }

    LossGrad loss_grad(const ParamVector& x, BatchView batch) const override;
    double full_loss(const ParamVector& x) const override;
    ParamVector full_grad(const ParamVector& x) const override;

    /// Fraction of samples whose arg-max logit matches the label.
    double accuracy(const ParamVector& x) const;

    const Mlp& network() const { return net_; }
    const Dataset& data() const { return *data_; }

private:
    Mlp net_;
    std::shared_ptr<const Dataset> data_;
};

/// Validates shapes (first layer equals feature width, labels below the output
/// width) and builds the objective.
std::unique_ptr<MlpObjective> mlp_objective(std::vector<int> layer_sizes, Activation activation,
                                            std::shared_ptr<const Dataset> data,
                                            LossKind loss = LossKind::cross_entropy);

}  // namespace vasso

#endif  // VASSO_MLP_HPP
