#include "vasso/mlp.hpp"

#include <cmath>

namespace vasso {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajorMatrix>;
using Weights = Eigen::Map<RowMajorMatrix>;

void activate(DenseMatrix& z, Activation a) {
    if (a == Activation::relu) {
        z = z.cwiseMax(0.0);
    } else {
        z = z.array().tanh().matrix();
    }
}

// Derivative expressed through the activation output h.
DenseMatrix activation_slope(const DenseMatrix& h, Activation a) {
    if (a == Activation::relu) {
        return (h.array() > 0.0).cast<double>().matrix();
    }
    return (1.0 - h.array().square()).matrix();
}

}  // namespace

std::string_view to_string(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw Error("unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
    if (sizes_.size() < 2) {
        throw Error("mlp: need at least input and output sizes");
    }
    for (const int s : sizes_) {
        if (s <= 0) throw Error("mlp: layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(num_params_);
        num_params_ += static_cast<Eigen::Index>(sizes_[l] + 1) * sizes_[l + 1];
    }
}

Eigen::Index Mlp::bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<Eigen::Index>(sizes_[layer]) * sizes_[layer + 1];
}

std::vector<Eigen::Index> Mlp::neuron_parameters(std::size_t layer, int neuron) const {
    std::vector<Eigen::Index> idx;
    const int in = sizes_[layer];
    const Eigen::Index row = offsets_[layer] + static_cast<Eigen::Index>(neuron) * in;
    for (int j = 0; j < in; ++j) idx.push_back(row + j);
    idx.push_back(bias_offset(layer) + neuron);
    return idx;
}

ParamVector Mlp::init_parameters(Rng& rng) const {
    ParamVector p = ParamVector::Zero(num_params_);
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        const Eigen::Index count = static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1];
        for (Eigen::Index k = 0; k < count; ++k) {
            p[offsets_[l] + k] = scale * rng.normal();
        }
    }
    return p;
}

DenseMatrix Mlp::logits(const ParamVector& params, const DenseMatrix& inputs) const {
    if (params.size() != num_params_) {
        throw DimensionError("mlp: parameter vector has wrong size");
    }
    if (inputs.cols() != sizes_.front()) {
        throw DimensionError("mlp: input width does not match first layer");
    }
    DenseMatrix h = inputs;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        ConstWeights W(params.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        const auto b = params.segment(bias_offset(l), sizes_[l + 1]);
        DenseMatrix z = h * W.transpose();
        z.rowwise() += b.transpose();
        if (l + 1 < num_layers()) activate(z, activation_);
        h = std::move(z);
    }
    return h;
}

LossGrad Mlp::loss_grad(const ParamVector& params, const DenseMatrix& inputs,
                        std::span<const int> labels) const {
    if (params.size() != num_params_) {
        throw DimensionError("mlp: parameter vector has wrong size");
    }
    if (inputs.cols() != sizes_.front() || static_cast<std::size_t>(inputs.rows()) != labels.size()) {
        throw DimensionError("mlp: batch shape mismatch");
    }
    const Eigen::Index m = inputs.rows();
    LossGrad out;
    out.grad = ParamVector::Zero(num_params_);
    if (m == 0) return out;

    // Forward, keeping every layer's output.
    std::vector<DenseMatrix> acts;
    acts.reserve(num_layers() + 1);
    acts.push_back(inputs);
    for (std::size_t l = 0; l < num_layers(); ++l) {
        ConstWeights W(params.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        const auto b = params.segment(bias_offset(l), sizes_[l + 1]);
        DenseMatrix z = acts.back() * W.transpose();
        z.rowwise() += b.transpose();
        if (l + 1 < num_layers()) activate(z, activation_);
        acts.push_back(std::move(z));
    }

    // Softmax cross-entropy, stabilised by the row max.
    const DenseMatrix& z = acts.back();
    DenseMatrix delta(m, z.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= z.cols()) {
            throw Error("mlp: label " + std::to_string(y) + " outside output width");
        }
        const double zmax = z.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (z.row(i).array() - zmax).exp().matrix();
        const double sum = e.sum();
        total += std::log(sum) + zmax - z(i, y);
        delta.row(i) = e / sum;
        delta(i, y) -= 1.0;
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    out.loss = total * inv_m;
    delta *= inv_m;

    for (std::size_t l = num_layers(); l-- > 0;) {
        Weights dW(out.grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        dW.noalias() = delta.transpose() * acts[l];
        out.grad.segment(bias_offset(l), sizes_[l + 1]) = delta.colwise().sum().transpose();
        if (l > 0) {
            ConstWeights W(params.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
            DenseMatrix upstream = delta * W;
            delta = upstream.cwiseProduct(activation_slope(acts[l], activation_));
        }
    }
    return out;
}

MlpObjective::MlpObjective(Mlp net, std::shared_ptr<const Dataset> data)
    : net_(std::move(net)), data_(std::move(data)) {}

LossGrad MlpObjective::loss_grad(const ParamVector& x, BatchView batch) const {
    DenseMatrix inputs(static_cast<Eigen::Index>(batch.size()), data_->feature_dim());
    std::vector<int> labels(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        if (batch[k] >= data_->size()) {
            throw Error("mlp: sample index " + std::to_string(batch[k]) + " out of range");
        }
        inputs.row(static_cast<Eigen::Index>(k)) = data_->features.row(static_cast<Eigen::Index>(batch[k]));
        labels[k] = data_->labels[batch[k]];
    }
    return net_.loss_grad(x, inputs, labels);
}

double MlpObjective::full_loss(const ParamVector& x) const {
    return net_.loss_grad(x, data_->features, data_->labels).loss;
}

ParamVector MlpObjective::full_grad(const ParamVector& x) const {
    return net_.loss_grad(x, data_->features, data_->labels).grad;
}

double MlpObjective::accuracy(const ParamVector& x) const {
    const DenseMatrix z = net_.logits(x, data_->features);
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        Eigen::Index arg = 0;
        z.row(i).maxCoeff(&arg);
        hits += arg == data_->labels[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(data_->size());
}

std::unique_ptr<MlpObjective> mlp_objective(std::vector<int> layer_sizes, Activation activation,
                                            std::shared_ptr<const Dataset> data, LossKind /*loss*/) {
    if (!data) {
        throw Error("mlp: no dataset");
    }
    validate(*data);
    Mlp net(std::move(layer_sizes), activation);
    if (net.layer_sizes().front() != data->feature_dim()) {
        throw DimensionError("mlp: first layer size " + std::to_string(net.layer_sizes().front()) +
                             " differs from feature width " + std::to_string(data->feature_dim()));
    }
    if (data->num_classes > net.layer_sizes().back()) {
        throw DimensionError("mlp: labels exceed output layer width");
    }
    return std::make_unique<MlpObjective>(std::move(net), std::move(data));
}

}  // namespace vasso
