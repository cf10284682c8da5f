#include "vasso/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vasso {

void validate(const Dataset& data) {
    if (data.features.rows() != static_cast<Eigen::Index>(data.labels.size())) {
        throw DimensionError("dataset: feature rows and label count differ");
    }
    if (data.num_classes < 1) {
        throw Error("dataset: needs at least one class");
    }
    for (const int y : data.labels) {
        if (y < 0 || y >= data.num_classes) {
            throw Error("dataset: label " + std::to_string(y) + " out of range");
        }
    }
}

Dataset inject_label_noise(const Dataset& data, double fraction, Rng& rng) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw Error("label noise fraction must lie in [0, 1]");
    }
    Dataset noisy = data;
    const std::size_t n = data.size();
    const auto flips = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (flips == 0) {
        return noisy;
    }
    if (data.num_classes < 2) {
        throw Error("label noise needs at least two classes");
    }
    const auto order = permutation(n, rng);
    const auto others = static_cast<std::uint64_t>(data.num_classes - 1);
    for (std::size_t k = 0; k < flips; ++k) {
        const std::size_t i = order[k];
        // Draw from the other classes by skipping over the original label.
        auto target = static_cast<int>(rng.uniform_index(others));
        if (target >= data.labels[i]) {
            ++target;
        }
        noisy.labels[i] = target;
    }
    return noisy;
}

std::size_t count_label_differences(const Dataset& a, const Dataset& b) {
    if (a.size() != b.size()) {
        throw DimensionError("label comparison: sizes differ");
    }
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += a.labels[i] != b.labels[i] ? 1 : 0;
    }
    return diff;
}

Dataset make_blobs(const BlobSpec& spec, Rng& rng) {
    if (spec.num_classes < 1 || spec.blobs_per_class < 1 || spec.dim < 1 || spec.samples_per_class < 1) {
        throw Error("blobs: all counts must be positive");
    }
    const int n = spec.num_classes * spec.samples_per_class;
    Dataset data;
    data.num_classes = spec.num_classes;
    data.features.resize(n, spec.dim);
    data.labels.resize(static_cast<std::size_t>(n));

    std::vector<ParamVector> centers;
    for (int c = 0; c < spec.num_classes * spec.blobs_per_class; ++c) {
        ParamVector dir = rng.normal_vector(spec.dim);
        centers.push_back(normalize_to_sphere(dir, spec.separation));
    }
    int row = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
            const int blob = c * spec.blobs_per_class + s % spec.blobs_per_class;
            data.features.row(row) =
                (centers[static_cast<std::size_t>(blob)] + rng.normal_vector(spec.dim, spec.spread)).transpose();
            data.labels[static_cast<std::size_t>(row)] = c;
        }
    }
    return data;
}

namespace {

double parse_double(std::string_view cell, std::size_t line) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        throw Error("csv line " + std::to_string(line) + ": bad number '" + std::string(cell) + "'");
    }
    return value;
}

}  // namespace

Dataset read_csv_dataset(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open dataset '" + path + "'");
    }
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && has_header) continue;
        if (line.empty() || line == "\r") continue;
        std::vector<double> cells;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            cells.push_back(parse_double(rest.substr(0, comma), lineno));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (cells.size() < 2) {
            throw Error("csv line " + std::to_string(lineno) + ": need features and a label");
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width) {
            throw Error("csv line " + std::to_string(lineno) + ": inconsistent column count");
        }
        const double label = cells.back();
        if (label < 0 || label != std::floor(label)) {
            throw Error("csv line " + std::to_string(lineno) + ": label must be a nonnegative integer");
        }
        labels.push_back(static_cast<int>(label));
        cells.pop_back();
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) {
        throw Error("dataset '" + path + "' has no rows");
    }
    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j + 1 < width; ++j) {
            data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    data.labels = std::move(labels);
    data.num_classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    return data;
}

}  // namespace vasso
