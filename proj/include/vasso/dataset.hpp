#ifndef VASSO_DATASET_HPP
#define VASSO_DATASET_HPP

#include <string>
#include <vector>

#include "vasso/core.hpp"
#include "vasso/rng.hpp"

namespace vasso {

/// Labelled classification data, one row per sample.
struct Dataset {
    DenseMatrix features;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    Eigen::Index feature_dim() const { return features.cols(); }
};

/// Checks shapes and label range; throws vasso::Error on violation.
void validate(const Dataset& data);

/// Returns a copy in which exactly floor(fraction * n) labels are replaced by a
/// class drawn uniformly from the other classes. The input is untouched.
Dataset inject_label_noise(const Dataset& data, double fraction, Rng& rng);

/// Number of positions where the two label vectors differ.
std::size_t count_label_differences(const Dataset& a, const Dataset& b);

struct BlobSpec {
    int num_classes = 2;
    int blobs_per_class = 2;
    int dim = 2;
    int samples_per_class = 100;
    double separation = 3.0;
    double spread = 1.0;

    bool operator==(const BlobSpec&) const = default;
};

/// Gaussian blobs: each class owns `blobs_per_class` centers drawn at distance
/// `separation` from the origin along random directions; samples are
/// center + N(0, spread^2 I). Rows are ordered by class.
Dataset make_blobs(const BlobSpec& spec, Rng& rng);

/// CSV: one row per sample, features first, integer label in the last column.
/// The number of classes is max label + 1.
Dataset read_csv_dataset(const std::string& path, bool has_header);

}  // namespace vasso

#endif  // VASSO_DATASET_HPP
