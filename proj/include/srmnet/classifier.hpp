#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace srmnet {

/// Linear classifier with stored per-dimension standardization. Binary
/// models hold one hyperplane; multi-class models hold one per class
/// (one-vs-rest) and predict by argmax score.
struct LinearModel {
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<std::vector<double>> weights;  // one hyperplane per row
    std::vector<double> biases;
    std::vector<int> class_labels;  // binary: {negative, positive}

    std::size_t dim() const { return mean.size(); }
    bool binary() const { return weights.size() == 1; }
};

/// Hinge-loss SGD (Pegasos-style schedule, averaged weights) on standardized
/// features. Binary input labels produce a single hyperplane scoring the
/// higher label positive; three or more distinct labels produce a
/// one-vs-rest model. Deterministic for a given seed.
LinearModel svm_train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                      double lambda = 1e-4, int epochs = 50, std::uint64_t seed = 0);

/// Raw per-hyperplane scores (standardization applied).
std::vector<double> svm_scores(const LinearModel& model, const std::vector<double>& feature);

/// (label, score): binary decides by the sign of the single score (ties to
/// the negative class), multi-class by argmax with lowest-index tie-break.
std::pair<int, double> svm_predict(const LinearModel& model, const std::vector<double>& feature);

void save_model(const LinearModel& model, const std::string& path);
LinearModel load_model(const std::string& path);

}  // namespace srmnet
