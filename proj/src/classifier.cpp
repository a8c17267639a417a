#include "srmnet/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "srmnet/rng.hpp"

namespace srmnet {

namespace {

constexpr double kStdevFloor = 1e-8;

std::vector<double> standardized(const LinearModel& model, const std::vector<double>& f) {
    if (f.size() != model.dim()) throw std::invalid_argument("feature dimension mismatch");
    std::vector<double> out(f.size());
    for (std::size_t d = 0; d < f.size(); ++d) out[d] = (f[d] - model.mean[d]) / model.stdev[d];
    return out;
}

// One-vs-rest hyperplane: positive examples have target label. Pegasos
// subgradient steps (eta_t = 1 / (lambda t)) with projection onto the
// 1/sqrt(lambda) ball and suffix-averaged weights; the bias rides along as
// an augmented constant dimension.
void train_hyperplane(const std::vector<std::vector<double>>& x, const std::vector<int>& labels, int target,
                      double lambda, int epochs, Rng& rng, std::vector<double>& w_out, double& b_out) {
    const std::size_t n = x.size();
    const std::size_t dim = x[0].size();
    const std::size_t adim = dim + 1;  // trailing bias coordinate
    std::vector<double> w(adim, 0.0), w_avg(adim, 0.0);
    std::size_t avg_count = 0;
    const double radius = 1.0 / std::sqrt(lambda);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    long t = 0;
    const long warmup = static_cast<long>(n) * std::max(1, epochs / 2);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (const std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const double y = labels[i] == target ? 1.0 : -1.0;
            const auto& xi = x[i];
            double score = w[dim];
            for (std::size_t d = 0; d < dim; ++d) score += w[d] * xi[d];
            const double shrink = 1.0 - eta * lambda;
            for (double& v : w) v *= shrink;
            if (y * score < 1.0) {
                for (std::size_t d = 0; d < dim; ++d) w[d] += eta * y * xi[d];
                w[dim] += eta * y;
            }
            double norm2 = 0.0;
            for (const double v : w) norm2 += v * v;
            if (norm2 > radius * radius) {
                const double scale = radius / std::sqrt(norm2);
                for (double& v : w) v *= scale;
            }
            if (t > warmup) {
                for (std::size_t d = 0; d < adim; ++d) w_avg[d] += w[d];
                ++avg_count;
            }
        }
    }
    if (avg_count > 0) {
        for (std::size_t d = 0; d < adim; ++d) w[d] = w_avg[d] / static_cast<double>(avg_count);
    }
    b_out = w[dim];
    w.resize(dim);
    w_out = std::move(w);
}

}  // namespace

LinearModel svm_train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                      double lambda, int epochs, std::uint64_t seed) {
    if (features.empty() || features.size() != labels.size()) {
        throw std::invalid_argument("features and labels must be nonempty and aligned");
    }
    const std::size_t dim = features[0].size();
    for (const auto& f : features) {
        if (f.size() != dim) throw std::invalid_argument("feature dimension mismatch");
    }
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw std::invalid_argument("training set must contain at least two classes");
    if (!(lambda > 0.0) || epochs < 1) throw std::invalid_argument("invalid SVM hyperparameters");

    LinearModel model;
    model.class_labels.assign(distinct.begin(), distinct.end());
    model.mean.assign(dim, 0.0);
    model.stdev.assign(dim, 0.0);
    for (const auto& f : features) {
        for (std::size_t d = 0; d < dim; ++d) model.mean[d] += f[d];
    }
    for (double& m : model.mean) m /= static_cast<double>(features.size());
    for (const auto& f : features) {
        for (std::size_t d = 0; d < dim; ++d) {
            const double c = f[d] - model.mean[d];
            model.stdev[d] += c * c;
        }
    }
    for (double& s : model.stdev) {
        s = std::max(std::sqrt(s / static_cast<double>(features.size())), kStdevFloor);
    }

    std::vector<std::vector<double>> x(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) x[i] = standardized(model, features[i]);

    const bool binary = distinct.size() == 2;
    const std::size_t planes = binary ? 1 : distinct.size();
    model.weights.resize(planes);
    model.biases.resize(planes);
    for (std::size_t c = 0; c < planes; ++c) {
        // the binary hyperplane scores the higher label positive
        const int target = binary ? model.class_labels[1] : model.class_labels[c];
        Rng rng(derive_seed(seed, 0x53564du + c));
        train_hyperplane(x, labels, target, lambda, epochs, rng, model.weights[c], model.biases[c]);
    }
    return model;
}

std::vector<double> svm_scores(const LinearModel& model, const std::vector<double>& feature) {
    const std::vector<double> x = standardized(model, feature);
    std::vector<double> scores(model.weights.size());
    for (std::size_t c = 0; c < model.weights.size(); ++c) {
        double s = model.biases[c];
        for (std::size_t d = 0; d < x.size(); ++d) s += model.weights[c][d] * x[d];
        scores[c] = s;
    }
    return scores;
}

std::pair<int, double> svm_predict(const LinearModel& model, const std::vector<double>& feature) {
    const std::vector<double> scores = svm_scores(model, feature);
    if (model.binary()) {
        return {scores[0] > 0.0 ? model.class_labels[1] : model.class_labels[0], scores[0]};
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c) {
        if (scores[c] > scores[best]) best = c;
    }
    return {model.class_labels[best], scores[best]};
}

void save_model(const LinearModel& model, const std::string& path) {
    nlohmann::json j{
        {"magic", "srmnet-svm"},  {"version", 1},          {"mean", model.mean},
        {"stdev", model.stdev},   {"weights", model.weights}, {"biases", model.biases},
        {"class_labels", model.class_labels},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << j.dump(2) << "\n";
}

LinearModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("magic", "") != std::string("srmnet-svm")) throw std::runtime_error("not an SVM model file: " + path);
    LinearModel model;
    model.mean = j.at("mean").get<std::vector<double>>();
    model.stdev = j.at("stdev").get<std::vector<double>>();
    model.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    model.biases = j.at("biases").get<std::vector<double>>();
    model.class_labels = j.at("class_labels").get<std::vector<int>>();
    return model;
}

}  // namespace srmnet
