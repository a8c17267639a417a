#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "srmnet/classifier.hpp"
#include "srmnet/config.hpp"
#include "srmnet/image.hpp"
#include "srmnet/manipulations.hpp"
#include "srmnet/train_net.hpp"

namespace srmnet {

struct DatasetRecord {
    int group = 0;
    int image = 0;
    PatchOrigin origin;
    int label = 0;  // 0 pristine, 1 manipulated; multi-class tasks use class ids
    StoredPatch patch;
};

/// Patch dataset with a source-disjoint train/test split: whole groups
/// (corpus subdirectories, standing in for capture devices) are assigned to
/// one side, and every manipulated patch keeps its pristine twin at the same
/// origin in the same split.
struct Dataset {
    std::vector<DatasetRecord> records;
    std::vector<std::string> group_names;
    std::vector<int> train_groups;
    std::vector<int> test_groups;
    ManipulationSpec manip;
    int patch_size = kPatchSize;

    bool in_train(int group) const;
    std::vector<const DatasetRecord*> split(bool train) const;
};

Dataset build_dataset(const std::string& corpus_dir, const ManipulationSpec& spec, double split_fraction,
                      std::uint64_t seed, int patch_size = kPatchSize);

/// Dataset round trip through a directory of PGM patches plus an index file.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

struct BinaryEval {
    double accuracy = 0.0;
    std::array<double, 2> recall{};  // per-class
    std::size_t count = 0;
};

/// Fraction of correct decisions of a 0/1 predictor over patch records.
BinaryEval eval_binary(const std::function<int(const Plane&)>& predict,
                       const std::vector<const DatasetRecord*>& testset);

/// Feature file helpers: one record per patch, tab-separated, one-line
/// header declaring the dimension.
void write_feature_file(const std::string& path, const std::vector<std::string>& ids,
                        const std::vector<int>& labels, const std::vector<std::vector<double>>& features);
void read_feature_file(const std::string& path, std::vector<std::string>& ids, std::vector<int>& labels,
                       std::vector<std::vector<double>>& features);

struct SuiteConfig {
    std::string corpus_dir;
    std::vector<ManipulationSpec> tasks;  // empty = full manipulation grid
    double split_fraction = 2.0 / 3.0;
    int patch_size = kPatchSize;
    std::uint64_t seed = 0;
    bool feature_normalize = true;
    double svm_lambda = 1e-4;
    int svm_epochs = 50;
    TrainConfig cnn;
    double cnn_delta = kQuantStep;
    double cnn_input_scale = 1.0 / 255.0;
    double cnn_alpha = 65536.0;

    static SuiteConfig from_config(const Config& cfg);
};

struct SuiteTaskResult {
    ManipulationSpec spec;
    BinaryEval svm;
    BinaryEval cnn;
};

/// Trains SRM+SVM and the relaxed network on each task's dataset and
/// evaluates both on the held-out groups.
std::vector<SuiteTaskResult> run_binary_suite(const SuiteConfig& cfg, std::ostream* log = nullptr);

/// Fixed-format result table (byte-stable for a given input).
std::string format_suite_table(const std::vector<SuiteTaskResult>& results);

struct TrainedDetectors {
    LinearModel svm;
    NetParams cnn;
    bool feature_normalize = true;
};

/// Trains both detectors on one dataset; the building block of the suite.
TrainedDetectors train_detectors(const Dataset& ds, const SuiteConfig& cfg, std::ostream* log = nullptr);

struct ConfusionResult {
    std::vector<std::string> class_names;
    std::vector<std::vector<double>> percent;  // row-stochastic, rows sum to 100
};

/// One-vs-rest SVM over manipulated patches of the five manipulation kinds;
/// entry (i, j) is the percentage of class-i test samples predicted as j.
ConfusionResult confusion_multiclass(const std::vector<std::vector<double>>& features,
                                     const std::vector<int>& labels, const std::vector<std::vector<double>>& test_features,
                                     const std::vector<int>& test_labels, int classes, double lambda, int epochs,
                                     std::uint64_t seed);

/// Builds the five per-kind datasets from one corpus and runs the
/// confusion experiment on their manipulated patches.
ConfusionResult run_confusion_experiment(const SuiteConfig& cfg, const std::vector<double>& parameters,
                                         std::ostream* log = nullptr);

std::string format_confusion_table(const ConfusionResult& result);

struct HeatMap {
    int cols = 0;
    int rows = 0;
    int window = kPatchSize;
    int stride = kPatchSize;
    int image_w = 0;
    int image_h = 0;
    std::vector<double> score;  // row-major, in [0, 1]

    double at(int r, int c) const { return score[static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c) { return score[static_cast<std::size_t>(r) * cols + c]; }
};

/// Slides a window over the image and records the predictor's
/// manipulated-class probability per window position.
HeatMap localize(const Plane& image, const std::function<double(const Plane&)>& window_probability, int window,
                 int stride);

/// Scores in [0,1] scaled to 0-255 and upsampled to the source image
/// dimensions by nearest neighbor, written as PGM.
void save_heatmap(const HeatMap& h, const std::string& path);

/// Window probability adapters for the two detectors. SVM margins pass
/// through a unit-slope logistic so both emit a common [0, 1] scale.
std::function<double(const Plane&)> cnn_window_probability(const NetParams& params);
std::function<double(const Plane&)> svm_window_probability(const LinearModel& model, bool feature_normalize);

struct SynthConfig {
    int groups = 6;
    int images_per_group = 32;
    int width = 512;
    int height = 512;
    std::uint64_t seed = 0;
};

/// Writes a synthetic photographic-style corpus (one subdirectory per source
/// group with group-specific texture, smoothing and grain statistics) for
/// desk-scale experiments when no camera corpus is available.
void synth_corpus(const std::string& dir, const SynthConfig& cfg);

/// Renders one synthetic image without touching the filesystem.
Plane synth_image(const SynthConfig& cfg, int group, int index);

}  // namespace srmnet
