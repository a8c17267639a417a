#include "srmnet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "srmnet/descriptor.hpp"
#include "srmnet/parallel.hpp"
#include "srmnet/rng.hpp"

namespace fs = std::filesystem;

namespace srmnet {

namespace {

// Sub-seed tags used throughout the experiment pipeline.
constexpr std::uint64_t kTagSplit = 0x10;
constexpr std::uint64_t kTagNoise = 0x20;
constexpr std::uint64_t kTagNetInit = 0x30;
constexpr std::uint64_t kTagNetTrain = 0x40;
constexpr std::uint64_t kTagSvm = 0x50;
constexpr std::uint64_t kTagGroup = 0x100;
constexpr std::uint64_t kTagImage = 0x10000;

bool is_image_file(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".pgm" || ext == ".ppm" || ext == ".png";
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

bool Dataset::in_train(int group) const {
    return std::find(train_groups.begin(), train_groups.end(), group) != train_groups.end();
}

std::vector<const DatasetRecord*> Dataset::split(bool train) const {
    std::vector<const DatasetRecord*> out;
    for (const auto& r : records) {
        if (in_train(r.group) == train) out.push_back(&r);
    }
    return out;
}

Dataset build_dataset(const std::string& corpus_dir, const ManipulationSpec& spec, double split_fraction,
                      std::uint64_t seed, int patch_size) {
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw std::invalid_argument("split fraction must lie in (0, 1)");
    }
    std::vector<std::string> groups;
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
        if (entry.is_directory()) groups.push_back(entry.path().filename().string());
    }
    std::sort(groups.begin(), groups.end());
    if (groups.empty()) throw std::invalid_argument("empty corpus: " + corpus_dir);
    if (groups.size() < 2) throw std::invalid_argument("corpus needs at least two source groups");

    Dataset ds;
    ds.group_names = groups;
    ds.manip = spec;
    ds.patch_size = patch_size;

    // Whole groups go to one side, drawn by seed.
    std::vector<int> order(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) order[g] = static_cast<int>(g);
    Rng split_rng(derive_seed(seed, kTagSplit));
    split_rng.shuffle(order);
    const int train_count = std::clamp(static_cast<int>(std::lround(split_fraction * static_cast<double>(groups.size()))),
                                       1, static_cast<int>(groups.size()) - 1);
    ds.train_groups.assign(order.begin(), order.begin() + train_count);
    ds.test_groups.assign(order.begin() + train_count, order.end());
    std::sort(ds.train_groups.begin(), ds.train_groups.end());
    std::sort(ds.test_groups.begin(), ds.test_groups.end());

    struct ImageJob {
        int group;
        int image;
        std::string path;
    };
    std::vector<ImageJob> jobs;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(corpus_dir) / groups[g])) {
            if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
        for (std::size_t i = 0; i < files.size(); ++i) {
            jobs.push_back({static_cast<int>(g), static_cast<int>(i), files[i]});
        }
    }
    if (jobs.empty()) throw std::invalid_argument("corpus has no images: " + corpus_dir);

    std::vector<std::vector<DatasetRecord>> per_image(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t j) {
        const ImageJob& job = jobs[j];
        const Plane pristine = load_image(job.path);
        ManipulationSpec local = spec;
        local.seed = derive_seed(seed, kTagNoise + kTagGroup * static_cast<std::uint64_t>(job.group) +
                                           kTagImage * static_cast<std::uint64_t>(job.image));
        // The whole plane is manipulated first, then re-quantized to 8 bits
        // as a saved image would be; patches of both versions share origins.
        const Plane manipulated = quantize_to_8bit(apply_manipulation(pristine, local));
        auto& out = per_image[j];
        for (const auto& [patch, origin] : extract_patches(pristine, patch_size, patch_size)) {
            if (origin.x + patch_size > manipulated.width || origin.y + patch_size > manipulated.height) continue;
            DatasetRecord pr;
            pr.group = job.group;
            pr.image = job.image;
            pr.origin = origin;
            pr.label = 0;
            pr.patch = StoredPatch::from_plane(patch);
            out.push_back(std::move(pr));
            DatasetRecord mr;
            mr.group = job.group;
            mr.image = job.image;
            mr.origin = origin;
            mr.label = 1;
            Plane mpatch(patch_size, patch_size);
            for (int y = 0; y < patch_size; ++y) {
                for (int x = 0; x < patch_size; ++x) mpatch.at(y, x) = manipulated.at(origin.y + y, origin.x + x);
            }
            mr.patch = StoredPatch::from_plane(mpatch);
            out.push_back(std::move(mr));
        }
    });
    for (auto& chunk : per_image) {
        for (auto& r : chunk) ds.records.push_back(std::move(r));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "patches");
    std::ofstream index(fs::path(dir) / "index.tsv");
    if (!index) throw std::runtime_error("cannot write dataset index in " + dir);
    index << "# manipulation=" << ds.manip.label() << " patch_size=" << ds.patch_size << "\n";
    index << "file\tgroup\timage\tox\toy\tlabel\tsplit\n";
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        char name[32];
        std::snprintf(name, sizeof(name), "p%06zu.pgm", i);
        save_pgm(r.patch.to_plane(), (fs::path(dir) / "patches" / name).string());
        index << "patches/" << name << "\t" << ds.group_names[static_cast<std::size_t>(r.group)] << "\t" << r.image
              << "\t" << r.origin.x << "\t" << r.origin.y << "\t" << r.label << "\t"
              << (ds.in_train(r.group) ? "train" : "test") << "\n";
    }
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream index(fs::path(dir) / "index.tsv");
    if (!index) throw std::runtime_error("cannot open dataset index in " + dir);
    Dataset ds;
    std::string line;
    std::getline(index, line);  // manipulation comment
    std::getline(index, line);  // column header
    std::set<std::string> train_names, test_names;
    while (std::getline(index, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string file, group, split;
        DatasetRecord r;
        row >> file >> group >> r.image >> r.origin.x >> r.origin.y >> r.label >> split;
        auto it = std::find(ds.group_names.begin(), ds.group_names.end(), group);
        if (it == ds.group_names.end()) {
            ds.group_names.push_back(group);
            it = ds.group_names.end() - 1;
        }
        r.group = static_cast<int>(it - ds.group_names.begin());
        (split == "train" ? train_names : test_names).insert(group);
        r.patch = StoredPatch::from_plane(load_image((fs::path(dir) / file).string()));
        ds.patch_size = r.patch.side;
        ds.records.push_back(std::move(r));
    }
    for (std::size_t g = 0; g < ds.group_names.size(); ++g) {
        if (train_names.count(ds.group_names[g])) ds.train_groups.push_back(static_cast<int>(g));
        if (test_names.count(ds.group_names[g])) ds.test_groups.push_back(static_cast<int>(g));
    }
    return ds;
}

BinaryEval eval_binary(const std::function<int(const Plane&)>& predict,
                       const std::vector<const DatasetRecord*>& testset) {
    if (testset.empty()) throw std::invalid_argument("empty evaluation set");
    std::vector<int> decisions(testset.size());
    parallel_for(testset.size(), [&](std::size_t i) { decisions[i] = predict(testset[i]->patch.to_plane()); });
    BinaryEval ev;
    ev.count = testset.size();
    std::array<std::size_t, 2> total{}, correct{};
    for (std::size_t i = 0; i < testset.size(); ++i) {
        const int truth = testset[i]->label;
        if (truth != 0 && truth != 1) throw std::invalid_argument("eval_binary expects 0/1 labels");
        total[static_cast<std::size_t>(truth)]++;
        if (decisions[i] == truth) correct[static_cast<std::size_t>(truth)]++;
    }
    ev.accuracy = static_cast<double>(correct[0] + correct[1]) / static_cast<double>(testset.size());
    for (int c = 0; c < 2; ++c) {
        ev.recall[static_cast<std::size_t>(c)] =
            total[static_cast<std::size_t>(c)] == 0
                ? 0.0
                : static_cast<double>(correct[static_cast<std::size_t>(c)]) / static_cast<double>(total[static_cast<std::size_t>(c)]);
    }
    return ev;
}

void write_feature_file(const std::string& path, const std::vector<std::string>& ids,
                        const std::vector<int>& labels, const std::vector<std::vector<double>>& features) {
    if (ids.size() != labels.size() || ids.size() != features.size()) {
        throw std::invalid_argument("feature file fields must be aligned");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write feature file: " + path);
    const std::size_t dim = features.empty() ? kFeatureDim : features[0].size();
    out << "dim\t" << dim << "\n";
    char buf[32];
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (features[i].size() != dim) throw std::invalid_argument("inconsistent feature dimension");
        out << ids[i] << "\t" << labels[i];
        for (const double v : features[i]) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << "\t" << buf;
        }
        out << "\n";
    }
}

void read_feature_file(const std::string& path, std::vector<std::string>& ids, std::vector<int>& labels,
                       std::vector<std::vector<double>>& features) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty feature file: " + path);
    std::istringstream header(line);
    std::string tag;
    std::size_t dim = 0;
    header >> tag >> dim;
    if (tag != "dim" || dim == 0) throw std::runtime_error("malformed feature file header: " + path);
    ids.clear();
    labels.clear();
    features.clear();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id;
        int label;
        row >> id >> label;
        std::vector<double> f(dim);
        for (std::size_t d = 0; d < dim; ++d) row >> f[d];
        if (!row) throw std::runtime_error("malformed feature row in " + path);
        ids.push_back(std::move(id));
        labels.push_back(label);
        features.push_back(std::move(f));
    }
}

SuiteConfig SuiteConfig::from_config(const Config& cfg) {
    SuiteConfig sc;
    sc.corpus_dir = cfg.require_str("corpus_dir");
    sc.split_fraction = cfg.get_double("split_fraction", sc.split_fraction);
    sc.patch_size = cfg.get_int("patch_size", sc.patch_size);
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    sc.feature_normalize = cfg.get_bool("feature_normalize", sc.feature_normalize);
    sc.svm_lambda = cfg.get_double("svm_lambda", sc.svm_lambda);
    sc.svm_epochs = cfg.get_int("svm_epochs", sc.svm_epochs);
    sc.cnn.learning_rate = cfg.get_double("learning_rate", sc.cnn.learning_rate);
    sc.cnn.weight_decay = cfg.get_double("weight_decay", sc.cnn.weight_decay);
    sc.cnn.batch_size = cfg.get_int("batch_size", sc.cnn.batch_size);
    sc.cnn.epochs = cfg.get_int("epochs", sc.cnn.epochs);
    sc.cnn_delta = cfg.get_double("delta", sc.cnn_delta);
    sc.cnn_input_scale = cfg.get_double("input_scale", sc.cnn_input_scale);
    sc.cnn_alpha = cfg.get_double("alpha", sc.cnn_alpha);
    if (cfg.has("tasks")) {
        // comma-separated kind:parameter pairs, e.g. "blur:0.5,median:5"
        std::istringstream list(cfg.get_str("tasks", ""));
        std::string item;
        while (std::getline(list, item, ',')) {
            const auto begin = item.find_first_not_of(" \t");
            const auto end = item.find_last_not_of(" \t");
            if (begin == std::string::npos) continue;
            item = item.substr(begin, end - begin + 1);
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw std::runtime_error("malformed task: " + item);
            ManipulationSpec spec;
            spec.kind = manipulation_kind_from_string(item.substr(0, colon));
            spec.parameter = std::stod(item.substr(colon + 1));
            sc.tasks.push_back(spec);
        }
    }
    return sc;
}

namespace {

class RecordPatchSource : public PatchSource {
public:
    explicit RecordPatchSource(std::vector<const DatasetRecord*> records) : records_(std::move(records)) {}
    std::size_t size() const override { return records_.size(); }
    Plane patch(std::size_t i) const override { return records_[i]->patch.to_plane(); }
    int label(std::size_t i) const override { return records_[i]->label; }

private:
    std::vector<const DatasetRecord*> records_;
};

std::vector<std::vector<double>> extract_features(const std::vector<const DatasetRecord*>& records, bool normalize) {
    std::vector<std::vector<double>> features(records.size());
    parallel_for(records.size(), [&](std::size_t i) {
        features[i] = extract_feature(records[i]->patch.to_plane(), normalize);
    });
    return features;
}

}  // namespace

TrainedDetectors train_detectors(const Dataset& ds, const SuiteConfig& cfg, std::ostream* log) {
    const auto train_records = ds.split(true);
    if (train_records.empty()) throw std::invalid_argument("dataset has no training records");

    TrainedDetectors out;
    out.feature_normalize = cfg.feature_normalize;

    const auto features = extract_features(train_records, cfg.feature_normalize);
    std::vector<int> labels(train_records.size());
    for (std::size_t i = 0; i < train_records.size(); ++i) labels[i] = train_records[i]->label;
    out.svm = svm_train(features, labels, cfg.svm_lambda, cfg.svm_epochs, derive_seed(cfg.seed, kTagSvm));
    if (log) *log << "  svm trained on " << train_records.size() << " patches\n";

    NetParams init = init_net_params(cfg.cnn_delta, cfg.cnn_input_scale, cfg.cnn_alpha, derive_seed(cfg.seed, kTagNetInit));
    TrainConfig tc = cfg.cnn;
    tc.seed = derive_seed(cfg.seed, kTagNetTrain);
    RecordPatchSource source(train_records);
    TrainResult tr = train(source, tc, init);
    out.cnn = std::move(tr.params);
    if (log) {
        *log << "  cnn trained " << tc.epochs << " epochs, final loss " << tr.loss_history.back() << "\n";
    }
    return out;
}

std::vector<SuiteTaskResult> run_binary_suite(const SuiteConfig& cfg, std::ostream* log) {
    std::vector<ManipulationSpec> tasks = cfg.tasks.empty() ? manipulation_grid() : cfg.tasks;
    std::vector<SuiteTaskResult> results;
    for (const auto& task : tasks) {
        if (log) *log << "task " << task.label() << "\n";
        const Dataset ds = build_dataset(cfg.corpus_dir, task, cfg.split_fraction, cfg.seed, cfg.patch_size);
        const TrainedDetectors det = train_detectors(ds, cfg, log);
        const auto test_records = ds.split(false);

        SuiteTaskResult res;
        res.spec = task;
        res.svm = eval_binary(
            [&](const Plane& p) {
                return svm_predict(det.svm, extract_feature(p, cfg.feature_normalize)).first;
            },
            test_records);
        res.cnn = eval_binary(
            [&](const Plane& p) {
                const auto logits = predict_logits(p, det.cnn);
                return logits[1] > logits[0] ? 1 : 0;
            },
            test_records);
        if (log) {
            *log << "  accuracy svm " << res.svm.accuracy << " cnn " << res.cnn.accuracy << "\n";
        }
        results.push_back(res);
    }
    return results;
}

std::string format_suite_table(const std::vector<SuiteTaskResult>& results) {
    std::ostringstream out;
    out << "manipulation\tparameter\tmethod\taccuracy\trecall_pristine\trecall_manipulated\n";
    char buf[64];
    for (const auto& r : results) {
        for (int m = 0; m < 2; ++m) {
            const BinaryEval& ev = m == 0 ? r.svm : r.cnn;
            std::snprintf(buf, sizeof(buf), "%.4f\t%.4f\t%.4f", ev.accuracy, ev.recall[0], ev.recall[1]);
            out << to_string(r.spec.kind) << "\t" << format_double(r.spec.parameter) << "\t"
                << (m == 0 ? "srm+svm" : "cnn") << "\t" << buf << "\n";
        }
    }
    return out.str();
}

ConfusionResult confusion_multiclass(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                                     const std::vector<std::vector<double>>& test_features,
                                     const std::vector<int>& test_labels, int classes, double lambda, int epochs,
                                     std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("confusion experiment needs at least two classes");
    for (int c = 0; c < classes; ++c) {
        if (std::find(labels.begin(), labels.end(), c) == labels.end() ||
            std::find(test_labels.begin(), test_labels.end(), c) == test_labels.end()) {
            throw std::invalid_argument("class " + std::to_string(c) + " missing from the confusion experiment");
        }
    }
    const LinearModel model = svm_train(features, labels, lambda, epochs, seed);
    std::vector<std::vector<double>> counts(static_cast<std::size_t>(classes),
                                            std::vector<double>(static_cast<std::size_t>(classes), 0.0));
    std::vector<int> predictions(test_features.size());
    parallel_for(test_features.size(), [&](std::size_t i) { predictions[i] = svm_predict(model, test_features[i]).first; });
    for (std::size_t i = 0; i < test_features.size(); ++i) {
        counts[static_cast<std::size_t>(test_labels[i])][static_cast<std::size_t>(predictions[i])] += 1.0;
    }
    ConfusionResult result;
    result.percent = std::move(counts);
    for (auto& row : result.percent) {
        double total = 0.0;
        for (const double v : row) total += v;
        if (total > 0.0) {
            for (double& v : row) v = 100.0 * v / total;
        }
    }
    return result;
}

ConfusionResult run_confusion_experiment(const SuiteConfig& cfg, const std::vector<double>& parameters,
                                         std::ostream* log) {
    const std::vector<ManipulationKind> kinds = {ManipulationKind::Median, ManipulationKind::Blur,
                                                 ManipulationKind::Noise, ManipulationKind::Resize,
                                                 ManipulationKind::Jpeg};
    if (parameters.size() != kinds.size()) throw std::invalid_argument("confusion experiment expects 5 parameters");
    std::vector<std::vector<double>> train_features, test_features;
    std::vector<int> train_labels, test_labels;
    for (std::size_t c = 0; c < kinds.size(); ++c) {
        ManipulationSpec spec{kinds[c], parameters[c], 0};
        if (log) *log << "confusion class " << spec.label() << "\n";
        const Dataset ds = build_dataset(cfg.corpus_dir, spec, cfg.split_fraction, cfg.seed, cfg.patch_size);
        for (const bool train : {true, false}) {
            for (const DatasetRecord* r : ds.split(train)) {
                if (r->label != 1) continue;  // manipulated patches only
                auto f = extract_feature(r->patch.to_plane(), cfg.feature_normalize);
                if (train) {
                    train_features.push_back(std::move(f));
                    train_labels.push_back(static_cast<int>(c));
                } else {
                    test_features.push_back(std::move(f));
                    test_labels.push_back(static_cast<int>(c));
                }
            }
        }
    }
    ConfusionResult result = confusion_multiclass(train_features, train_labels, test_features, test_labels,
                                                  static_cast<int>(kinds.size()), cfg.svm_lambda, cfg.svm_epochs,
                                                  derive_seed(cfg.seed, kTagSvm + 1));
    for (const auto kind : kinds) result.class_names.push_back(to_string(kind));
    return result;
}

std::string format_confusion_table(const ConfusionResult& result) {
    std::ostringstream out;
    out << "class";
    for (const auto& name : result.class_names) out << "\t" << name;
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < result.percent.size(); ++i) {
        out << result.class_names[i];
        for (const double v : result.percent[i]) {
            std::snprintf(buf, sizeof(buf), "%.2f", v);
            out << "\t" << buf;
        }
        out << "\n";
    }
    return out.str();
}

HeatMap localize(const Plane& image, const std::function<double(const Plane&)>& window_probability, int window,
                 int stride) {
    if (image.width < window || image.height < window) {
        throw std::invalid_argument("image smaller than the sliding window");
    }
    if (stride < 1) throw std::invalid_argument("stride must be positive");
    HeatMap h;
    h.window = window;
    h.stride = stride;
    h.image_w = image.width;
    h.image_h = image.height;
    h.cols = (image.width - window) / stride + 1;
    h.rows = (image.height - window) / stride + 1;
    h.score.resize(static_cast<std::size_t>(h.cols) * h.rows);
    parallel_for(h.score.size(), [&](std::size_t i) {
        const int r = static_cast<int>(i) / h.cols;
        const int c = static_cast<int>(i) % h.cols;
        Plane win(window, window);
        for (int y = 0; y < window; ++y) {
            for (int x = 0; x < window; ++x) win.at(y, x) = image.at(r * stride + y, c * stride + x);
        }
        h.score[i] = window_probability(win);
    });
    return h;
}

void save_heatmap(const HeatMap& h, const std::string& path) {
    Plane img(h.image_w, h.image_h);
    for (int y = 0; y < h.image_h; ++y) {
        const int r = std::min(h.rows - 1, y * h.rows / h.image_h);
        for (int x = 0; x < h.image_w; ++x) {
            const int c = std::min(h.cols - 1, x * h.cols / h.image_w);
            img.at(y, x) = 255.0 * h.at(r, c);
        }
    }
    save_pgm(img, path);
}

std::function<double(const Plane&)> cnn_window_probability(const NetParams& params) {
    return [params](const Plane& window) {
        const auto logits = predict_logits(window, params);
        return 1.0 / (1.0 + std::exp(logits[0] - logits[1]));
    };
}

std::function<double(const Plane&)> svm_window_probability(const LinearModel& model, bool feature_normalize) {
    return [model, feature_normalize](const Plane& window) {
        const double margin = svm_predict(model, extract_feature(window, feature_normalize)).second;
        return 1.0 / (1.0 + std::exp(-margin));
    };
}

namespace {

struct GroupStyle {
    double grain_sigma;
    double smooth_sigma;
    double roughness;
    double brightness;
    double contrast;
    int camera_quality;
};

// Group styles differ enough to make the split a real generalization test
// but stay within one "camera family": residual statistics must remain
// comparable across groups or no detector transfers.
GroupStyle group_style(const SynthConfig& cfg, int group) {
    Rng rng(derive_seed(cfg.seed, kTagGroup + static_cast<std::uint64_t>(group)));
    GroupStyle s;
    s.grain_sigma = rng.uniform(1.05, 1.45);
    s.smooth_sigma = rng.uniform(0.55, 0.75);
    s.roughness = rng.uniform(0.53, 0.62);
    s.camera_quality = rng.uniform_int(92, 96);
    s.brightness = rng.uniform(100.0, 156.0);
    s.contrast = rng.uniform(0.85, 1.2);
    return s;
}

// Bilinearly interpolated lattice noise, one octave.
void add_value_noise(Plane& img, Rng& rng, int cells, double amplitude) {
    const int n = cells + 1;
    std::vector<double> lattice(static_cast<std::size_t>(n) * n);
    for (double& v : lattice) v = rng.gaussian();
    for (int y = 0; y < img.height; ++y) {
        const double gy = static_cast<double>(y) * cells / img.height;
        const int iy = std::min(static_cast<int>(gy), cells - 1);
        const double fy = gy - iy;
        for (int x = 0; x < img.width; ++x) {
            const double gx = static_cast<double>(x) * cells / img.width;
            const int ix = std::min(static_cast<int>(gx), cells - 1);
            const double fx = gx - ix;
            const double v00 = lattice[static_cast<std::size_t>(iy) * n + ix];
            const double v01 = lattice[static_cast<std::size_t>(iy) * n + ix + 1];
            const double v10 = lattice[static_cast<std::size_t>(iy + 1) * n + ix];
            const double v11 = lattice[static_cast<std::size_t>(iy + 1) * n + ix + 1];
            const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
            img.at(y, x) += amplitude * v;
        }
    }
}

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Plane synth_image(const SynthConfig& cfg, int group, int index) {
    const GroupStyle style = group_style(cfg, group);
    Rng rng(derive_seed(cfg.seed, kTagImage * static_cast<std::uint64_t>(group + 1) + static_cast<std::uint64_t>(index)));
    Plane img(cfg.width, cfg.height, 0.0);

    // Smooth illumination: a few low-frequency cosine waves.
    for (int wave = 0; wave < 5; ++wave) {
        const double fx = rng.uniform(0.3, 2.5) / cfg.width;
        const double fy = rng.uniform(0.3, 2.5) / cfg.height;
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double amp = rng.uniform(6.0, 18.0);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                img.at(y, x) += amp * std::cos(2.0 * M_PI * (fx * x + fy * y) + phase);
            }
        }
    }

    // Multi-scale texture.
    double amp = 22.0;
    for (const int cells : {6, 12, 24, 48, 96}) {
        add_value_noise(img, rng, cells, amp);
        amp *= style.roughness;
    }

    // Soft-edged objects: rectangles and ellipses of random intensity.
    const int objects = rng.uniform_int(6, 12);
    for (int o = 0; o < objects; ++o) {
        const bool ellipse = rng.next_double() < 0.5;
        const double cx = rng.uniform(0.0, cfg.width);
        const double cy = rng.uniform(0.0, cfg.height);
        const double rx = rng.uniform(12.0, cfg.width * 0.2);
        const double ry = rng.uniform(12.0, cfg.height * 0.2);
        const double level = rng.uniform(-55.0, 55.0);
        const double edge = rng.uniform(1.0, 4.0);
        const int x0 = std::max(0, static_cast<int>(cx - rx - edge));
        const int x1 = std::min(cfg.width - 1, static_cast<int>(cx + rx + edge));
        const int y0 = std::max(0, static_cast<int>(cy - ry - edge));
        const int y1 = std::min(cfg.height - 1, static_cast<int>(cy + ry + edge));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double inside;
                if (ellipse) {
                    const double d = std::sqrt(((x - cx) / rx) * ((x - cx) / rx) + ((y - cy) / ry) * ((y - cy) / ry));
                    inside = smoothstep((1.0 - d) * rx / edge + 0.5);
                } else {
                    const double dx = rx - std::fabs(x - cx);
                    const double dy = ry - std::fabs(y - cy);
                    inside = smoothstep(dx / edge + 0.5) * smoothstep(dy / edge + 0.5);
                }
                img.at(y, x) += level * inside;
            }
        }
    }

    for (auto& v : img.data) v = style.brightness + style.contrast * v;

    // Sensor grain, then the in-camera smoothing profile of the group.
    // Per-image exposure jitter makes the group grain distributions overlap.
    const double grain = style.grain_sigma * rng.uniform(0.8, 1.25);
    for (auto& v : img.data) v += grain * rng.gaussian();
    img = gaussian_blur(img, style.smooth_sigma);
    // Cameras save JPEG: the pristine corpus carries mild compression
    // traces of its own, like any real photo collection.
    img = jpeg_compress(quantize_to_8bit(img), style.camera_quality);
    return quantize_to_8bit(img);
}

void synth_corpus(const std::string& dir, const SynthConfig& cfg) {
    if (cfg.groups < 2 || cfg.images_per_group < 1) throw std::invalid_argument("corpus needs >= 2 groups");
    std::vector<std::pair<int, int>> jobs;
    for (int g = 0; g < cfg.groups; ++g) {
        char name[16];
        std::snprintf(name, sizeof(name), "g%02d", g);
        fs::create_directories(fs::path(dir) / name);
        for (int i = 0; i < cfg.images_per_group; ++i) jobs.emplace_back(g, i);
    }
    parallel_for(jobs.size(), [&](std::size_t j) {
        const auto [g, i] = jobs[j];
        char gname[16], iname[24];
        std::snprintf(gname, sizeof(gname), "g%02d", g);
        std::snprintf(iname, sizeof(iname), "img%04d.pgm", i);
        save_pgm(synth_image(cfg, g, i), (fs::path(dir) / gname / iname).string());
    });
}

}  // namespace srmnet
