// Command-line front end: dataset construction, feature extraction, both
// detectors, the binary suite, the confusion experiment and sliding-window
// localization. Every subcommand reads a line-oriented key=value config and
// derives all randomness from one master seed.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "srmnet/classifier.hpp"
#include "srmnet/config.hpp"
#include "srmnet/descriptor.hpp"
#include "srmnet/experiments.hpp"
#include "srmnet/rng.hpp"
#include "srmnet/train_net.hpp"

namespace fs = std::filesystem;
using namespace srmnet;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out;
    long long seed = -1;  // <0: take the config value
};

Config load_config(const CommonArgs& args) {
    Config cfg = args.config_path.empty() ? Config{} : Config::from_file(args.config_path);
    if (args.seed >= 0) cfg.set("seed", std::to_string(args.seed));
    return cfg;
}

ManipulationSpec manipulation_from_config(const Config& cfg) {
    ManipulationSpec spec;
    spec.kind = manipulation_kind_from_string(cfg.require_str("manipulation"));
    spec.parameter = cfg.get_double("parameter", spec.parameter);
    return spec;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

int cmd_corpus_synth(const CommonArgs& args) {
    const Config cfg = load_config(args);
    SynthConfig sc;
    sc.groups = cfg.get_int("groups", sc.groups);
    sc.images_per_group = cfg.get_int("images_per_group", sc.images_per_group);
    sc.width = cfg.get_int("image_width", sc.width);
    sc.height = cfg.get_int("image_height", sc.height);
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    synth_corpus(args.out, sc);
    std::cout << "wrote " << sc.groups << " groups x " << sc.images_per_group << " images to " << args.out << "\n";
    return 0;
}

int cmd_dataset_build(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const Dataset ds = build_dataset(cfg.require_str("corpus_dir"), manipulation_from_config(cfg),
                                     cfg.get_double("split_fraction", 2.0 / 3.0),
                                     static_cast<std::uint64_t>(cfg.get_int("seed", 0)),
                                     cfg.get_int("patch_size", kPatchSize));
    save_dataset(ds, args.out);
    std::cout << "dataset: " << ds.records.size() << " patches (" << ds.split(true).size() << " train, "
              << ds.split(false).size() << " test) in " << args.out << "\n";
    return 0;
}

int cmd_feature_extract(const CommonArgs& args, const std::string& dataset_dir, const std::string& split) {
    const Config cfg = load_config(args);
    const bool normalize = cfg.get_bool("feature_normalize", true);
    const Dataset ds = load_dataset(dataset_dir);
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<std::vector<double>> features;
    for (const auto& r : ds.records) {
        const bool train = ds.in_train(r.group);
        if (split == "train" && !train) continue;
        if (split == "test" && train) continue;
        ids.push_back("g" + std::to_string(r.group) + "_i" + std::to_string(r.image) + "_x" +
                      std::to_string(r.origin.x) + "_y" + std::to_string(r.origin.y) + (r.label ? "_m" : "_p"));
        labels.push_back(r.label);
        features.push_back(extract_feature(r.patch.to_plane(), normalize));
    }
    write_feature_file(args.out, ids, labels, features);
    std::cout << "wrote " << ids.size() << " features to " << args.out << "\n";
    return 0;
}

int cmd_svm_train(const CommonArgs& args, const std::string& features_path) {
    const Config cfg = load_config(args);
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<std::vector<double>> features;
    read_feature_file(features_path, ids, labels, features);
    const LinearModel model =
        svm_train(features, labels, cfg.get_double("svm_lambda", 1e-4), cfg.get_int("svm_epochs", 50),
                  static_cast<std::uint64_t>(cfg.get_int("seed", 0)));
    save_model(model, args.out);
    std::cout << "trained on " << features.size() << " features -> " << args.out << "\n";
    return 0;
}

int cmd_svm_eval(const CommonArgs& args, const std::string& features_path, const std::string& model_path) {
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<std::vector<double>> features;
    read_feature_file(features_path, ids, labels, features);
    const LinearModel model = load_model(model_path);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (svm_predict(model, features[i]).first == labels[i]) ++correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(features.size());
    char line[64];
    std::snprintf(line, sizeof(line), "accuracy\t%.4f\tcount\t%zu\n", acc, features.size());
    std::cout << line;
    if (!args.out.empty()) write_text(args.out, line);
    return 0;
}

NetParams cnn_init_from_config(const Config& cfg) {
    return init_net_params(cfg.get_double("delta", kQuantStep), cfg.get_double("input_scale", 1.0 / 255.0),
                           cfg.get_double("alpha", 65536.0),
                           derive_seed(static_cast<std::uint64_t>(cfg.get_int("seed", 0)), 0x30));
}

int cmd_cnn_train(const CommonArgs& args, const std::string& dataset_dir, const std::string& history_path) {
    const Config cfg = load_config(args);
    const Dataset ds = load_dataset(dataset_dir);
    const auto records = ds.split(true);
    VectorPatchSource source;
    for (const auto* r : records) source.add(r->patch.to_plane(), r->label);

    TrainConfig tc;
    tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
    tc.weight_decay = cfg.get_double("weight_decay", tc.weight_decay);
    tc.batch_size = cfg.get_int("batch_size", tc.batch_size);
    tc.epochs = cfg.get_int("epochs", tc.epochs);
    tc.seed = derive_seed(static_cast<std::uint64_t>(cfg.get_int("seed", 0)), 0x40);

    const NetParams init = cnn_init_from_config(cfg);
    const TrainResult res = train(source, tc, init);

    TrainMeta meta;
    meta.cfg = tc;
    meta.epochs_run = tc.epochs;
    meta.final_loss = res.loss_history.back();
    meta.init_delta = cfg.get_double("delta", kQuantStep);
    save_net(res.params, meta, args.out);
    if (!history_path.empty()) {
        std::ostringstream hist;
        hist << "epoch\tmean_loss\n";
        for (std::size_t e = 0; e < res.loss_history.size(); ++e) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%zu\t%.6f\n", e + 1, res.loss_history[e]);
            hist << buf;
        }
        write_text(history_path, hist.str());
    }
    std::cout << "trained " << tc.epochs << " epochs on " << source.size() << " patches, final loss "
              << res.loss_history.back() << " -> " << args.out << "\n";
    return 0;
}

int cmd_cnn_eval(const CommonArgs& args, const std::string& dataset_dir, const std::string& model_path) {
    const Dataset ds = load_dataset(dataset_dir);
    const NetParams params = load_net(model_path);
    const BinaryEval ev = eval_binary(
        [&](const Plane& p) {
            const auto logits = predict_logits(p, params);
            return logits[1] > logits[0] ? 1 : 0;
        },
        ds.split(false));
    char line[96];
    std::snprintf(line, sizeof(line), "accuracy\t%.4f\trecall_pristine\t%.4f\trecall_manipulated\t%.4f\n",
                  ev.accuracy, ev.recall[0], ev.recall[1]);
    std::cout << line;
    if (!args.out.empty()) write_text(args.out, line);
    return 0;
}

int cmd_suite_run(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const SuiteConfig sc = SuiteConfig::from_config(cfg);
    fs::create_directories(args.out);
    const auto results = run_binary_suite(sc, &std::cout);
    write_text((fs::path(args.out) / "results.tsv").string(), format_suite_table(results));
    std::cout << "wrote " << (fs::path(args.out) / "results.tsv").string() << "\n";
    return 0;
}

int cmd_confusion_run(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const SuiteConfig sc = SuiteConfig::from_config(cfg);
    std::vector<double> parameters = {5.0, 0.75, 0.5, 1.125, 80.0};  // one setting per kind
    if (cfg.has("confusion_parameters")) {
        parameters.clear();
        std::istringstream list(cfg.get_str("confusion_parameters", ""));
        std::string item;
        while (std::getline(list, item, ',')) parameters.push_back(std::stod(item));
    }
    fs::create_directories(args.out);
    const ConfusionResult result = run_confusion_experiment(sc, parameters, &std::cout);
    write_text((fs::path(args.out) / "confusion.tsv").string(), format_confusion_table(result));
    std::cout << format_confusion_table(result);
    return 0;
}

int cmd_localize(const CommonArgs& args, const std::string& image_path, const std::string& svm_path,
                 const std::string& cnn_path, int window, int stride) {
    const Plane image = load_image(image_path);
    fs::create_directories(args.out);
    if (svm_path.empty() && cnn_path.empty()) throw std::runtime_error("localize needs at least one model");
    if (!svm_path.empty()) {
        const LinearModel model = load_model(svm_path);
        const HeatMap h = localize(image, svm_window_probability(model, true), window, stride);
        save_heatmap(h, (fs::path(args.out) / "heat_svm.pgm").string());
    }
    if (!cnn_path.empty()) {
        const NetParams params = load_net(cnn_path);
        const HeatMap h = localize(image, cnn_window_probability(params), window, stride);
        save_heatmap(h, (fs::path(args.out) / "heat_cnn.pgm").string());
    }
    std::cout << "heat maps written to " << args.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"residual-descriptor manipulation detector"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string dataset_dir, features_path, model_path, image_path, history_path, split = "all";
    std::string svm_model, cnn_model;
    int window = kPatchSize, stride = 32;

    auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
        cmd->add_option("--config", args.config_path, "key = value configuration file");
        cmd->add_option("--seed", args.seed, "master seed override");
        auto* out = cmd->add_option("--out", args.out, "output path");
        if (needs_out) out->required();
    };

    auto* corpus = app.add_subcommand("corpus", "synthetic corpus tools");
    auto* corpus_synth = corpus->add_subcommand("synth", "generate a synthetic source-group corpus");
    add_common(corpus_synth);

    auto* dataset = app.add_subcommand("dataset", "dataset construction");
    auto* dataset_build = dataset->add_subcommand("build", "build an aligned pristine/manipulated patch dataset");
    add_common(dataset_build);

    auto* feature = app.add_subcommand("feature", "descriptor features");
    auto* feature_extract = feature->add_subcommand("extract", "extract 162-dim features from a dataset");
    add_common(feature_extract);
    feature_extract->add_option("--dataset", dataset_dir, "dataset directory")->required();
    feature_extract->add_option("--split", split, "train | test | all");

    auto* svm = app.add_subcommand("svm", "linear SVM baseline");
    auto* svm_tr = svm->add_subcommand("train", "train on a feature file");
    add_common(svm_tr);
    svm_tr->add_option("--features", features_path, "feature file")->required();
    auto* svm_ev = svm->add_subcommand("eval", "evaluate a model on a feature file");
    add_common(svm_ev, false);
    svm_ev->add_option("--features", features_path, "feature file")->required();
    svm_ev->add_option("--model", model_path, "model file")->required();

    auto* cnn = app.add_subcommand("cnn", "relaxed network");
    auto* cnn_tr = cnn->add_subcommand("train", "fine-tune on a dataset directory");
    add_common(cnn_tr);
    cnn_tr->add_option("--dataset", dataset_dir, "dataset directory")->required();
    cnn_tr->add_option("--loss-history", history_path, "per-epoch loss output");
    auto* cnn_ev = cnn->add_subcommand("eval", "evaluate a model on a dataset's test split");
    add_common(cnn_ev, false);
    cnn_ev->add_option("--dataset", dataset_dir, "dataset directory")->required();
    cnn_ev->add_option("--model", model_path, "model file")->required();

    auto* suite = app.add_subcommand("suite", "binary detection table");
    auto* suite_run = suite->add_subcommand("run", "train and evaluate both methods per task");
    add_common(suite_run);

    auto* confusion = app.add_subcommand("confusion", "multi-class experiment");
    auto* confusion_run = confusion->add_subcommand("run", "5-class one-vs-rest confusion matrix");
    add_common(confusion_run);

    auto* loc = app.add_subcommand("localize", "sliding-window heat maps");
    add_common(loc);
    loc->add_option("--image", image_path, "image to analyze")->required();
    loc->add_option("--svm-model", svm_model, "SVM model file");
    loc->add_option("--cnn-model", cnn_model, "network model file");
    loc->add_option("--window", window, "window side");
    loc->add_option("--stride", stride, "window stride");

    CLI11_PARSE(app, argc, argv);

    try {
        if (corpus_synth->parsed()) return cmd_corpus_synth(args);
        if (dataset_build->parsed()) return cmd_dataset_build(args);
        if (feature_extract->parsed()) return cmd_feature_extract(args, dataset_dir, split);
        if (svm_tr->parsed()) return cmd_svm_train(args, features_path);
        if (svm_ev->parsed()) return cmd_svm_eval(args, features_path, model_path);
        if (cnn_tr->parsed()) return cmd_cnn_train(args, dataset_dir, history_path);
        if (cnn_ev->parsed()) return cmd_cnn_eval(args, dataset_dir, model_path);
        if (suite_run->parsed()) return cmd_suite_run(args);
        if (confusion_run->parsed()) return cmd_confusion_run(args);
        if (loc->parsed()) return cmd_localize(args, image_path, svm_model, cnn_model, window, stride);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "no subcommand executed\n";
    return 1;
}
