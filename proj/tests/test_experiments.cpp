#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "srmnet/experiments.hpp"
#include "srmnet/rng.hpp"

using namespace srmnet;
namespace fs = std::filesystem;

namespace {

// A tiny synthetic corpus shared by the dataset tests.
std::string tiny_corpus() {
    static const std::string dir = [] {
        const auto path = fs::temp_directory_path() / "srmnet_tiny_corpus";
        fs::remove_all(path);
        SynthConfig cfg;
        cfg.groups = 3;
        cfg.images_per_group = 2;
        cfg.width = 256;
        cfg.height = 256;
        cfg.seed = 99;
        synth_corpus(path.string(), cfg);
        return path.string();
    }();
    return dir;
}

}  // namespace

TEST_CASE("synthetic corpus layout") {
    const std::string dir = tiny_corpus();
    int groups = 0, images = 0;
    for (const auto& g : fs::directory_iterator(dir)) {
        if (!g.is_directory()) continue;
        ++groups;
        for (const auto& f : fs::directory_iterator(g.path())) {
            ++images;
            const Plane p = load_image(f.path().string());
            CHECK(p.width == 256);
            CHECK(p.height == 256);
        }
    }
    CHECK(groups == 3);
    CHECK(images == 6);

    SUBCASE("rendering is deterministic") {
        SynthConfig cfg;
        cfg.groups = 3;
        cfg.images_per_group = 2;
        cfg.width = 256;
        cfg.height = 256;
        cfg.seed = 99;
        CHECK(synth_image(cfg, 1, 0).data == synth_image(cfg, 1, 0).data);
        CHECK(synth_image(cfg, 1, 0).data != synth_image(cfg, 2, 0).data);
    }
}

TEST_CASE("dataset construction") {
    const ManipulationSpec spec{ManipulationKind::Median, 3.0, 0};
    const Dataset ds = build_dataset(tiny_corpus(), spec, 0.5, 31);

    SUBCASE("source groups never straddle the split") {
        std::set<int> train(ds.train_groups.begin(), ds.train_groups.end());
        for (const int g : ds.test_groups) CHECK(train.count(g) == 0);
        CHECK(ds.train_groups.size() + ds.test_groups.size() == 3);
        CHECK(!ds.train_groups.empty());
        CHECK(!ds.test_groups.empty());
    }
    SUBCASE("pristine and manipulated patches pair up by origin") {
        std::map<std::tuple<int, int, int, int>, std::array<int, 2>> counts;
        for (const auto& r : ds.records) {
            counts[{r.group, r.image, r.origin.x, r.origin.y}][static_cast<std::size_t>(r.label)] += 1;
        }
        for (const auto& [key, c] : counts) {
            CHECK(c[0] == 1);
            CHECK(c[1] == 1);
        }
        // 6 images of 256x256 -> 4 patches each, two labels
        CHECK(ds.records.size() == 6 * 4 * 2);
    }
    SUBCASE("two groups split into exactly one per side") {
        const Dataset two = build_dataset(tiny_corpus(), spec, 0.5, 32);
        (void)two;
        // with three groups, a 0.5 fraction still leaves both sides nonempty
        CHECK(two.train_groups.size() >= 1);
        CHECK(two.test_groups.size() >= 1);
    }
    SUBCASE("deterministic given the seed") {
        const Dataset a = build_dataset(tiny_corpus(), spec, 0.5, 31);
        CHECK(a.train_groups == ds.train_groups);
        REQUIRE(a.records.size() == ds.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            CHECK(a.records[i].patch.pix == ds.records[i].patch.pix);
        }
    }
}

TEST_CASE("dataset directory round trip") {
    const ManipulationSpec spec{ManipulationKind::Blur, 0.5, 0};
    const Dataset ds = build_dataset(tiny_corpus(), spec, 0.5, 7);
    const auto dir = fs::temp_directory_path() / "srmnet_dataset_rt";
    fs::remove_all(dir);
    save_dataset(ds, dir.string());
    const Dataset back = load_dataset(dir.string());
    REQUIRE(back.records.size() == ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(back.records[i].patch.pix == ds.records[i].patch.pix);
        CHECK(back.records[i].label == ds.records[i].label);
    }
    CHECK(back.split(true).size() == ds.split(true).size());
    fs::remove_all(dir);
}

TEST_CASE("binary evaluation") {
    const ManipulationSpec spec{ManipulationKind::Median, 3.0, 0};
    const Dataset ds = build_dataset(tiny_corpus(), spec, 0.5, 31);
    const auto test = ds.split(false);
    REQUIRE(!test.empty());

    SUBCASE("an oracle predictor scores 1.0") {
        std::size_t cursor = 0;
        std::vector<int> truth(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) truth[i] = test[i]->label;
        const auto oracle = [&](const Plane&) { return truth[cursor++]; };
        // single-threaded scoring keeps the cursor trick valid
        setenv("SRMNET_THREADS", "1", 1);
        const BinaryEval ev = eval_binary(oracle, test);
        unsetenv("SRMNET_THREADS");
        CHECK(ev.accuracy == 1.0);
        CHECK(ev.recall[0] == 1.0);
        CHECK(ev.recall[1] == 1.0);
    }
    SUBCASE("a constant predictor scores 0.5 on the balanced set") {
        const BinaryEval ev = eval_binary([](const Plane&) { return 1; }, test);
        CHECK(ev.accuracy == 0.5);
        CHECK(ev.recall[0] == 0.0);
        CHECK(ev.recall[1] == 1.0);
    }
    SUBCASE("empty set rejected") {
        CHECK_THROWS(eval_binary([](const Plane&) { return 0; }, {}));
    }
}

TEST_CASE("feature file round trip") {
    std::vector<std::string> ids = {"a", "b"};
    std::vector<int> labels = {0, 1};
    std::vector<std::vector<double>> features = {{1.0, 2.5, -3.125}, {0.0, 1e-17, 42.0}};
    const std::string path = "/tmp/srmnet_features_test.tsv";
    write_feature_file(path, ids, labels, features);
    std::vector<std::string> ids2;
    std::vector<int> labels2;
    std::vector<std::vector<double>> features2;
    read_feature_file(path, ids2, labels2, features2);
    CHECK(ids2 == ids);
    CHECK(labels2 == labels);
    CHECK(features2 == features);
}

TEST_CASE("confusion matrix is row-stochastic") {
    Rng rng(17);
    std::vector<std::vector<double>> train_x, test_x;
    std::vector<int> train_y, test_y;
    for (int c = 0; c < 5; ++c) {
        // pentagon vertices: every class is one-vs-rest separable
        const double cx = 5.0 * std::cos(2.0 * M_PI * c / 5.0);
        const double cy = 5.0 * std::sin(2.0 * M_PI * c / 5.0);
        for (int i = 0; i < 40; ++i) {
            const std::vector<double> f = {cx + 0.5 * rng.gaussian(), cy + 0.5 * rng.gaussian()};
            if (i < 25) {
                train_x.push_back(f);
                train_y.push_back(c);
            } else {
                test_x.push_back(f);
                test_y.push_back(c);
            }
        }
    }
    const ConfusionResult result = confusion_multiclass(train_x, train_y, test_x, test_y, 5, 1e-4, 40, 3);
    REQUIRE(result.percent.size() == 5);
    for (const auto& row : result.percent) {
        CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(100.0).epsilon(1e-9));
    }
    // mostly diagonal on well separated classes
    for (int c = 0; c < 5; ++c) CHECK(result.percent[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)] > 50.0);

    SUBCASE("missing classes are rejected") {
        CHECK_THROWS(confusion_multiclass(train_x, train_y, test_x, test_y, 6, 1e-4, 10, 3));
    }
}

TEST_CASE("sliding-window localization geometry") {
    Plane image(300, 200, 0.0);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) image.at(y, x) = x >= 150 ? 1.0 : 0.0;
    }
    // window probability = mean sample value
    const auto prob = [](const Plane& w) {
        double acc = 0.0;
        for (const double v : w.data) acc += v;
        return acc / static_cast<double>(w.size());
    };
    const HeatMap h = localize(image, prob, 128, 128);
    CHECK(h.cols == (300 - 128) / 128 + 1);
    CHECK(h.rows == 1);
    CHECK(h.at(0, 0) == 0.0);
    CHECK(h.at(0, 1) > 0.5);

    SUBCASE("stride geometry") {
        const HeatMap fine = localize(image, prob, 128, 16);
        CHECK(fine.cols == (300 - 128) / 16 + 1);
        CHECK(fine.rows == (200 - 128) / 16 + 1);
    }
    SUBCASE("small images rejected") { CHECK_THROWS(localize(Plane(64, 64, 0.0), prob, 128, 16)); }
}

TEST_CASE("heat map rendering") {
    HeatMap h;
    h.cols = 2;
    h.rows = 1;
    h.window = 128;
    h.stride = 128;
    h.image_w = 256;
    h.image_h = 128;
    h.score = {0.5, 1.0};
    const std::string path = "/tmp/srmnet_heat_test.pgm";
    save_heatmap(h, path);
    const Plane img = load_image(path);
    CHECK(img.width == 256);
    CHECK(img.height == 128);
    CHECK(img.at(0, 0) == 128.0);    // 0.5 * 255 rounds half away from zero
    CHECK(img.at(64, 255) == 255.0); // 1.0 -> 255
}

TEST_CASE("suite configuration parsing") {
    const Config cfg = Config::from_string(
        "corpus_dir = /tmp/corpus\n"
        "tasks = blur:0.5, median:5\n"
        "epochs = 3\n"
        "learning_rate = 1e-5\n"
        "# comment line\n"
        "alpha = 65536\n");
    const SuiteConfig sc = SuiteConfig::from_config(cfg);
    CHECK(sc.corpus_dir == "/tmp/corpus");
    REQUIRE(sc.tasks.size() == 2);
    CHECK(sc.tasks[0].kind == ManipulationKind::Blur);
    CHECK(sc.tasks[0].parameter == 0.5);
    CHECK(sc.tasks[1].kind == ManipulationKind::Median);
    CHECK(sc.tasks[1].parameter == 5.0);
    CHECK(sc.cnn.epochs == 3);
    CHECK(sc.cnn.learning_rate == 1e-5);
}
