#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srmnet/bow_net.hpp"
#include "srmnet/descriptor.hpp"
#include "srmnet/image.hpp"

namespace srmnet {

/// All trainable tensors of the relaxed network plus the two fixed
/// architecture constants (soft-max sharpness and input scaling). Both
/// convolution banks, the codeword layer and the fully connected head are
/// free once training starts.
struct NetParams {
    ConvBank bank_across;  // residual bank, row-shifted arrangement
    ConvBank bank_along;   // twin bank, column-shifted arrangement
    Codebook codebook;
    std::array<double, 2 * kFeatureDim> fc_weights{};  // row-major 2 x 162
    std::array<double, 2> fc_biases{};
    double alpha = 65536.0;     // soft-max sharpness, excluded from training
    double input_scale = 1.0;   // fixed input preprocessing factor
    std::uint64_t revision = 0; // bumped on every optimizer step
};

/// Constrained initialization: hard-wired banks and codebook for the given
/// quantizer step on the scaled input range, fully connected head with zero
/// biases and seeded uniform weights in [-0.01, 0.01].
NetParams init_net_params(double delta, double input_scale, double alpha, std::uint64_t seed);

/// Flat parameter vector layout shared by gradients and the optimizer.
std::size_t param_count();
std::vector<double> pack_params(const NetParams& params);
void unpack_params(std::span<const double> flat, NetParams& params);

struct TensorRange {
    const char* name;
    std::size_t begin;
    std::size_t end;
};
/// Named slices of the flat layout, one per trainable tensor.
const std::vector<TensorRange>& tensor_layout();

/// Numerically stabilized soft-max of alpha * scores.
std::vector<double> softmax_layer(const std::vector<double>& scores, double alpha);

/// -log softmax(logits)[label], stabilized.
double cross_entropy(const std::array<double, 2>& logits, int label);

struct ForwardCache {
    Plane patch;
    Feature feature;  // pooled soft feature, 162
    std::array<double, 2> logits{};
    std::uint64_t params_revision = 0;
};

/// Double-precision forward pass: scaled input -> both conv banks ->
/// matching scores -> per-site soft-max -> average pooling -> affine head.
std::array<double, 2> forward_train(const Plane& patch, const NetParams& params, ForwardCache* cache = nullptr);

/// Pooled soft feature alone (per-block averaged), with an optional alpha
/// override; double precision.
Feature forward_soft_feature(const Plane& patch, const NetParams& params, double alpha_override = -1.0);

/// Exact analytic gradient of cross_entropy(forward_train(...), label) with
/// respect to every trainable tensor, in the flat layout. Throws if the
/// parameters changed since the cache was built.
std::vector<double> backward(const NetParams& params, const ForwardCache& cache, int label);

struct TrainConfig {
    double learning_rate = 1e-6;
    double weight_decay = 5e-4;
    int batch_size = 36;
    int epochs = 15;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    bool freeze_banks = false;
    bool freeze_codebook = false;
    bool freeze_fc = false;
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    long step = 0;
};

/// One Adam update with bias correction; weight_decay * theta is added to
/// each gradient entry before the moment updates.
void adam_step(NetParams& params, const std::vector<double>& grads, AdamState& state, const TrainConfig& cfg);

/// Training data access; implementations materialize patches on demand.
class PatchSource {
public:
    virtual ~PatchSource() = default;
    virtual std::size_t size() const = 0;
    virtual Plane patch(std::size_t i) const = 0;
    virtual int label(std::size_t i) const = 0;
};

class VectorPatchSource : public PatchSource {
public:
    void add(Plane p, int label) {
        patches_.push_back(std::move(p));
        labels_.push_back(label);
    }
    std::size_t size() const override { return patches_.size(); }
    Plane patch(std::size_t i) const override { return patches_[i]; }
    int label(std::size_t i) const override { return labels_[i]; }

private:
    std::vector<Plane> patches_;
    std::vector<int> labels_;
};

struct TrainResult {
    NetParams params;
    std::vector<double> loss_history;  // per-epoch mean loss
};

/// Epochs of seeded shuffled mini-batches with per-batch mean gradients and
/// Adam updates. Patch gradients inside a batch may be computed in parallel;
/// the reduction order is fixed, so results do not depend on thread count.
TrainResult train(const PatchSource& data, const TrainConfig& cfg, const NetParams& init);

/// Fast single-precision inference path used by evaluation loops.
std::array<double, 2> predict_logits(const Plane& patch, const NetParams& params);

/// Loss and flat gradient for one example (single-precision kernel, double
/// accumulation); the workhorse behind train().
double loss_and_grad(const Plane& patch, int label, const NetParams& params, std::vector<double>& grads);

struct TrainMeta {
    TrainConfig cfg;
    int epochs_run = 0;
    double final_loss = 0.0;
    double init_delta = 0.0;
};

/// Trained-model container: bank and codebook tensors, fc head, alpha,
/// input scale and training metadata, as versioned JSON text.
void save_net(const NetParams& params, const TrainMeta& meta, const std::string& path);
NetParams load_net(const std::string& path, TrainMeta* meta = nullptr);

}  // namespace srmnet
