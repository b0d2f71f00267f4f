#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ecnn/config.hpp"
#include "ecnn/data.hpp"
#include "ecnn/nn_ops.hpp"
#include "ecnn/rng.hpp"
#include "ecnn/tensor.hpp"

namespace ecnn {

enum class LayerKind : std::uint8_t { conv = 0, deconv = 1 };

template <typename T>
struct Layer {
    LayerKind kind = LayerKind::conv;
    ConvGeometry geom;
    BasicTensor<T> weights;  // conv [Co,Ci,k..], deconv [Ci,Co,k..]
    BasicTensor<T> bias;     // [Co]
    bool relu = true;

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Layer stack in execution order: conv x l, deconv, output conv.
template <typename T>
struct BasicModelParams {
    std::vector<Layer<T>> layers;

    std::size_t parameter_count() const;
    friend bool operator==(const BasicModelParams&, const BasicModelParams&) = default;
};

using ModelParams = BasicModelParams<float>;

/// Per-layer geometry for cfg.
///
/// In-plane: conv layers pad (k-1)/2 per side; the deconvolution has stride
/// r and total padding k - r split as floor/ceil, so its output is exactly
/// r times its input (negative padding extends the output when k < r).
/// Depth: conv layers are valid with kernel depth min(k, remaining depth);
/// the deconvolution has depth stride 1 and keeps the depth; the output
/// conv's kernel depth equals the remaining depth, leaving one slice.
std::vector<ConvGeometry> plan_layers(const ModelConfig& cfg);

/// Weights uniform in +-1/sqrt(fan_in) with fan_in = C_in * k1 * k2 * k3
/// (C_in of the layer's own input); biases zero. Draw order: layer by
/// layer, weights in flat order. Throws ConfigError for an invalid cfg.
ModelParams build_model(const ModelConfig& cfg, Rng& rng);

template <typename U, typename T>
BasicModelParams<U> cast_params(const BasicModelParams<T>& p);

/// Activations kept for the backward pass.
template <typename T>
struct ForwardTrace {
    std::vector<BasicTensor<T>> inputs;  // input of each layer
    std::vector<BasicTensor<T>> pre;     // pre-activation output of each layer
};

/// lr_patch [1, n, h, w] -> [1, 1, h*r, w*r]. Throws ShapeError on a depth
/// or channel mismatch.
template <typename T>
BasicTensor<T> forward(const BasicModelParams<T>& params, const BasicTensor<T>& lr_patch,
                       ForwardTrace<T>* trace = nullptr);

/// Gradients of every layer given d(loss)/d(output).
template <typename T>
std::vector<LayerGrads<T>> backward(const BasicModelParams<T>& params, const ForwardTrace<T>& trace,
                                    const BasicTensor<T>& d_output);

/// w <- w - lr * dw, b <- b - lr * db, computed in double and rounded once.
/// lr == 0 leaves params untouched. Throws ShapeError on mismatched grads,
/// NumericError naming the layer on non-finite gradients, negative or
/// non-finite lr.
template <typename T>
void sgd_step(BasicModelParams<T>& params, const std::vector<LayerGrads<T>>& grads, double lr);

/// Loss and gradient of one mini-batch: loss = (1/m) sum_i ||f(x_i) - y_i||^2
/// with per-sample gradients summed in batch order.
struct BatchResult {
    double loss = 0.0;
    std::vector<LayerGrads<float>> grads;
};
BatchResult batch_gradient(const ModelParams& params, const std::vector<const TrainingPair*>& batch);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean of mini-batch losses weighted by batch size
    double val_psnr = 0.0;    // mean over validation pairs, +inf pairs excluded
    double seconds = 0.0;     // wall time; not part of the deterministic record
};

struct TrainReport {
    double initial_loss = 0.0;  // training loss of the initial params
    std::vector<EpochRecord> epochs;
    std::uint64_t checksum = 0;  // of the final params

    /// Everything except wall time.
    bool same_outcome(const TrainReport& other) const;
};

struct TrainResult {
    ModelParams params;
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// With init = Rng(cfg.seed), the shuffle stream is init.split(), taken
/// before init draws the weights (build_model). Throws DataError on an
/// empty or mis-shaped dataset and NumericError with epoch/batch
/// coordinates on a non-finite loss.
TrainResult train(const ModelConfig& cfg, const std::vector<TrainingPair>& train_pairs,
                  const std::vector<TrainingPair>& val_pairs, const EpochCallback& on_epoch = {});

/// Same, continuing from given parameters instead of building new ones.
TrainResult train_from(ModelParams params, const ModelConfig& cfg, const std::vector<TrainingPair>& train_pairs,
                       const std::vector<TrainingPair>& val_pairs, const EpochCallback& on_epoch = {});

/// Mean PSNR (max 1) of forward(lr_patch) against hr_patch over pairs.
double mean_pair_psnr(const ModelParams& params, const std::vector<TrainingPair>& pairs);

/// FNV-1a over the little-endian bytes of every weight and bias.
std::uint64_t params_checksum(const ModelParams& params);

struct InferOptions {
    /// In-plane LR tile core extent; 0 means one tile per slice.
    std::size_t tile = 64;
    /// Extra LR context around each core; nullopt picks the receptive radius.
    std::optional<std::size_t> halo;
};

/// LR context (per side) that makes a tile core's output equal to the
/// whole-slice output.
std::size_t receptive_halo(const ModelConfig& cfg);

/// Every slice z is predicted from the n-window centred on z with slice
/// indices clamped to the volume. Tiles have cores of opts.tile covering
/// the slice (the last core flush with the far edge), each forwarded with
/// its halo; predictions of overlapping cores are averaged uniformly.
/// Throws DataError when the volume has fewer than n slices.
Volume infer_volume(const ModelParams& params, const ModelConfig& cfg, const Volume& lr, const InferOptions& opts = {});

struct GridSpace {
    std::vector<std::size_t> feature_depth;
    std::vector<std::size_t> conv_layers;
    std::vector<std::vector<std::size_t>> filters;
    std::vector<std::size_t> kernel;

    /// Cartesian product over (n, l, f, k) in that nesting order, applied to
    /// base. Throws ConfigError on an empty list or an invalid combination.
    std::vector<ModelConfig> expand(const ModelConfig& base) const;
};

struct GridResult {
    ModelConfig cfg;
    bool ok = false;
    double val_psnr = 0.0;
    std::string error;
    std::size_t rank = 0;  // 1-based; failures rank after successes
};

struct GridData {
    std::vector<TrainingPair> train;
    std::vector<TrainingPair> val;
};

/// Epochs for one grid run: max(1, round(fraction * cfg.epochs)).
std::size_t grid_epochs(const ModelConfig& cfg, double fraction);

/// Sorts by val_psnr descending, ties by arch_string ascending, failures
/// last; assigns ranks.
void rank_results(std::vector<GridResult>& results);

/// Trains every combination for grid_epochs(cfg, fraction) epochs on the
/// data returned by `data_for(cfg)` and ranks the results. A failing
/// combination is recorded with its error and does not stop the search.
/// `skip` may return an earlier result to reuse (resume); `on_result` sees
/// each fresh result as soon as it exists.
std::vector<GridResult> grid_search(const GridSpace& space, const ModelConfig& base,
                                    const std::function<GridData(const ModelConfig&)>& data_for,
                                    double fraction = 0.2,
                                    const std::function<std::optional<GridResult>(const ModelConfig&)>& skip = {},
                                    const std::function<void(const GridResult&)>& on_result = {});

/// Checkpoint: "3DECNN\0", u32 version, the ModelConfig, u32 layer count,
/// then per layer u8 kind and the weight and bias tensors, each as u32 rank,
/// u64 extents, f32 payload. All little-endian.
std::string encode_checkpoint(const ModelConfig& cfg, const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params);

struct Checkpoint {
    ModelConfig cfg;
    ModelParams params;
};
/// Throws HeaderError (bad magic/version/config), TruncatedError, or
/// DataError when tensor shapes disagree with the stored config.
Checkpoint decode_checkpoint(std::string_view bytes);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ecnn
