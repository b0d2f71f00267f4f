#include "ecnn/model.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "ecnn/io.hpp"
#include "ecnn/metrics.hpp"

namespace ecnn {

template <typename T>
std::size_t BasicModelParams<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

template struct BasicModelParams<float>;
template struct BasicModelParams<double>;

// ---------------------------------------------------------------------------
// Architecture

namespace {

long floor_half(long v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

}  // namespace

std::vector<ConvGeometry> plan_layers(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t l = cfg.conv_layers, k = cfg.kernel, r = cfg.scale;
    const long same = static_cast<long>((k - 1) / 2);
    std::vector<ConvGeometry> plan;
    std::size_t depth = cfg.feature_depth;
    std::size_t channels = 1;

    for (std::size_t i = 0; i < l; ++i) {
        ConvGeometry g;
        g.in_channels = channels;
        g.out_channels = cfg.filters[i];
        const std::size_t kd = std::min(k, depth);
        g.kernel = {kd, k, k};
        g.pad_lo = {0, same, same};
        g.pad_hi = {0, same, same};
        plan.push_back(g);
        depth -= kd - 1;
        channels = g.out_channels;
    }

    ConvGeometry up;
    up.in_channels = channels;
    up.out_channels = cfg.filters[l];
    const std::size_t kd = std::min(k, depth);
    up.kernel = {kd, k, k};
    up.stride = {1, r, r};
    const long dtot = static_cast<long>(kd) - 1;
    const long ptot = static_cast<long>(k) - static_cast<long>(r);
    up.pad_lo = {floor_half(dtot), floor_half(ptot), floor_half(ptot)};
    up.pad_hi = {dtot - up.pad_lo[0], ptot - up.pad_lo[1], ptot - up.pad_lo[2]};
    plan.push_back(up);
    channels = up.out_channels;

    ConvGeometry out;
    out.in_channels = channels;
    out.out_channels = cfg.filters[l + 1];
    out.kernel = {depth, k, k};
    out.pad_lo = {0, same, same};
    out.pad_hi = {0, same, same};
    plan.push_back(out);

    if (out.conv_extent(0, depth) != 1) {
        throw ConfigError("depth arithmetic does not reach one slice for " + cfg.arch_string());
    }
    return plan;
}

ModelParams build_model(const ModelConfig& cfg, Rng& rng) {
    const auto plan = plan_layers(cfg);
    ModelParams p;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        Layer<float> layer;
        layer.geom = plan[i];
        layer.kind = i == cfg.conv_layers ? LayerKind::deconv : LayerKind::conv;
        layer.relu = i + 1 < plan.size();
        const auto& g = layer.geom;
        const Shape ws = layer.kind == LayerKind::conv ? g.conv_weight_shape() : g.deconv_weight_shape();
        const double fan_in = static_cast<double>(g.in_channels * g.kernel[0] * g.kernel[1] * g.kernel[2]);
        const double bound = 1.0 / std::sqrt(fan_in);
        layer.weights = uniform_init<float>(ws, -bound, bound, rng);
        layer.bias = zeros<float>(Shape{g.out_channels});
        p.layers.push_back(std::move(layer));
    }
    return p;
}

template <typename U, typename T>
BasicModelParams<U> cast_params(const BasicModelParams<T>& p) {
    BasicModelParams<U> out;
    for (const auto& l : p.layers) {
        out.layers.push_back(Layer<U>{l.kind, l.geom, cast<U>(l.weights), cast<U>(l.bias), l.relu});
    }
    return out;
}

template BasicModelParams<double> cast_params<double, float>(const BasicModelParams<float>&);
template BasicModelParams<float> cast_params<float, double>(const BasicModelParams<double>&);
template BasicModelParams<float> cast_params<float, float>(const BasicModelParams<float>&);
template BasicModelParams<double> cast_params<double, double>(const BasicModelParams<double>&);

// ---------------------------------------------------------------------------
// Forward / backward

template <typename T>
BasicTensor<T> forward(const BasicModelParams<T>& params, const BasicTensor<T>& lr_patch, ForwardTrace<T>* trace) {
    if (params.layers.empty()) throw ShapeError("forward: empty model");
    if (trace) {
        trace->inputs.clear();
        trace->pre.clear();
    }
    BasicTensor<T> x = lr_patch;
    for (const auto& layer : params.layers) {
        BasicTensor<T> pre = layer.kind == LayerKind::conv
                                 ? conv3d_forward(x, layer.weights, layer.bias, layer.geom)
                                 : deconv3d_forward(x, layer.weights, layer.bias, layer.geom);
        BasicTensor<T> next = layer.relu ? relu_forward(pre) : pre;
        if (trace) {
            trace->inputs.push_back(std::move(x));
            trace->pre.push_back(std::move(pre));
        }
        x = std::move(next);
    }
    const std::size_t o = x.shape().rank() == 5 ? 1 : 0;
    if (x.shape().rank() < 4 || x.extent(o) != 1 || x.extent(o + 1) != 1) {
        throw ShapeError("forward: input " + lr_patch.shape().to_string() + " leaves output " + x.shape().to_string() +
                         "; the input depth does not match the model's feature depth");
    }
    return x;
}

template <typename T>
std::vector<LayerGrads<T>> backward(const BasicModelParams<T>& params, const ForwardTrace<T>& trace,
                                    const BasicTensor<T>& d_output) {
    const std::size_t L = params.layers.size();
    if (trace.inputs.size() != L || trace.pre.size() != L) {
        throw ShapeError("backward: trace does not match the model (" + std::to_string(trace.inputs.size()) +
                         " layers recorded, " + std::to_string(L) + " expected)");
    }
    std::vector<LayerGrads<T>> grads(L);
    BasicTensor<T> g = d_output;
    for (std::size_t i = L; i-- > 0;) {
        const auto& layer = params.layers[i];
        if (layer.relu) g = relu_backward(trace.pre[i], g);
        const bool need_input = i > 0;
        grads[i] = layer.kind == LayerKind::conv
                       ? conv3d_backward(trace.inputs[i], layer.weights, layer.geom, g, need_input)
                       : deconv3d_backward(trace.inputs[i], layer.weights, layer.geom, g, need_input);
        if (need_input) g = std::move(grads[i].d_input);
        grads[i].d_input = BasicTensor<T>();
    }
    return grads;
}

namespace {

template <typename T>
void update(BasicTensor<T>& w, const BasicTensor<T>& dw, double lr, std::size_t layer, const char* what) {
    if (!(w.shape() == dw.shape())) {
        throw ShapeError("sgd_step: layer " + std::to_string(layer) + " " + what + " gradient shape " +
                         dw.shape().to_string() + " != " + w.shape().to_string());
    }
    for (std::size_t i = 0; i < dw.size(); ++i) {
        if (!std::isfinite(dw[i])) {
            throw NumericError("sgd_step: non-finite " + std::string(what) + " gradient in layer " +
                               std::to_string(layer) + " at flat index " + std::to_string(i));
        }
    }
    if (lr == 0.0) return;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * static_cast<double>(dw[i]));
    }
    ensure_finite(w, "sgd_step layer " + std::to_string(layer) + " " + what);
}

}  // namespace

template <typename T>
void sgd_step(BasicModelParams<T>& params, const std::vector<LayerGrads<T>>& grads, double lr) {
    if (!std::isfinite(lr) || lr < 0.0) throw NumericError("sgd_step: lr must be finite and >= 0");
    if (grads.size() != params.layers.size()) {
        throw ShapeError("sgd_step: " + std::to_string(grads.size()) + " gradient sets for " +
                         std::to_string(params.layers.size()) + " layers");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        update(params.layers[i].weights, grads[i].d_weights, lr, i, "weight");
        update(params.layers[i].bias, grads[i].d_bias, lr, i, "bias");
    }
}

#define ECNN_INSTANTIATE(T)                                                                                \
    template BasicTensor<T> forward(const BasicModelParams<T>&, const BasicTensor<T>&, ForwardTrace<T>*); \
    template std::vector<LayerGrads<T>> backward(const BasicModelParams<T>&, const ForwardTrace<T>&,       \
                                                 const BasicTensor<T>&);                                  \
    template void sgd_step(BasicModelParams<T>&, const std::vector<LayerGrads<T>>&, double);

ECNN_INSTANTIATE(float)
ECNN_INSTANTIATE(double)

#undef ECNN_INSTANTIATE

// ---------------------------------------------------------------------------
// Training

namespace {

// Stacks same-shaped [C,D,H,W] tensors into [B,C,D,H,W].
Tensor stack(const std::vector<const Tensor*>& items) {
    const Shape& s = items.front()->shape();
    Tensor out(Shape{items.size(), s[0], s[1], s[2], s[3]});
    float* dst = out.data();
    for (const Tensor* t : items) {
        if (!(t->shape() == s)) {
            throw ShapeError("cannot batch " + t->shape().to_string() + " with " + s.to_string());
        }
        dst = std::copy(t->values().begin(), t->values().end(), dst);
    }
    return out;
}

Tensor stack_lr(const std::vector<const TrainingPair*>& pairs) {
    std::vector<const Tensor*> t;
    for (const auto* p : pairs) t.push_back(&p->lr_patch);
    return stack(t);
}

Tensor stack_hr(const std::vector<const TrainingPair*>& pairs) {
    std::vector<const Tensor*> t;
    for (const auto* p : pairs) t.push_back(&p->hr_patch);
    return stack(t);
}

constexpr std::size_t kEvalChunk = 64;

// Calls fn(chunk, predictions) for consecutive chunks of `pairs`.
template <typename Fn>
void forward_chunks(const ModelParams& params, const std::vector<TrainingPair>& pairs, Fn&& fn) {
    std::vector<const TrainingPair*> chunk;
    for (std::size_t i = 0; i < pairs.size(); i += kEvalChunk) {
        chunk.clear();
        for (std::size_t j = i; j < std::min(pairs.size(), i + kEvalChunk); ++j) chunk.push_back(&pairs[j]);
        fn(chunk, forward(params, stack_lr(chunk)));
    }
}

}  // namespace

BatchResult batch_gradient(const ModelParams& params, const std::vector<const TrainingPair*>& batch) {
    if (batch.empty()) throw DataError("batch_gradient: empty batch");
    ForwardTrace<float> trace;
    const Tensor pred = forward(params, stack_lr(batch), &trace);
    const auto loss = mse_loss(pred, stack_hr(batch), batch.size());
    BatchResult out;
    out.loss = loss.loss;
    out.grads = backward(params, trace, loss.d_pred);
    return out;
}

double mean_pair_psnr(const ModelParams& params, const std::vector<TrainingPair>& pairs) {
    double sum = 0.0;
    std::size_t used = 0;
    forward_chunks(params, pairs, [&](const std::vector<const TrainingPair*>& chunk, const Tensor& pred) {
        const std::size_t per = pred.size() / chunk.size();
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const double v = psnr(std::span<const float>(pred.data() + i * per, per), chunk[i]->hr_patch.values());
            if (std::isinf(v)) continue;
            sum += v;
            ++used;
        }
    });
    return used ? sum / static_cast<double>(used) : kPsnrIdentical;
}

std::uint64_t params_checksum(const ModelParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const Tensor& t) {
        for (float v : t.values()) {
            const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
            for (int b = 0; b < 4; ++b) {
                h ^= (bits >> (8 * b)) & 0xffu;
                h *= 0x100000001b3ULL;
            }
        }
    };
    for (const auto& l : params.layers) {
        mix(l.weights);
        mix(l.bias);
    }
    return h;
}

bool TrainReport::same_outcome(const TrainReport& o) const {
    // NaN (no validation pairs) matches NaN.
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    if (initial_loss != o.initial_loss || checksum != o.checksum || epochs.size() != o.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto &a = epochs[i], &b = o.epochs[i];
        if (a.epoch != b.epoch || a.train_loss != b.train_loss || !same(a.val_psnr, b.val_psnr)) return false;
    }
    return true;
}

namespace {

void check_pairs(const std::vector<TrainingPair>& pairs, const ModelConfig& cfg, const char* which,
                 bool allow_empty) {
    if (pairs.empty()) {
        if (allow_empty) return;
        throw DataError(std::string(which) + " dataset is empty");
    }
    const std::size_t n = cfg.feature_depth, r = cfg.scale;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Shape& ls = pairs[i].lr_patch.shape();
        const Shape& hs = pairs[i].hr_patch.shape();
        const bool ok = ls.rank() == 4 && ls[0] == 1 && ls[1] == n && hs.rank() == 4 && hs[0] == 1 && hs[1] == 1 &&
                        hs[2] == ls[2] * r && hs[3] == ls[3] * r;
        if (!ok) {
            throw DataError(std::string(which) + " pair " + std::to_string(i) + " has shapes " + ls.to_string() +
                            " -> " + hs.to_string() + ", config " + cfg.arch_string() + " needs [1," +
                            std::to_string(n) + ",h,w] -> [1,1,h*" + std::to_string(r) + ",w*" + std::to_string(r) +
                            "]");
        }
    }
}

double dataset_loss(const ModelParams& params, const std::vector<TrainingPair>& pairs) {
    double sum = 0.0;
    forward_chunks(params, pairs, [&](const std::vector<const TrainingPair*>& chunk, const Tensor& pred) {
        sum += mse_loss(pred, stack_hr(chunk), 1).loss;
    });
    return sum / static_cast<double>(pairs.size());
}

TrainResult run_training(ModelParams params, Rng& order, const ModelConfig& cfg,
                         const std::vector<TrainingPair>& train_pairs, const std::vector<TrainingPair>& val_pairs,
                         const EpochCallback& on_epoch) {
    check_pairs(train_pairs, cfg, "training", false);
    check_pairs(val_pairs, cfg, "validation", true);
    TrainResult res;
    try {
        res.report.initial_loss = dataset_loss(params, train_pairs);
    } catch (const NumericError& e) {
        throw NumericError(std::string("non-finite initial loss: ") + e.what());
    }
    std::vector<std::size_t> idx(train_pairs.size());
    std::vector<const TrainingPair*> batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        order.shuffle(std::span<std::size_t>(idx));
        double loss_sum = 0.0;
        for (std::size_t b = 0, start = 0; start < idx.size(); ++b, start += cfg.batch_size) {
            const std::size_t stop = std::min(idx.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&train_pairs[idx[i]]);
            try {
                BatchResult br = batch_gradient(params, batch);
                if (!std::isfinite(br.loss)) throw NumericError("loss is not finite");
                loss_sum += br.loss * static_cast<double>(batch.size());
                sgd_step(params, br.grads, cfg.lr);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b) + ": " + e.what());
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(idx.size());
        rec.val_psnr = val_pairs.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_pair_psnr(params, val_pairs);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    res.report.checksum = params_checksum(params);
    res.params = std::move(params);
    return res;
}

}  // namespace

TrainResult train(const ModelConfig& cfg, const std::vector<TrainingPair>& train_pairs,
                  const std::vector<TrainingPair>& val_pairs, const EpochCallback& on_epoch) {
    cfg.validate();
    Rng init(cfg.seed);
    Rng order = init.split();
    ModelParams params = build_model(cfg, init);
    return run_training(std::move(params), order, cfg, train_pairs, val_pairs, on_epoch);
}

TrainResult train_from(ModelParams params, const ModelConfig& cfg, const std::vector<TrainingPair>& train_pairs,
                       const std::vector<TrainingPair>& val_pairs, const EpochCallback& on_epoch) {
    cfg.validate();
    Rng init(cfg.seed);
    Rng order = init.split();
    return run_training(std::move(params), order, cfg, train_pairs, val_pairs, on_epoch);
}

// ---------------------------------------------------------------------------
// Inference

std::size_t receptive_halo(const ModelConfig& cfg) {
    const std::size_t k = cfg.kernel, r = cfg.scale, half = (k - 1) / 2;
    // conv stack + deconvolution footprint + output conv, rounded up.
    return cfg.conv_layers * half + (k + r) / r + 1 + (half + r - 1) / r;
}

namespace {

std::vector<std::size_t> core_origins(std::size_t extent, std::size_t core) {
    std::vector<std::size_t> o;
    for (std::size_t p = 0; p < extent; p += core) o.push_back(std::min(p, extent - core));
    return o;
}

}  // namespace

Volume infer_volume(const ModelParams& params, const ModelConfig& cfg, const Volume& lr, const InferOptions& opts) {
    const std::size_t n = cfg.feature_depth, r = cfg.scale;
    const std::size_t D = lr.depth(), H = lr.height(), W = lr.width();
    if (D < n) {
        throw DataError("volume has " + std::to_string(D) + " slices, model needs at least n=" + std::to_string(n));
    }
    const std::size_t halo = opts.halo.value_or(receptive_halo(cfg));
    const std::size_t ch = opts.tile == 0 ? H : std::min(opts.tile, H);
    const std::size_t cw = opts.tile == 0 ? W : std::min(opts.tile, W);
    const auto ys = core_origins(H, ch);
    const auto xs = core_origins(W, cw);
    const std::size_t HH = H * r, WW = W * r;

    Tensor out(Shape{D, HH, WW});
    std::vector<double> sum(HH * WW);
    std::vector<std::uint32_t> count(HH * WW);
    const long half = static_cast<long>(n / 2);
    for (std::size_t z = 0; z < D; ++z) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(count.begin(), count.end(), 0u);
        for (std::size_t y0 : ys) {
            for (std::size_t x0 : xs) {
                const std::size_t ry0 = y0 >= halo ? y0 - halo : 0, ry1 = std::min(H, y0 + ch + halo);
                const std::size_t rx0 = x0 >= halo ? x0 - halo : 0, rx1 = std::min(W, x0 + cw + halo);
                const std::size_t rh = ry1 - ry0, rw = rx1 - rx0;
                Tensor patch(Shape{1, n, rh, rw});
                for (std::size_t dz = 0; dz < n; ++dz) {
                    const long src = std::clamp(static_cast<long>(z) - half + static_cast<long>(dz), 0L,
                                                static_cast<long>(D) - 1);
                    for (std::size_t y = 0; y < rh; ++y) {
                        const float* row = lr.slice(static_cast<std::size_t>(src)) + (ry0 + y) * W + rx0;
                        std::copy(row, row + rw, patch.data() + (dz * rh + y) * rw);
                    }
                }
                const Tensor pred = forward(params, patch);
                const std::size_t pw = rw * r;
                for (std::size_t y = y0 * r; y < (y0 + ch) * r; ++y) {
                    for (std::size_t x = x0 * r; x < (x0 + cw) * r; ++x) {
                        sum[y * WW + x] += pred[(y - ry0 * r) * pw + (x - rx0 * r)];
                        ++count[y * WW + x];
                    }
                }
            }
        }
        float* dst = out.data() + z * HH * WW;
        for (std::size_t i = 0; i < HH * WW; ++i) dst[i] = static_cast<float>(sum[i] / count[i]);
    }
    Spacing s = lr.spacing;
    s.dy /= static_cast<double>(r);
    s.dx /= static_cast<double>(r);
    return Volume(std::move(out), s);
}

// ---------------------------------------------------------------------------
// Grid search

std::vector<ModelConfig> GridSpace::expand(const ModelConfig& base) const {
    if (feature_depth.empty() || conv_layers.empty() || filters.empty() || kernel.empty()) {
        throw ConfigError("grid space: every candidate list (n, l, f, k) must be non-empty");
    }
    std::vector<ModelConfig> out;
    std::vector<std::string> bad;
    for (std::size_t n : feature_depth)
        for (std::size_t l : conv_layers)
            for (const auto& f : filters)
                for (std::size_t k : kernel) {
                    ModelConfig c = base;
                    c.feature_depth = n;
                    c.conv_layers = l;
                    c.filters = f;
                    c.kernel = k;
                    for (const auto& p : c.problems()) bad.push_back(c.arch_string() + ": " + p);
                    out.push_back(std::move(c));
                }
    if (!bad.empty()) {
        std::string msg = "grid space has invalid combinations:";
        for (const auto& b : bad) msg += "\n  - " + b;
        throw ConfigError(msg);
    }
    return out;
}

std::size_t grid_epochs(const ModelConfig& cfg, double fraction) {
    if (!(fraction > 0.0) || !std::isfinite(fraction)) throw ConfigError("grid epoch fraction must be > 0");
    const double e = std::round(fraction * static_cast<double>(cfg.epochs));
    return std::max<std::size_t>(1, static_cast<std::size_t>(e));
}

void rank_results(std::vector<GridResult>& results) {
    std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
        if (a.ok != b.ok) return a.ok;
        if (a.ok && a.val_psnr != b.val_psnr) return a.val_psnr > b.val_psnr;
        return a.cfg.arch_string() < b.cfg.arch_string();
    });
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = i + 1;
}

std::vector<GridResult> grid_search(const GridSpace& space, const ModelConfig& base,
                                    const std::function<GridData(const ModelConfig&)>& data_for, double fraction,
                                    const std::function<std::optional<GridResult>(const ModelConfig&)>& skip,
                                    const std::function<void(const GridResult&)>& on_result) {
    const auto configs = space.expand(base);
    std::vector<GridResult> results;
    for (const auto& cfg : configs) {
        if (skip) {
            if (auto prev = skip(cfg)) {
                results.push_back(*prev);
                continue;
            }
        }
        GridResult r;
        r.cfg = cfg;
        try {
            ModelConfig run = cfg;
            run.epochs = grid_epochs(cfg, fraction);
            const GridData data = data_for(run);
            if (data.val.empty()) throw DataError("grid search needs validation pairs");
            const TrainResult t = train(run, data.train, data.val);
            r.val_psnr = t.report.epochs.back().val_psnr;
            r.ok = std::isfinite(r.val_psnr) || r.val_psnr > 0;
            if (!r.ok) r.error = "validation PSNR is not a number";
        } catch (const Error& e) {
            r.ok = false;
            r.error = e.what();
        }
        if (on_result) on_result(r);
        results.push_back(std::move(r));
    }
    rank_results(results);
    return results;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::string_view kCheckpointMagic{"3DECNN\0", 7};
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint32_t narrow_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw ConfigError(std::string(what) + " does not fit in 32 bits");
    return static_cast<std::uint32_t>(v);
}

void put_tensor(ByteWriter& w, const Tensor& t) {
    w.u32(static_cast<std::uint32_t>(t.shape().rank()));
    for (std::size_t e : t.shape().extents()) w.u64(e);
    w.f32s(t.values());
}

Tensor get_tensor(ByteReader& r, const Shape& expected, const std::string& what) {
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw HeaderError("checkpoint: " + what + " has rank " + std::to_string(rank));
    std::vector<std::size_t> ext(rank);
    for (auto& e : ext) e = r.u64();
    if (ext != std::vector<std::size_t>(expected.extents().begin(), expected.extents().end())) {
        std::string got = "[";
        for (std::size_t i = 0; i < ext.size(); ++i) got += (i ? "," : "") + std::to_string(ext[i]);
        throw DataError("checkpoint: " + what + " shape " + got + "] disagrees with config (expected " +
                        expected.to_string() + ")");
    }
    Tensor t(expected);
    r.f32s(t.values());
    return t;
}

}  // namespace

std::string encode_checkpoint(const ModelConfig& cfg, const ModelParams& params) {
    cfg.validate();
    ByteWriter w;
    w.raw(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u32(narrow_u32(cfg.feature_depth, "feature_depth"));
    w.u32(narrow_u32(cfg.conv_layers, "conv_layers"));
    w.u32(narrow_u32(cfg.filters.size(), "filter count"));
    for (std::size_t f : cfg.filters) w.u32(narrow_u32(f, "filter"));
    w.u32(narrow_u32(cfg.kernel, "kernel"));
    w.u32(narrow_u32(cfg.scale, "scale"));
    w.f64(cfg.lr);
    w.u64(cfg.seed);
    w.u32(narrow_u32(cfg.epochs, "epochs"));
    w.u32(narrow_u32(cfg.batch_size, "batch_size"));
    w.u32(narrow_u32(cfg.patch_hw, "patch_hw"));
    w.u32(narrow_u32(params.layers.size(), "layer count"));
    for (const auto& l : params.layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        put_tensor(w, l.weights);
        put_tensor(w, l.bias);
    }
    return w.bytes();
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params) {
    atomic_write(path, encode_checkpoint(cfg, params));
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    ByteReader r(bytes, "checkpoint");
    if (r.remaining() < kCheckpointMagic.size() || r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
        throw HeaderError("checkpoint: bad magic");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) throw HeaderError("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint ck;
    ModelConfig& c = ck.cfg;
    c.feature_depth = r.u32();
    c.conv_layers = r.u32();
    const std::uint32_t nf = r.u32();
    if (nf > 1024) throw HeaderError("checkpoint: implausible filter count " + std::to_string(nf));
    c.filters.resize(nf);
    for (auto& f : c.filters) f = r.u32();
    c.kernel = r.u32();
    c.scale = r.u32();
    c.lr = r.f64();
    c.seed = r.u64();
    c.epochs = r.u32();
    c.batch_size = r.u32();
    c.patch_hw = r.u32();
    if (const auto p = c.problems(); !p.empty()) throw HeaderError("checkpoint: stored config is invalid: " + p.front());

    const auto plan = plan_layers(c);
    const std::uint32_t count = r.u32();
    if (count != plan.size()) {
        throw DataError("checkpoint: " + std::to_string(count) + " layers stored, config implies " +
                        std::to_string(plan.size()));
    }
    for (std::size_t i = 0; i < plan.size(); ++i) {
        Layer<float> l;
        l.geom = plan[i];
        l.kind = i == c.conv_layers ? LayerKind::deconv : LayerKind::conv;
        l.relu = i + 1 < plan.size();
        const std::uint8_t kind = r.u8();
        if (kind != static_cast<std::uint8_t>(l.kind)) {
            throw DataError("checkpoint: layer " + std::to_string(i) + " has kind " + std::to_string(kind));
        }
        const Shape ws = l.kind == LayerKind::conv ? l.geom.conv_weight_shape() : l.geom.deconv_weight_shape();
        l.weights = get_tensor(r, ws, "layer " + std::to_string(i) + " weights");
        l.bias = get_tensor(r, Shape{l.geom.out_channels}, "layer " + std::to_string(i) + " bias");
        ensure_finite(l.weights, "checkpoint weights");
        ensure_finite(l.bias, "checkpoint bias");
        ck.params.layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) throw DataError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file(path));
    } catch (const NumericError& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        const std::string msg = path.string() + ": " + e.what();
        if (dynamic_cast<const HeaderError*>(&e)) throw HeaderError(msg);
        if (dynamic_cast<const TruncatedError*>(&e)) throw TruncatedError(msg);
        throw DataError(msg);
    }
}

}  // namespace ecnn
