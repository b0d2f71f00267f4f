// One PASS/FAIL line per acceptance criterion; exit status 0 only if all pass.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "../../tools/commands.hpp"
#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"
#include "../support/stats_oracle.hpp"
#include "CLI11.hpp"
#include "ecnn/data.hpp"
#include "ecnn/io.hpp"
#include "ecnn/metrics.hpp"
#include "ecnn/model.hpp"
#include "ecnn/nn_ops.hpp"

using namespace ecnn;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Pinned tolerances and limits.

constexpr double kConvTol = 1e-6;           // max abs diff vs loop-nest oracle
constexpr double kAdjointTol = 1e-5;        // relative
constexpr double kGradTolF32 = 1e-3;
constexpr double kGradTolF64 = 1e-6;
constexpr double kGradStepF32 = 1e-3;       // composite
// conv, deconv and mse are linear or quadratic in every argument, so a
// central difference has no truncation error and a wide step only shrinks
// f32 rounding noise. ReLU inputs stay >= 0.05 from the kink.
constexpr double kPolyStepF32 = 0.25;
constexpr double kReluStepF32 = 1e-2;
constexpr double kGradStepF64 = 1e-5;
constexpr double kMaxKinkShare = 0.25;      // composite components skipped at ReLU kinks
constexpr double kPsnrTol = 1e-6;           // dB
constexpr double kSsimTol = 1e-12;
constexpr double kTStatTol = 1e-3;
constexpr double kPValueTol = 1e-3;
constexpr double kMinGainDb = 0.3;
constexpr double kAlpha = 0.05;

constexpr double kLimitConv = 10, kLimitAdjoint = 10, kLimitGrad = 60, kLimitMetrics = 1;
constexpr double kLimitEndToEnd = 30 * 60, kLimitGrid = 45 * 60, kLimitFormats = 10;

constexpr int kDraws = 100;
constexpr int kRoundTrips = 1000;

// Desk-scale experiment.
constexpr std::uint64_t kDataSeed = 7;
constexpr std::size_t kVolumes = 12, kTrainVolumes = 8;
constexpr std::size_t kDepth = 48, kSide = 96, kScale = 3;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    std::ostringstream o;
    o.precision(digits);
    o << v;
    return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs a criterion, appends its runtime and checks it against `limit`
// (limit <= 0: not timed).
bool report(int id, const std::string& name, double limit, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    std::string timing = num(secs, 3) + " s";
    if (limit > 0) {
        timing += secs < limit ? " < " : " >= ";
        timing += num(limit, 4) + " s";
        if (secs >= limit) o.pass = false;
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << "; " << timing
              << std::endl;
    return o.pass;
}

// ---------------------------------------------------------------------------
// 1. Convolution against the loop nest.

// Extents 1..5, channels 1..3, strides 1..2, kernel and padding drawn so
// the output is non-empty.
ConvGeometry draw_geometry(Rng& rng, std::array<std::size_t, 3>& ext) {
    ConvGeometry g;
    g.in_channels = 1 + rng.below(3);
    g.out_channels = 1 + rng.below(3);
    for (std::size_t a = 0; a < 3; ++a) {
        ext[a] = 1 + rng.below(5);
        g.stride[a] = 1 + rng.below(2);
        g.kernel[a] = 1 + rng.below(3);
        const long p = static_cast<long>(rng.below((g.kernel[a] + 1) / 2 + 1));
        g.pad_lo[a] = g.pad_hi[a] = std::min<long>(p, static_cast<long>(g.kernel[a]) / 2);
        while (static_cast<long>(ext[a]) + 2 * g.pad_lo[a] < static_cast<long>(g.kernel[a])) ++ext[a];
    }
    return g;
}

Outcome conv_oracle() {
    Rng rng(101);
    double worst = 0.0;
    std::size_t outputs = 0;
    for (int t = 0; t < kDraws; ++t) {
        std::array<std::size_t, 3> ext{};
        const ConvGeometry g = draw_geometry(rng, ext);
        const auto x = oracle::random_tensor<float>(Shape{g.in_channels, ext[0], ext[1], ext[2]}, rng);
        const auto w = oracle::random_tensor<float>(g.conv_weight_shape(), rng);
        const auto b = oracle::random_tensor<float>(Shape{g.out_channels}, rng);
        const auto got = conv3d_forward(x, w, b, g);
        const auto want = oracle::naive_conv3d(x, w, b, g);
        if (!(got.shape() == want.shape())) return {false, "shape " + got.shape().to_string() + " != " + want.shape().to_string()};
        for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(double(got[i]) - double(want[i])));
        outputs += got.size();
    }
    return {worst <= kConvTol, "max |diff| " + num(worst) + " (tol " + num(kConvTol) + ") over " +
                                   std::to_string(kDraws) + " draws, " + std::to_string(outputs) + " outputs"};
}

// ---------------------------------------------------------------------------
// 2. Deconvolution is the adjoint of convolution.

template <typename T>
double adjoint_gap(std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < kDraws; ++t) {
        std::array<std::size_t, 3> ext{};
        const ConvGeometry g = draw_geometry(rng, ext);
        const Shape xs{g.in_channels, ext[0], ext[1], ext[2]};
        const auto x = oracle::random_tensor<T>(xs, rng);
        const auto w = oracle::random_tensor<T>(g.conv_weight_shape(), rng);
        const auto cx = conv3d_forward(x, w, zeros<T>(Shape{g.out_channels}), g);
        const auto y = oracle::random_tensor<T>(cx.shape(), rng);
        // Same weights read as [C_in', C_out', k...]; the high side is trimmed
        // by the stride remainder so the deconv lands on x's extents.
        ConvGeometry d = g;
        std::swap(d.in_channels, d.out_channels);
        for (std::size_t a = 0; a < 3; ++a) {
            const long span = static_cast<long>(ext[a]) + g.pad_lo[a] + g.pad_hi[a] - static_cast<long>(g.kernel[a]);
            d.pad_hi[a] = g.pad_hi[a] - span % static_cast<long>(g.stride[a]);
        }
        const auto dy = deconv3d_forward(y, w, zeros<T>(Shape{d.out_channels}), d);
        if (!(dy.shape() == xs)) throw ShapeError("deconv shape " + dy.shape().to_string() + " != " + xs.to_string());
        const double lhs = dot(cx, y), rhs = dot(x, dy);
        const double rel = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        worst = std::max(worst, rel);
    }
    return worst;
}

Outcome adjointness() {
    const double f = adjoint_gap<float>(202), d = adjoint_gap<double>(202);
    return {f <= kAdjointTol && d <= kAdjointTol, "max relative gap f32 " + num(f) + ", f64 " + num(d) + " (tol " +
                                                      num(kAdjointTol) + ") over " + std::to_string(kDraws) +
                                                      " draws each"};
}

// ---------------------------------------------------------------------------
// 3. Gradients against central differences.

// loss = <op(x; W, b), R>; returns the worst relative error over W, b, x.
template <typename T, typename Fwd, typename Bwd>
double linear_op_check(const ConvGeometry& g, const Shape& xs, const Shape& ws, Fwd fwd, Bwd bwd, double h,
                       std::uint64_t seed) {
    Rng rng(seed);
    auto x = oracle::random_tensor<T>(xs, rng);
    auto w = oracle::random_tensor<T>(ws, rng);
    auto b = oracle::random_tensor<T>(Shape{g.out_channels}, rng);
    const auto r = oracle::random_tensor<T>(fwd(x, w, b, g).shape(), rng);
    const auto grads = bwd(x, w, g, r);
    auto loss = [&] { return dot(fwd(x, w, b, g), r); };
    double worst = 0.0;
    worst = std::max(worst, oracle::compare_gradients(oracle::to_vector(grads.d_weights),
                                                      oracle::numeric_gradient(w, loss, h)).max_rel);
    worst = std::max(worst, oracle::compare_gradients(oracle::to_vector(grads.d_bias),
                                                      oracle::numeric_gradient(b, loss, h)).max_rel);
    worst = std::max(worst, oracle::compare_gradients(oracle::to_vector(grads.d_input),
                                                      oracle::numeric_gradient(x, loss, h)).max_rel);
    return worst;
}

// ReLU inputs keep |x| >= 0.05 so no +-h step crosses the kink.
template <typename T>
double relu_check(double h, std::uint64_t seed) {
    Rng rng(seed);
    BasicTensor<T> x(Shape{2, 3, 4, 5});
    for (auto& v : x.values()) {
        const double m = rng.uniform(0.05, 1.0);
        v = static_cast<T>(rng.below(2) ? m : -m);
    }
    const auto r = oracle::random_tensor<T>(x.shape(), rng);
    const auto d = relu_backward(x, r);
    return oracle::compare_gradients(oracle::to_vector(d),
                                     oracle::numeric_gradient(x, [&] { return dot(relu_forward(x), r); }, h))
        .max_rel;
}

template <typename T>
double mse_check(double h, std::uint64_t seed) {
    Rng rng(seed);
    auto p = oracle::random_tensor<T>(Shape{3, 1, 4, 4}, rng);
    const auto t = oracle::random_tensor<T>(p.shape(), rng);
    const auto r = mse_loss(p, t);
    return oracle::compare_gradients(oracle::to_vector(r.d_pred),
                                     oracle::numeric_gradient(p, [&] { return mse_loss(p, t).loss; }, h))
        .max_rel;
}

template <typename T>
struct PrecisionResult {
    double conv = 0, deconv = 0, relu = 0, mse = 0, composite = 0, kink_share = 0;
    bool degenerate = false;
};

template <typename T>
PrecisionResult<T> gradient_suite(double poly_h, double relu_h, double composite_h, std::uint64_t seed0) {
    auto cf = [](const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b, const ConvGeometry& g) {
        return conv3d_forward(x, w, b, g);
    };
    auto cb = [](const BasicTensor<T>& x, const BasicTensor<T>& w, const ConvGeometry& g, const BasicTensor<T>& d) {
        return conv3d_backward(x, w, g, d);
    };
    auto df = [](const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b, const ConvGeometry& g) {
        return deconv3d_forward(x, w, b, g);
    };
    auto db = [](const BasicTensor<T>& x, const BasicTensor<T>& w, const ConvGeometry& g, const BasicTensor<T>& d) {
        return deconv3d_backward(x, w, g, d);
    };
    PrecisionResult<T> r;
    Rng rng(seed0);
    for (int t = 0; t < 3; ++t) {
        std::array<std::size_t, 3> ext{};
        const ConvGeometry g = draw_geometry(rng, ext);
        r.conv = std::max(r.conv, linear_op_check<T>(g, Shape{g.in_channels, ext[0], ext[1], ext[2]},
                                                     g.conv_weight_shape(), cf, cb, poly_h, seed0 + 10 + t));
        ConvGeometry d = g;
        d.pad_lo = d.pad_hi = {0, 0, 0};
        r.deconv = std::max(r.deconv, linear_op_check<T>(d, Shape{d.in_channels, ext[0], ext[1], ext[2]},
                                                         d.deconv_weight_shape(), df, db, poly_h, seed0 + 20 + t));
    }
    // The model's own upsampling layer: in-plane stride 3, kernel 1x3x3.
    ConvGeometry up = ConvGeometry::cubic(2, 2, 3, 3, 0);
    up.kernel = {1, 3, 3};
    up.stride = {1, 3, 3};
    r.deconv = std::max(r.deconv, linear_op_check<T>(up, Shape{2, 1, 3, 3}, up.deconv_weight_shape(), df, db,
                                                     poly_h, seed0 + 30));
    r.relu = relu_check<T>(relu_h, seed0 + 40);
    r.mse = mse_check<T>(poly_h, seed0 + 50);
    std::size_t skipped = 0, total = 0;
    for (std::uint64_t s = 0; s < 3; ++s) {
        const auto c = oracle::composite_gradient_check<T>(composite_h, seed0 + s);
        r.composite = std::max(r.composite, c.max_rel);
        skipped += c.skipped;
        total += c.skipped + c.compared;
        if (c.largest <= 1e-3) r.degenerate = true;
    }
    r.kink_share = total ? double(skipped) / double(total) : 1.0;
    return r;
}

Outcome gradients() {
    const auto f = gradient_suite<float>(kPolyStepF32, kReluStepF32, kGradStepF32, 1);
    const auto d = gradient_suite<double>(kGradStepF64, kGradStepF64, kGradStepF64, 4);
    auto worst = [](const auto& r) { return std::max({r.conv, r.deconv, r.relu, r.mse, r.composite}); };
    const bool pass = worst(f) <= kGradTolF32 && worst(d) <= kGradTolF64 && f.kink_share <= kMaxKinkShare &&
                      d.kink_share <= kMaxKinkShare && !f.degenerate && !d.degenerate;
    auto line = [&](const auto& r) {
        return "conv " + num(r.conv, 2) + ", deconv " + num(r.deconv, 2) + ", relu " + num(r.relu, 2) + ", mse " +
               num(r.mse, 2) + ", composite " + num(r.composite, 2) + " (kink-skipped " +
               num(100 * r.kink_share, 3) + "%)";
    };
    return {pass, "f32 max rel " + num(worst(f), 3) + " (tol " + num(kGradTolF32) + ": " + line(f) + "); f64 max rel " +
                      num(worst(d), 3) + " (tol " + num(kGradTolF64) + ": " + line(d) + ")"};
}

// ---------------------------------------------------------------------------
// 4. Metrics.

Outcome metric_exactness() {
    const std::vector<float> zero(64 * 64, 0.0f), tenth(64 * 64, 0.1f);
    const double p = psnr(zero, tenth, 1.0);
    Rng rng(404);
    std::vector<float> img(64 * 64);
    for (auto& v : img) v = static_cast<float>(rng.uniform(0, 1));
    const double s = ssim(img.data(), img.data(), 64, 64);
    const std::vector<double> d{1, 2, 3}, z{0, 0, 0};
    const auto t = paired_t_test(d, z);
    const double p_oracle = oracle::t_two_sided_by_integration(t.t_statistic, 2);
    const bool pass = std::abs(p - 20.0) <= kPsnrTol && std::abs(s - 1.0) <= kSsimTol &&
                      std::abs(t.t_statistic - 3.4641) <= kTStatTol && std::abs(t.p_value - p_oracle) <= kPValueTol;
    return {pass, "PSNR " + num(p, 12) + " dB (want 20 +- " + num(kPsnrTol) + "), SSIM(a,a) " + num(s, 17) +
                      ", t " + num(t.t_statistic, 8) + " (want 3.4641 +- " + num(kTStatTol) + "), p " +
                      num(t.p_value, 8) + " vs integration " + num(p_oracle, 8)};
}

// ---------------------------------------------------------------------------
// 5-7. Desk-scale pipeline.

std::string scan_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scan_%03zu", i);
    return buf;
}

ModelConfig final_config() {
    ModelConfig cfg;  // n=5, l=3, f=64,64,32,32,1, k=3, r=3, lr 1e-3, 30 epochs, batch 16
    cfg.patch_hw = 6;
    return cfg;
}

struct PipelineRun {
    fs::path checkpoint;
    fs::path metrics;
    cli::EvaluateOutcome eval;
};

// synth -> simulate -> train on 8 -> infer -> evaluate on the other 4.
PipelineRun run_pipeline(const fs::path& root) {
    std::ostringstream sink;
    fs::create_directories(root);
    cli::SynthOptions so;
    so.out_dir = root / "hr";
    so.count = kVolumes;
    so.depth = kDepth;
    so.height = so.width = kSide;
    so.seed = kDataSeed;
    cli::cmd_synth(so, sink);

    cli::SimulateOptions sim{root / "hr", root / "lr", kScale};
    cli::cmd_simulate(sim, sink);

    cli::RunConfig rc;
    rc.model = final_config();
    rc.manifest = root / "lr" / "manifest.csv";
    for (std::size_t i = 0; i < kTrainVolumes; ++i) rc.train_scans.push_back(scan_id(i));
    rc.out_dir = root / "train";
    const auto trained = cli::cmd_train(rc, sink, std::cerr);

    cli::InferCommand inf;
    inf.checkpoint = trained.checkpoint;
    inf.manifest = rc.manifest;
    inf.out = root / "sr";
    cli::cmd_infer(inf, sink);

    cli::EvaluateOptions ev;
    ev.manifest = rc.manifest;
    for (std::size_t i = kTrainVolumes; i < kVolumes; ++i) ev.scans.push_back(scan_id(i));
    ev.methods = {"3decnn=" + (root / "sr").string()};
    ev.bicubic = true;
    ev.out_dir = root / "eval";
    PipelineRun run;
    run.eval = cli::cmd_evaluate(ev, sink);
    run.checkpoint = trained.checkpoint;
    run.metrics = ev.out_dir / "metrics.csv";
    return run;
}

std::optional<PipelineRun> first_run;

Outcome end_to_end(const fs::path& work) {
    first_run = run_pipeline(work / "run1");
    const auto& ev = first_run->eval;
    std::vector<SliceSample> sr, bic;
    for (const auto& s : ev.samples) (s.method == "bicubic" ? bic : sr).push_back(s);
    const Aggregate a_sr = aggregate(sr), a_bic = aggregate(bic);
    const TTestRow* row = nullptr;
    for (const auto& t : ev.tests)
        if (t.metric == "psnr" && t.method_a == "3decnn" && t.method_b == "bicubic") row = &t;
    if (!row) return {false, "no PSNR t-test row for 3decnn vs bicubic"};
    const auto& r = row->result;
    const bool pass = a_sr.psnr.mean > a_bic.psnr.mean && r.p_value < kAlpha && r.mean_diff >= kMinGainDb;
    return {pass, "3DECNN " + num(a_sr.psnr.mean, 6) + " dB vs bicubic " + num(a_bic.psnr.mean, 6) +
                      " dB over " + std::to_string(r.degrees_of_freedom + 1) + " slices; mean gain " +
                      num(r.mean_diff, 4) + " dB (need >= " + num(kMinGainDb) + "), t " + num(r.t_statistic, 4) +
                      ", p " + num(r.p_value, 4) + " (need < " + num(kAlpha) + "); SSIM " + num(a_sr.ssim.mean, 4) +
                      " vs " + num(a_bic.ssim.mean, 4)};
}

Outcome determinism(const fs::path& work) {
    if (!first_run) return {false, "criterion 5 produced no first run"};
    const auto second = run_pipeline(work / "run2");
    const bool ckpt = read_file(first_run->checkpoint) == read_file(second.checkpoint);
    const bool metrics = read_file(first_run->metrics) == read_file(second.metrics);
    return {ckpt && metrics, std::string("checkpoint ") + (ckpt ? "byte-identical" : "DIFFERS") + ", metrics.csv " +
                                 (metrics ? "byte-identical" : "DIFFERS") + " on rerun with the same seeds"};
}

Outcome grid_direction(const fs::path& work) {
    const fs::path root = work / "grid";
    std::ostringstream sink;
    cli::SynthOptions so;
    so.out_dir = root / "hr";
    so.count = kVolumes;
    so.depth = kDepth;
    so.height = so.width = kSide;
    so.seed = kDataSeed;
    cli::cmd_synth(so, sink);
    cli::cmd_simulate({root / "hr", root / "lr", kScale}, sink);

    cli::RunConfig rc;
    rc.model = final_config();
    rc.manifest = root / "lr" / "manifest.csv";
    // Validation comes from the training volumes; the test volumes stay unseen.
    for (std::size_t i = 0; i < 6; ++i) rc.train_scans.push_back(scan_id(i));
    for (std::size_t i = 6; i < kTrainVolumes; ++i) rc.val_scans.push_back(scan_id(i));
    rc.out_dir = root / "out";
    const std::vector<std::size_t> small{16, 16, 16, 32, 1}, large{64, 64, 32, 32, 1};
    rc.grid.feature_depth = {rc.model.feature_depth};
    rc.grid.conv_layers = {rc.model.conv_layers};
    rc.grid.kernel = {rc.model.kernel};
    rc.grid.filters = {small, large};
    const auto results = cli::cmd_gridsearch(rc, sink, std::cerr);
    const GridResult *rs = nullptr, *rl = nullptr;
    for (const auto& r : results) {
        if (r.cfg.filters == small) rs = &r;
        if (r.cfg.filters == large) rl = &r;
    }
    if (!rs || !rl) return {false, "grid results missing a configuration"};
    if (!rs->ok || !rl->ok) return {false, "grid run failed: " + rs->error + " " + rl->error};
    const bool pass = rl->val_psnr >= rs->val_psnr;
    return {pass, "f=64,64,32,32,1 val " + num(rl->val_psnr, 6) + " dB (rank " + std::to_string(rl->rank) +
                      ") vs f=16,16,16,32,1 val " + num(rs->val_psnr, 6) + " dB (rank " + std::to_string(rs->rank) +
                      "), " + std::to_string(grid_epochs(rc.model, rc.grid_fraction)) + " epochs each"};
}

// ---------------------------------------------------------------------------
// 8. Format round trips.

float random_finite(Rng& rng) {
    // Any finite bit pattern, including subnormals and -0.
    for (;;) {
        const auto bits = static_cast<std::uint32_t>(rng.next_u64());
        const float f = std::bit_cast<float>(bits);
        if (std::isfinite(f)) return f;
    }
}

Outcome format_round_trips(const fs::path& work) {
    const fs::path dir = work / "formats";
    fs::create_directories(dir);
    Rng rng(808);
    for (int t = 0; t < kRoundTrips; ++t) {
        const Shape s{1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(6)};
        Tensor data(s);
        for (auto& v : data.values()) v = random_finite(rng);
        const Volume v(std::move(data), Spacing{rng.uniform(0.01, 10), rng.uniform(0.01, 10), rng.uniform(0.01, 10)});
        const fs::path vp = dir / "v.svol";
        save_volume(v, vp);
        const std::string bytes = read_file(vp);
        const Volume back = load_volume(vp);
        if (encode_volume(back) != bytes || !(back.spacing == v.spacing)) {
            return {false, ".svol trial " + std::to_string(t) + " not bit-exact"};
        }
        for (std::size_t i = 0; i < v.data.size(); ++i) {
            if (std::bit_cast<std::uint32_t>(back.data[i]) != std::bit_cast<std::uint32_t>(v.data[i])) {
                return {false, ".svol trial " + std::to_string(t) + " voxel " + std::to_string(i) + " changed"};
            }
        }

        ModelConfig cfg;
        cfg.feature_depth = 1 + 2 * rng.below(3);
        cfg.conv_layers = 1 + rng.below(2);
        cfg.filters.clear();
        for (std::size_t i = 0; i < cfg.conv_layers + 1; ++i) cfg.filters.push_back(1 + rng.below(4));
        cfg.filters.push_back(1);
        cfg.kernel = 1 + 2 * rng.below(2);
        cfg.scale = 2 + rng.below(3);
        cfg.lr = rng.uniform(1e-6, 1.0);
        cfg.seed = rng.next_u64();
        cfg.epochs = 1 + rng.below(100);
        cfg.batch_size = 1 + rng.below(64);
        cfg.patch_hw = 1 + rng.below(64);
        Rng init(rng.next_u64());
        ModelParams params = build_model(cfg, init);
        for (auto& l : params.layers) {
            for (auto& w : l.weights.values()) w = random_finite(rng);
            for (auto& b : l.bias.values()) b = random_finite(rng);
        }
        const fs::path cp = dir / "c.bin";
        save_checkpoint(cp, cfg, params);
        const std::string cbytes = read_file(cp);
        const Checkpoint ck = load_checkpoint(cp);
        if (!(ck.cfg == cfg) || encode_checkpoint(ck.cfg, ck.params) != cbytes) {
            return {false, "checkpoint trial " + std::to_string(t) + " not bit-exact"};
        }
    }
    return {true, std::to_string(kRoundTrips) + " .svol and " + std::to_string(kRoundTrips) +
                      " checkpoint save/load round trips bit-exact"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::string work_arg;
    bool keep = false;
    std::vector<int> only;
    app.add_option("--work", work_arg, "Scratch directory (default: a fresh one under the temp directory)");
    app.add_flag("--keep", keep, "Keep the scratch directory");
    app.add_option("--only", only, "Run only these criteria (7 implies 5)")->delimiter(',')->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const fs::path work = work_arg.empty()
                              ? fs::temp_directory_path() / ("ecnn_acceptance_" + std::to_string(::getpid()))
                              : fs::path(work_arg);
    fs::remove_all(work);
    fs::create_directories(work);
    std::set<int> run(only.begin(), only.end());
    if (run.empty()) run = {1, 2, 3, 4, 5, 6, 7, 8};
    if (run.count(7)) run.insert(5);

    std::cout << "scratch: " << work.string() << std::endl;
    int failed = 0;
    auto go = [&](int id, const char* name, double limit, const std::function<Outcome()>& body) {
        if (run.count(id) && !report(id, name, limit, body)) ++failed;
    };
    go(1, "conv oracle", kLimitConv, conv_oracle);
    go(2, "adjointness", kLimitAdjoint, adjointness);
    go(3, "gradient checks", kLimitGrad, gradients);
    go(4, "metric exactness", kLimitMetrics, metric_exactness);
    go(8, "format round trips", kLimitFormats, [&] { return format_round_trips(work); });
    go(5, "desk-scale end-to-end", kLimitEndToEnd, [&] { return end_to_end(work); });
    go(7, "determinism", 0, [&] { return determinism(work); });
    go(6, "filter-config direction", kLimitGrid, [&] { return grid_direction(work); });

    if (!keep) fs::remove_all(work);
    std::cout << run.size() - failed << " of " << run.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
