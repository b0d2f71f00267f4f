#include "ecnn/nn_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "gemm.hpp"

namespace ecnn {

// ---------------------------------------------------------------------------
// ConvGeometry

ConvGeometry ConvGeometry::cubic(std::size_t in_channels, std::size_t out_channels, std::size_t k,
                                 std::size_t s, long pad) {
    ConvGeometry g;
    g.in_channels = in_channels;
    g.out_channels = out_channels;
    g.kernel = {k, k, k};
    g.stride = {s, s, s};
    g.pad_lo = {pad, pad, pad};
    g.pad_hi = {pad, pad, pad};
    return g;
}

void ConvGeometry::validate() const {
    if (in_channels == 0 || out_channels == 0) {
        throw ShapeError("conv geometry needs >= 1 channel: " + to_string());
    }
    for (std::size_t a = 0; a < 3; ++a) {
        if (kernel[a] == 0 || stride[a] == 0) {
            throw ShapeError("conv geometry needs kernel, stride >= 1: " + to_string());
        }
    }
}

std::size_t ConvGeometry::conv_extent(std::size_t axis, std::size_t in) const {
    const long span = static_cast<long>(in) + pad_lo[axis] + pad_hi[axis] - static_cast<long>(kernel[axis]);
    if (span < 0) {
        throw ShapeError("conv output extent < 1 on axis " + std::to_string(axis) + " (input " +
                         std::to_string(in) + ", " + to_string() + ")");
    }
    return static_cast<std::size_t>(span) / stride[axis] + 1;
}

std::size_t ConvGeometry::deconv_extent(std::size_t axis, std::size_t in) const {
    const long out = (static_cast<long>(in) - 1) * static_cast<long>(stride[axis]) +
                     static_cast<long>(kernel[axis]) - pad_lo[axis] - pad_hi[axis];
    if (out < 1) {
        throw ShapeError("deconv output extent < 1 on axis " + std::to_string(axis) + " (input " +
                         std::to_string(in) + ", " + to_string() + ")");
    }
    return static_cast<std::size_t>(out);
}

Shape ConvGeometry::conv_weight_shape() const {
    return Shape{out_channels, in_channels, kernel[0], kernel[1], kernel[2]};
}

Shape ConvGeometry::deconv_weight_shape() const {
    return Shape{in_channels, out_channels, kernel[0], kernel[1], kernel[2]};
}

std::string ConvGeometry::to_string() const {
    std::ostringstream os;
    os << "{C " << in_channels << "->" << out_channels << ", k " << kernel[0] << 'x' << kernel[1]
       << 'x' << kernel[2] << ", s " << stride[0] << 'x' << stride[1] << 'x' << stride[2]
       << ", pad lo " << pad_lo[0] << ',' << pad_lo[1] << ',' << pad_lo[2] << " hi " << pad_hi[0]
       << ',' << pad_hi[1] << ',' << pad_hi[2] << '}';
    return os.str();
}

namespace {

using Extents = std::array<std::size_t, 3>;

// Half-open range of grid positions o for which o*stride + offset lies in
// [0, extent).
struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
};

Range valid_range(std::size_t grid, std::size_t extent, std::size_t stride, long offset) {
    const long s = static_cast<long>(stride);
    // Smallest o with o*s + offset >= 0.
    long lo = offset >= 0 ? 0 : (-offset + s - 1) / s;
    // Largest o with o*s + offset <= extent - 1.
    const long top = static_cast<long>(extent) - 1 - offset;
    long hi = top < 0 ? -1 : top / s;
    hi = std::min(hi, static_cast<long>(grid) - 1);
    if (hi < lo) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi) + 1};
}

std::size_t volume_of(const Extents& e) { return e[0] * e[1] * e[2]; }

// View of a per-thread buffer; valid until its slot is requested again.
struct Buf {
    double* ptr;
    std::size_t n;
    double* data() const { return ptr; }
    std::size_t size() const { return n; }
    double& operator[](std::size_t i) const { return ptr[i]; }
};

enum Slot { kCol, kAcc, kImg, kLayout, kWeights, kSlots };

Buf scratch(Slot slot, std::size_t n, bool zero) {
    thread_local std::array<std::vector<double>, kSlots> pool;
    auto& v = pool[slot];
    if (v.size() < n) v.resize(n);
    if (zero) std::fill_n(v.data(), n, 0.0);
    return {v.data(), n};
}

template <typename T>
Buf widen(const BasicTensor<T>& t) {
    const Buf out = scratch(kWeights, t.size(), false);
    std::copy(t.values().begin(), t.values().end(), out.data());
    return out;
}

// Lattice pairing for both passes: grid position q and kernel tap t meet at
// image position q * stride + t - pad_lo. For a conv the image is the input
// and the grid the output; for a deconv the roles swap.
struct Lattice {
    const ConvGeometry& g;
    Extents image;
    Extents grid;
    // Per axis and tap: the offset t - lo and the grid positions it reaches.
    std::array<std::vector<long>, 3> offset;
    std::array<std::vector<Range>, 3> range;

    Lattice(const ConvGeometry& geom, const Extents& image_ext, const Extents& grid_ext)
        : g(geom), image(image_ext), grid(grid_ext) {
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t t = 0; t < g.kernel[a]; ++t) {
                offset[a].push_back(static_cast<long>(t) - g.pad_lo[a]);
                range[a].push_back(valid_range(grid[a], image[a], g.stride[a], offset[a].back()));
            }
        }
    }

    std::size_t taps() const { return g.kernel[0] * g.kernel[1] * g.kernel[2]; }
};

// col[(c, i, j, k) * ld + q] = img[c][q * s + (i, j, k) - lo]. Entries outside
// the image are left untouched, so col must arrive zeroed.
template <typename T>
void im2col(const T* img, std::size_t channels, const Lattice& L, double* col, std::size_t ld) {
    const ConvGeometry& g = L.g;
    const std::size_t ivol = volume_of(L.image);
    double* out = col;
    for (std::size_t c = 0; c < channels; ++c) {
        const T* src = img + c * ivol;
        for (std::size_t i = 0; i < g.kernel[0]; ++i) {
            const long off_d = L.offset[0][i];
            const Range& rd = L.range[0][i];
            for (std::size_t j = 0; j < g.kernel[1]; ++j) {
                const long off_h = L.offset[1][j];
                const Range& rh = L.range[1][j];
                for (std::size_t k = 0; k < g.kernel[2]; ++k, out += ld) {
                    const long off_w = L.offset[2][k];
                    const Range& rw = L.range[2][k];
                    const long sw = static_cast<long>(g.stride[2]);
                    for (std::size_t od = rd.begin; od < rd.end; ++od) {
                        const long id = static_cast<long>(od * g.stride[0]) + off_d;
                        for (std::size_t oh = rh.begin; oh < rh.end; ++oh) {
                            const long ih = static_cast<long>(oh * g.stride[1]) + off_h;
                            const T* row = src + (static_cast<std::size_t>(id) * L.image[1] +
                                                  static_cast<std::size_t>(ih)) * L.image[2];
                            double* dst = out + (od * L.grid[1] + oh) * L.grid[2];
                            for (std::size_t ow = rw.begin; ow < rw.end; ++ow) {
                                dst[ow] = static_cast<double>(row[static_cast<long>(ow) * sw + off_w]);
                            }
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: img[c][q * s + (i, j, k) - lo] += col[(c, i, j, k) * ld + q].
// For one image voxel the contributions arrive in ascending tap order.
void col2im(const double* col, std::size_t ld, std::size_t channels, const Lattice& L, double* img) {
    const ConvGeometry& g = L.g;
    const std::size_t ivol = volume_of(L.image);
    const double* in = col;
    for (std::size_t c = 0; c < channels; ++c) {
        double* dst = img + c * ivol;
        for (std::size_t i = 0; i < g.kernel[0]; ++i) {
            const long off_d = L.offset[0][i];
            const Range& rd = L.range[0][i];
            for (std::size_t j = 0; j < g.kernel[1]; ++j) {
                const long off_h = L.offset[1][j];
                const Range& rh = L.range[1][j];
                for (std::size_t k = 0; k < g.kernel[2]; ++k, in += ld) {
                    const long off_w = L.offset[2][k];
                    const Range& rw = L.range[2][k];
                    const long sw = static_cast<long>(g.stride[2]);
                    for (std::size_t od = rd.begin; od < rd.end; ++od) {
                        const long id = static_cast<long>(od * g.stride[0]) + off_d;
                        for (std::size_t oh = rh.begin; oh < rh.end; ++oh) {
                            const long ih = static_cast<long>(oh * g.stride[1]) + off_h;
                            double* row = dst + (static_cast<std::size_t>(id) * L.image[1] +
                                                 static_cast<std::size_t>(ih)) * L.image[2];
                            const double* src = in + (od * L.grid[1] + oh) * L.grid[2];
                            for (std::size_t ow = rw.begin; ow < rw.end; ++ow) {
                                row[static_cast<long>(ow) * sw + off_w] += src[ow];
                            }
                        }
                    }
                }
            }
        }
    }
}

detail::MatView rows_of(const Buf& m, std::size_t cols) {
    return {m.data(), static_cast<std::ptrdiff_t>(cols), 1};
}

detail::MatView transposed(const Buf& m, std::size_t cols) {
    return {m.data(), 1, static_cast<std::ptrdiff_t>(cols)};
}

// An activation [C,D,H,W] is a batch of one; [B,C,D,H,W] is a batch of B.
struct Batch {
    bool stacked = false;
    std::size_t size = 1;
    std::size_t channels = 0;
    Extents ext{};

    Shape shape(std::size_t c, const Extents& e) const {
        return stacked ? Shape{size, c, e[0], e[1], e[2]} : Shape{c, e[0], e[1], e[2]};
    }
};

// Sample-major [B][C][Q] to channel-major [C][B * Q].
template <typename T>
Buf channel_major(const T* x, const Batch& b, std::size_t channels, std::size_t q) {
    const std::size_t bq = b.size * q;
    const Buf out = scratch(kLayout, channels * bq, false);
    for (std::size_t s = 0; s < b.size; ++s)
        for (std::size_t c = 0; c < channels; ++c) {
            const T* src = x + (s * channels + c) * q;
            double* dst = out.data() + c * bq + s * q;
            for (std::size_t i = 0; i < q; ++i) dst[i] = static_cast<double>(src[i]);
        }
    return out;
}

// Channel-major [C][B * Q] back to [B][C][Q], adding bias[c] before rounding.
template <typename T>
BasicTensor<T> sample_major(const Buf& acc, const Shape& shape, const Batch& b,
                            std::size_t channels, std::size_t q, const BasicTensor<T>* bias) {
    BasicTensor<T> out(shape);
    const std::size_t bq = b.size * q;
    for (std::size_t s = 0; s < b.size; ++s)
        for (std::size_t c = 0; c < channels; ++c) {
            const double bc = bias ? static_cast<double>((*bias)[c]) : 0.0;
            const double* src = acc.data() + c * bq + s * q;
            T* dst = out.data() + (s * channels + c) * q;
            for (std::size_t i = 0; i < q; ++i) dst[i] = static_cast<T>(src[i] + bc);
        }
    return out;
}

// Rounds a [B][C][V] buffer to T, adding bias[c] first when given.
template <typename T>
BasicTensor<T> narrow(const Buf& acc, const Shape& shape, std::size_t samples,
                      std::size_t channels, const BasicTensor<T>* bias) {
    BasicTensor<T> out(shape);
    const std::size_t vol = acc.size() / (samples * channels);
    T* dst = out.data();
    for (std::size_t s = 0; s < samples; ++s)
        for (std::size_t c = 0; c < channels; ++c) {
            const double bc = bias ? static_cast<double>((*bias)[c]) : 0.0;
            const std::size_t base = (s * channels + c) * vol;
            for (std::size_t i = base; i < base + vol; ++i) dst[i] = static_cast<T>(acc[i] + bc);
        }
    return out;
}

// Per channel: samples ascending, then voxels.
template <typename T>
BasicTensor<T> channel_sums(const T* d, const Batch& b, std::size_t channels, std::size_t vol) {
    BasicTensor<T> out(Shape{channels});
    for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < b.size; ++s) {
            const T* p = d + (s * channels + c) * vol;
            for (std::size_t i = 0; i < vol; ++i) acc += static_cast<double>(p[i]);
        }
        out[c] = static_cast<T>(acc);
    }
    return out;
}

// Message is built only on failure.
template <typename Msg>
void require(bool ok, Msg&& msg) {
    if (!ok) throw ShapeError(msg());
}

template <typename T>
Batch batch_of(const BasicTensor<T>& t, std::size_t channels, const char* what, const ConvGeometry& g) {
    const Shape& s = t.shape();
    require(s.rank() == 4 || s.rank() == 5, [&] {
        return std::string(what) + " must be [C,D,H,W] or [B,C,D,H,W], got " + s.to_string();
    });
    Batch b;
    b.stacked = s.rank() == 5;
    const std::size_t o = b.stacked ? 1 : 0;
    b.size = b.stacked ? s[0] : 1;
    b.channels = s[o];
    b.ext = {s[o + 1], s[o + 2], s[o + 3]};
    require(b.channels == channels, [&] {
        return std::string(what) + " has " + std::to_string(b.channels) + " channels, geometry " +
               g.to_string() + " expects " + std::to_string(channels);
    });
    return b;
}

template <typename T>
void check_params(const BasicTensor<T>& weights, const Shape& expected, const char* op) {
    require(weights.shape() == expected, [&] {
        return std::string(op) + ": weight shape " + weights.shape().to_string() + " != " +
               expected.to_string();
    });
}

template <typename T>
void check_bias(const BasicTensor<T>& bias, std::size_t channels, const char* op) {
    require(bias.shape() == Shape{channels}, [&] {
        return std::string(op) + ": bias shape " + bias.shape().to_string() + " != [" +
               std::to_string(channels) + "]";
    });
}

template <typename T>
void check_d_output(const BasicTensor<T>& d_output, const Shape& expected, const char* op) {
    require(d_output.shape() == expected, [&] {
        return std::string(op) + ": d_output shape " + d_output.shape().to_string() + " != " +
               expected.to_string();
    });
}

Extents conv_out_extents(const Extents& in, const ConvGeometry& g) {
    return {g.conv_extent(0, in[0]), g.conv_extent(1, in[1]), g.conv_extent(2, in[2])};
}

Extents deconv_out_extents(const Extents& in, const ConvGeometry& g) {
    return {g.deconv_extent(0, in[0]), g.deconv_extent(1, in[1]), g.deconv_extent(2, in[2])};
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution
//
// Samples of a batch sit side by side along the GEMM's column axis, so every
// output element sees the same fma chain as it would alone.

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, const ConvGeometry& geom) {
    geom.validate();
    const Batch b = batch_of(input, geom.in_channels, "conv3d input", geom);
    check_params(weights, geom.conv_weight_shape(), "conv3d_forward");
    check_bias(bias, geom.out_channels, "conv3d_forward");
    const Lattice L(geom, b.ext, conv_out_extents(b.ext, geom));
    const std::size_t Q = volume_of(L.grid), BQ = b.size * Q;
    const std::size_t K = geom.in_channels * L.taps();
    const std::size_t in_vol = geom.in_channels * volume_of(L.image);
    const Buf col = scratch(kCol, K * BQ, true);
    for (std::size_t s = 0; s < b.size; ++s) {
        im2col(input.data() + s * in_vol, geom.in_channels, L, col.data() + s * Q, BQ);
    }
    const auto w = widen(weights);
    const Buf acc = scratch(kAcc, geom.out_channels * BQ, true);
    detail::gemm_acc(geom.out_channels, BQ, K, rows_of(w, K), rows_of(col, BQ), acc.data(), BQ);
    auto out = sample_major(acc, b.shape(geom.out_channels, L.grid), b, geom.out_channels, Q, &bias);
    ensure_finite(out, "conv3d_forward");
    return out;
}

template <typename T>
LayerGrads<T> conv3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const ConvGeometry& geom, const BasicTensor<T>& d_output,
                              bool need_input_grad) {
    geom.validate();
    const Batch b = batch_of(input, geom.in_channels, "conv3d input", geom);
    check_params(weights, geom.conv_weight_shape(), "conv3d_backward");
    const Lattice L(geom, b.ext, conv_out_extents(b.ext, geom));
    check_d_output(d_output, b.shape(geom.out_channels, L.grid), "conv3d_backward");
    const std::size_t Q = volume_of(L.grid), BQ = b.size * Q;
    const std::size_t K = geom.in_channels * L.taps();
    const std::size_t Co = geom.out_channels;
    const std::size_t in_vol = geom.in_channels * volume_of(L.image);
    const auto dy = channel_major(d_output.data(), b, Co, Q);

    LayerGrads<T> g;
    {
        const Buf col = scratch(kCol, K * BQ, true);
        for (std::size_t s = 0; s < b.size; ++s) {
            im2col(input.data() + s * in_vol, geom.in_channels, L, col.data() + s * Q, BQ);
        }
        const Buf dw = scratch(kAcc, Co * K, true);
        detail::gemm_acc(Co, K, BQ, rows_of(dy, BQ), transposed(col, BQ), dw.data(), K);
        g.d_weights = narrow<T>(dw, weights.shape(), 1, 1, nullptr);
    }
    g.d_bias = channel_sums(d_output.data(), b, Co, Q);
    if (need_input_grad) {
        const auto w = widen(weights);
        const Buf dcol = scratch(kCol, K * BQ, true);
        detail::gemm_acc(K, BQ, Co, transposed(w, K), rows_of(dy, BQ), dcol.data(), BQ);
        const Buf img = scratch(kImg, b.size * in_vol, true);
        for (std::size_t s = 0; s < b.size; ++s) {
            col2im(dcol.data() + s * Q, BQ, geom.in_channels, L, img.data() + s * in_vol);
        }
        g.d_input = narrow<T>(img, input.shape(), 1, 1, nullptr);
        ensure_finite(g.d_input, "conv3d_backward d_input");
    }
    ensure_finite(g.d_weights, "conv3d_backward d_weights");
    ensure_finite(g.d_bias, "conv3d_backward d_bias");
    return g;
}

// ---------------------------------------------------------------------------
// Transposed convolution

template <typename T>
BasicTensor<T> deconv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                const BasicTensor<T>& bias, const ConvGeometry& geom) {
    geom.validate();
    const Batch b = batch_of(input, geom.in_channels, "deconv3d input", geom);
    check_params(weights, geom.deconv_weight_shape(), "deconv3d_forward");
    check_bias(bias, geom.out_channels, "deconv3d_forward");
    const Lattice L(geom, deconv_out_extents(b.ext, geom), b.ext);
    const std::size_t Q = volume_of(L.grid), BQ = b.size * Q;
    const std::size_t M = geom.out_channels * L.taps();
    const std::size_t out_vol = geom.out_channels * volume_of(L.image);
    const auto w = widen(weights);
    const auto x = channel_major(input.data(), b, geom.in_channels, Q);
    const Buf col = scratch(kCol, M * BQ, true);
    detail::gemm_acc(M, BQ, geom.in_channels, transposed(w, M), rows_of(x, BQ), col.data(), BQ);
    const Buf img = scratch(kImg, b.size * out_vol, true);
    for (std::size_t s = 0; s < b.size; ++s) {
        col2im(col.data() + s * Q, BQ, geom.out_channels, L, img.data() + s * out_vol);
    }
    auto out = narrow(img, b.shape(geom.out_channels, L.image), b.size, geom.out_channels, &bias);
    ensure_finite(out, "deconv3d_forward");
    return out;
}

template <typename T>
LayerGrads<T> deconv3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                const ConvGeometry& geom, const BasicTensor<T>& d_output,
                                bool need_input_grad) {
    geom.validate();
    const Batch b = batch_of(input, geom.in_channels, "deconv3d input", geom);
    check_params(weights, geom.deconv_weight_shape(), "deconv3d_backward");
    const Lattice L(geom, deconv_out_extents(b.ext, geom), b.ext);
    check_d_output(d_output, b.shape(geom.out_channels, L.image), "deconv3d_backward");
    const std::size_t Q = volume_of(L.grid), BQ = b.size * Q;
    const std::size_t M = geom.out_channels * L.taps();
    const std::size_t Ci = geom.in_channels;
    const std::size_t out_vol = geom.out_channels * volume_of(L.image);
    const Buf dcol = scratch(kCol, M * BQ, true);
    for (std::size_t s = 0; s < b.size; ++s) {
        im2col(d_output.data() + s * out_vol, geom.out_channels, L, dcol.data() + s * Q, BQ);
    }

    LayerGrads<T> g;
    {
        const auto x = channel_major(input.data(), b, Ci, Q);
        const Buf dw = scratch(kAcc, Ci * M, true);
        detail::gemm_acc(Ci, M, BQ, rows_of(x, BQ), transposed(dcol, BQ), dw.data(), M);
        g.d_weights = narrow<T>(dw, weights.shape(), 1, 1, nullptr);
    }
    g.d_bias = channel_sums(d_output.data(), b, geom.out_channels, volume_of(L.image));
    if (need_input_grad) {
        const auto w = widen(weights);
        const Buf dx = scratch(kAcc, Ci * BQ, true);
        detail::gemm_acc(Ci, BQ, M, rows_of(w, M), rows_of(dcol, BQ), dx.data(), BQ);
        g.d_input = sample_major<T>(dx, input.shape(), b, Ci, Q, nullptr);
        ensure_finite(g.d_input, "deconv3d_backward d_input");
    }
    ensure_finite(g.d_weights, "deconv3d_backward d_weights");
    ensure_finite(g.d_bias, "deconv3d_backward d_bias");
    return g;
}

// ---------------------------------------------------------------------------
// Activation and loss

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
    BasicTensor<T> out(x.shape());
    const auto in = x.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > T{0} ? in[i] : T{0};
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& d_out) {
    if (!(x.shape() == d_out.shape())) {
        throw ShapeError("relu_backward shape mismatch: " + x.shape().to_string() + " vs " +
                         d_out.shape().to_string());
    }
    BasicTensor<T> out(x.shape());
    const auto in = x.values();
    const auto g = d_out.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > T{0} ? g[i] : T{0};
    return out;
}

template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, std::size_t samples) {
    if (!(pred.shape() == target.shape())) {
        throw ShapeError("mse_loss shape mismatch: " + pred.shape().to_string() + " vs " +
                         target.shape().to_string());
    }
    if (samples == 0) {
        throw ShapeError("mse_loss needs at least one sample");
    }
    const double inv_m = 1.0 / static_cast<double>(samples);
    LossResult<T> r;
    r.d_pred = BasicTensor<T>(pred.shape());
    const auto p = pred.values();
    const auto t = target.values();
    auto d = r.d_pred.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double e = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        acc += e * e;
        d[i] = static_cast<T>(2.0 * inv_m * e);
    }
    r.loss = acc * inv_m;
    if (!std::isfinite(r.loss)) {
        throw NumericError("mse_loss: non-finite loss");
    }
    return r;
}

template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
    if (pred.shape().rank() == 0) {
        throw ShapeError("mse_loss of empty tensor");
    }
    return mse_loss(pred, target, pred.extent(0));
}

#define ECNN_INSTANTIATE(T)                                                                          \
    template BasicTensor<T> conv3d_forward(const BasicTensor<T>&, const BasicTensor<T>&,             \
                                           const BasicTensor<T>&, const ConvGeometry&);              \
    template LayerGrads<T> conv3d_backward(const BasicTensor<T>&, const BasicTensor<T>&,             \
                                           const ConvGeometry&, const BasicTensor<T>&, bool);        \
    template BasicTensor<T> deconv3d_forward(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                             const BasicTensor<T>&, const ConvGeometry&);            \
    template LayerGrads<T> deconv3d_backward(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                             const ConvGeometry&, const BasicTensor<T>&, bool);      \
    template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                     \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);             \
    template LossResult<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t);      \
    template LossResult<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);

ECNN_INSTANTIATE(float)
ECNN_INSTANTIATE(double)

#undef ECNN_INSTANTIATE

}  // namespace ecnn
