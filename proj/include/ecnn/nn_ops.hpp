#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>

#include "ecnn/tensor.hpp"

namespace ecnn {

/// Geometry of a 3D convolution or transposed convolution.
///
/// Axes are ordered (depth, height, width). Padding is stored per side and
/// is signed: a negative pad trims (conv) or extends (deconv) the window. The
/// model builder relies on this to make a deconvolution land exactly on
/// in * stride when (kernel - stride) is odd or negative; every other
/// caller uses symmetric non-negative padding.
///
/// Conv output extent per axis:   floor((in + lo + hi - k) / s) + 1
/// Deconv output extent per axis: (in - 1) * s + k - lo - hi
struct ConvGeometry {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::array<std::size_t, 3> kernel{1, 1, 1};
    std::array<std::size_t, 3> stride{1, 1, 1};
    std::array<long, 3> pad_lo{0, 0, 0};
    std::array<long, 3> pad_hi{0, 0, 0};

    /// Cubic kernel, isotropic stride, symmetric padding.
    static ConvGeometry cubic(std::size_t in_channels, std::size_t out_channels, std::size_t k,
                              std::size_t s = 1, long pad = 0);

    /// Throws ShapeError on zero kernel/stride/channel counts.
    void validate() const;

    std::size_t conv_extent(std::size_t axis, std::size_t in) const;
    std::size_t deconv_extent(std::size_t axis, std::size_t in) const;

    /// Weight shape [C_out, C_in, k1, k2, k3] used by conv3d.
    Shape conv_weight_shape() const;
    /// Weight shape [C_in, C_out, k1, k2, k3] used by deconv3d.
    Shape deconv_weight_shape() const;

    std::string to_string() const;

    friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

template <typename T>
struct LayerGrads {
    BasicTensor<T> d_weights;
    BasicTensor<T> d_bias;
    /// Left empty when the caller asked to skip the input gradient.
    BasicTensor<T> d_input;
};

/// Activations are [C,D,H,W], or [B,C,D,H,W] for a batch of B samples that
/// are processed independently; weight and bias gradients of a batch are
/// summed over its samples.
///
/// out[co][n][h][w] = bias[co] + sum_{ci,i,j,k} W[co][ci][i][j][k] *
///                    In[ci][s*n+i-lo][s*h+j-lo][s*w+k-lo], zero outside bounds.
///
/// Per output element the products are accumulated in double, in (ci, i, j, k)
/// ascending order, then the bias is added and the sum rounded to T.
template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, const ConvGeometry& geom);

template <typename T>
LayerGrads<T> conv3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const ConvGeometry& geom, const BasicTensor<T>& d_output,
                              bool need_input_grad = true);

/// Transposed convolution: each input voxel (n,h,w) of channel ci deposits
/// in[ci][n][h][w] * W[ci][co] into the output block whose origin is
/// (s*n - lo, s*h - lo, s*w - lo); overlapping deposits add and the bias is
/// added once per output voxel. With zero bias this is exactly the adjoint
/// of conv3d_forward under the same geometry and weight tensor.
///
/// Per output voxel: each kernel tap's channel sum (ci ascending) is formed in
/// double, the taps are added in (i, j, k) ascending order, then the bias.
template <typename T>
BasicTensor<T> deconv3d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                const BasicTensor<T>& bias, const ConvGeometry& geom);

template <typename T>
LayerGrads<T> deconv3d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                const ConvGeometry& geom, const BasicTensor<T>& d_output,
                                bool need_input_grad = true);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x);

/// Passes d_out where x > 0; the subgradient at 0 is 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& d_out);

template <typename T>
struct LossResult {
    double loss = 0.0;
    BasicTensor<T> d_pred;
};

/// Squared error summed within each sample and averaged over `samples`:
///   loss = (1/m) sum_i ||pred_i - target_i||^2,  d_pred = (2/m)(pred - target).
template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, std::size_t samples);

/// As above with m taken from the leading (sample) axis of `pred`.
template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

}  // namespace ecnn
