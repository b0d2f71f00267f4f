#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ecnn/tensor.hpp"

namespace ecnn {

/// psnr of identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(max^2 / mse), mse accumulated in double in index order.
/// Returns kPsnrIdentical when mse == 0. Throws ShapeError on length
/// mismatch or empty input, NumericError unless max_value > 0.
double psnr(std::span<const float> a, std::span<const float> b, double max_value = 1.0);
double psnr(const Tensor& a, const Tensor& b, double max_value = 1.0);

struct SsimParams {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean over valid window positions. `index` is the standard combined
/// formula; the components are reported separately with C3 = C2 / 2.
struct SsimResult {
    double index = 0.0;
    double luminance = 0.0;
    double contrast = 0.0;
    double structure = 0.0;
};

/// Gaussian-windowed SSIM of two h x w images, no padding. Throws ShapeError
/// when the image is smaller than the window.
SsimResult ssim_components(const float* a, const float* b, std::size_t h, std::size_t w,
                           const SsimParams& params = {});
double ssim(const float* a, const float* b, std::size_t h, std::size_t w, const SsimParams& params = {});
/// Rank-2 tensors [H, W] of equal shape.
double ssim(const Tensor& a, const Tensor& b, const SsimParams& params = {});

/// I_x(a, b), continued-fraction evaluation. Throws NumericError outside
/// a, b > 0, 0 <= x <= 1.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided tail P(|T| >= |t|) of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct TTestResult {
    double mean_diff = 0.0;
    double t_statistic = 0.0;
    std::size_t degrees_of_freedom = 0;
    double p_value = 1.0;
    /// Differences have zero spread: t is 0 with p = 1 when they are all
    /// zero, otherwise +/-inf with p = 0.
    bool degenerate = false;
};

/// Paired test on d = x - y with the n - 1 sample standard deviation.
/// Throws ShapeError on length mismatch or n < 2.
TTestResult paired_t_test(std::span<const double> x, std::span<const double> y);

struct SliceSample {
    std::string slice_id;
    std::string method;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct Summary {
    double mean = 0.0;
    double sd = 0.0;        // n - 1 denominator; 0 for a single value
    std::size_t count = 0;  // values used
    std::size_t excluded = 0;
};

struct Aggregate {
    Summary psnr;  // +inf samples excluded and counted
    Summary ssim;
};

/// Two-pass mean and sample sd, summed in input order. When every PSNR
/// value is excluded the PSNR mean is kPsnrIdentical. Throws DataError on
/// empty input.
Aggregate aggregate(std::span<const SliceSample> samples);

struct TTestRow {
    std::string method_a;
    std::string method_b;
    std::string metric;
    TTestResult result;
};

/// Shortest round-trip decimal; "inf" / "-inf" for infinities.
std::string format_real(double v);

/// Header `slice_id,method,psnr_db,ssim`. Throws DataError if a text field
/// contains a comma, quote or newline.
std::string metrics_csv(std::span<const SliceSample> samples);
/// Header `method_a,method_b,metric,mean_diff,t,df,p_two_sided`.
std::string ttest_csv(std::span<const TTestRow> rows);

}  // namespace ecnn
