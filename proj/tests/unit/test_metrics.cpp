#include <gtest/gtest.h>

#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "ecnn/metrics.hpp"
#include "ecnn/rng.hpp"
#include "../support/stats_oracle.hpp"

using namespace ecnn;

namespace {

using oracle::t_two_sided_by_integration;

// Full 2-D Gaussian window, every statistic evaluated directly.
double naive_ssim(const std::vector<float>& a, const std::vector<float>& b, std::size_t h, std::size_t w) {
    const int win = 11;
    const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    std::vector<double> g(win * win);
    double gs = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double di = i - 5, dj = j - 5;
            g[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
            gs += g[i * win + j];
        }
    for (auto& v : g) v /= gs;
    double total = 0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + win <= h; ++y)
        for (std::size_t x = 0; x + win <= w; ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    ma += g[i * win + j] * a[(y + i) * w + x + j];
                    mb += g[i * win + j] * b[(y + i) * w + x + j];
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double da = a[(y + i) * w + x + j] - ma, db = b[(y + i) * w + x + j] - mb;
                    va += g[i * win + j] * da * da;
                    vb += g[i * win + j] * db * db;
                    cov += g[i * win + j] * da * db;
                }
            total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

std::vector<float> random_image(std::size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(0.0, 1.0));
    return v;
}

}  // namespace

TEST(Psnr, UniformErrorOfOneTenthIsTwentyDecibels) {
    std::vector<float> a(64, 0.5f), b(64, 0.5f);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<float>(i % 2 ? 0.6 : 0.4);
    // mse is the float rounding of 0.1^2, within 1e-6 dB of 20.
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-5);
}

TEST(Psnr, IdenticalInputsAreInfinite) {
    std::vector<float> a{0.1f, 0.2f};
    EXPECT_EQ(psnr(a, a), kPsnrIdentical);
}

TEST(Psnr, MaxValueScales) {
    std::vector<float> a(10, 0.0f), b(10, 2.0f);
    EXPECT_NEAR(psnr(a, b, 2.0), 0.0, 1e-12);
    EXPECT_NEAR(psnr(a, b, 20.0), 20.0, 1e-12);
}

TEST(Psnr, RejectsBadInput) {
    std::vector<float> a(3), b(4);
    EXPECT_THROW(psnr(a, b), ShapeError);
    EXPECT_THROW(psnr(std::span<const float>{}, std::span<const float>{}), ShapeError);
    EXPECT_THROW(psnr(a, a, 0.0), NumericError);
    EXPECT_THROW(psnr(Tensor(Shape{2, 2}), Tensor(Shape{4})), ShapeError);
}

TEST(Ssim, IdenticalImagesGiveOne) {
    Rng rng(1);
    const auto a = random_image(24 * 30, rng);
    const auto r = ssim_components(a.data(), a.data(), 24, 30);
    EXPECT_NEAR(r.index, 1.0, 1e-12);
    EXPECT_NEAR(r.luminance, 1.0, 1e-12);
    EXPECT_NEAR(r.contrast, 1.0, 1e-12);
    EXPECT_NEAR(r.structure, 1.0, 1e-12);
}

TEST(Ssim, MatchesDirectTwoDimensionalWindow) {
    Rng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t h = 11 + rng.below(10), w = 11 + rng.below(10);
        const auto a = random_image(h * w, rng);
        auto b = a;
        for (auto& v : b) v = static_cast<float>(0.7 * v + 0.3 * rng.uniform(0.0, 1.0));
        EXPECT_NEAR(ssim(a.data(), b.data(), h, w), naive_ssim(a, b, h, w), 1e-9);
    }
}

TEST(Ssim, InvertedCheckerboardIsNegative) {
    const std::size_t n = 16;
    std::vector<float> a(n * n), b(n * n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            a[y * n + x] = (x + y) % 2 ? 1.0f : 0.0f;
            b[y * n + x] = 1.0f - a[y * n + x];
        }
    const auto r = ssim_components(a.data(), b.data(), n, n);
    EXPECT_LT(r.index, 0.0);
    EXPECT_LT(r.structure, -0.99);
}

TEST(Ssim, TensorFormAndErrors) {
    Tensor a(Shape{12, 12});
    Tensor b(Shape{12, 12});
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<float>(i % 7) / 7.0f;
        b[i] = a[i];
    }
    EXPECT_NEAR(ssim(a, b), 1.0, 1e-12);
    EXPECT_THROW(ssim(Tensor(Shape{10, 12}), Tensor(Shape{10, 12})), ShapeError);
    EXPECT_THROW(ssim(a, Tensor(Shape{12, 13})), ShapeError);
    EXPECT_THROW(ssim(Tensor(Shape{1, 12, 12}), Tensor(Shape{1, 12, 12})), ShapeError);
}

TEST(IncompleteBeta, ClosedForms) {
    for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
        EXPECT_NEAR(regularized_incomplete_beta(1, 1, x), x, 1e-14);
        EXPECT_NEAR(regularized_incomplete_beta(2.5, 1, x), std::pow(x, 2.5), 1e-14);
        EXPECT_NEAR(regularized_incomplete_beta(1, 3, x), 1 - std::pow(1 - x, 3), 1e-14);
    }
    EXPECT_NEAR(regularized_incomplete_beta(3, 7, 0.2) + regularized_incomplete_beta(7, 3, 0.8), 1.0, 1e-14);
    EXPECT_THROW(regularized_incomplete_beta(0, 1, 0.5), NumericError);
    EXPECT_THROW(regularized_incomplete_beta(1, 1, 1.5), NumericError);
}

TEST(StudentT, AgreesWithNumericalIntegration) {
    for (double df : {1.0, 2.0, 5.0, 30.0, 191.0})
        for (double t : {0.0, 0.5, 1.7, 3.0, 6.0}) {
            EXPECT_NEAR(student_t_two_sided_p(t, df), t_two_sided_by_integration(t, df), 1e-9) << df << " " << t;
            EXPECT_EQ(student_t_two_sided_p(-t, df), student_t_two_sided_p(t, df));
        }
}

TEST(PairedTTest, DifferencesOneTwoThree) {
    const std::vector<double> x{1, 2, 3}, y{0, 0, 0};
    const auto r = paired_t_test(x, y);
    EXPECT_NEAR(r.t_statistic, 3.4641, 1e-3);
    EXPECT_NEAR(r.t_statistic, 2 * std::sqrt(3.0), 1e-12);
    EXPECT_EQ(r.degrees_of_freedom, 2u);
    EXPECT_DOUBLE_EQ(r.mean_diff, 2.0);
    EXPECT_NEAR(r.p_value, t_two_sided_by_integration(r.t_statistic, 2), 1e-3);
    // df = 2 has the closed form 1 - t / sqrt(2 + t^2).
    EXPECT_NEAR(r.p_value, 1 - r.t_statistic / std::sqrt(2 + r.t_statistic * r.t_statistic), 1e-12);
    EXPECT_FALSE(r.degenerate);
}

TEST(PairedTTest, DegenerateAndErrors) {
    const std::vector<double> a{1, 2, 3}, b{1, 2, 3}, c{2, 3, 4};
    auto r = paired_t_test(a, b);
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.t_statistic, 0.0);
    EXPECT_EQ(r.p_value, 1.0);
    r = paired_t_test(c, a);
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.t_statistic, std::numeric_limits<double>::infinity());
    EXPECT_EQ(r.p_value, 0.0);
    EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ShapeError);
    EXPECT_THROW(paired_t_test(a, std::vector<double>{1, 2}), ShapeError);
}

TEST(Aggregate, ExcludesInfinitePsnr) {
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<SliceSample> s{{"a", "m", 30, 0.9}, {"b", "m", inf, 1.0}, {"c", "m", 32, 0.7}};
    const auto g = aggregate(s);
    EXPECT_DOUBLE_EQ(g.psnr.mean, 31.0);
    EXPECT_NEAR(g.psnr.sd, std::sqrt(2.0), 1e-12);
    EXPECT_EQ(g.psnr.count, 2u);
    EXPECT_EQ(g.psnr.excluded, 1u);
    EXPECT_NEAR(g.ssim.mean, 0.8666666666666667, 1e-15);
    EXPECT_EQ(g.ssim.count, 3u);

    const std::vector<SliceSample> all{{"a", "m", inf, 1.0}};
    const auto h = aggregate(all);
    EXPECT_EQ(h.psnr.mean, kPsnrIdentical);
    EXPECT_EQ(h.ssim.sd, 0.0);
    EXPECT_THROW(aggregate(std::span<const SliceSample>{}), DataError);
}

TEST(Csv, MetricsAndTTestLayout) {
    const std::vector<SliceSample> s{{"scan1:4", "bicubic", 30.5, 0.875}};
    EXPECT_EQ(metrics_csv(s), "slice_id,method,psnr_db,ssim\nscan1:4,bicubic,30.5,0.875\n");
    TTestRow row{"3decnn", "bicubic", "psnr", {0.25, 4.0, 9, 0.003125, false}};
    EXPECT_EQ(ttest_csv(std::vector<TTestRow>{row}),
              "method_a,method_b,metric,mean_diff,t,df,p_two_sided\n3decnn,bicubic,psnr,0.25,4,9,0.003125\n");
    const std::vector<SliceSample> bad{{"a,b", "m", 1, 1}};
    EXPECT_THROW(metrics_csv(bad), DataError);
}

TEST(FormatReal, ShortestRoundTrip) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, static_cast<int>(rng.below(20)) - 10);
        const std::string s = format_real(v);
        double back = 0;
        std::from_chars(s.data(), s.data() + s.size(), back);
        EXPECT_EQ(back, v);
    }
    EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_real(-std::numeric_limits<double>::infinity()), "-inf");
    EXPECT_EQ(format_real(0.1), "0.1");
}
