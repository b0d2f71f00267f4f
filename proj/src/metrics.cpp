#include "ecnn/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace ecnn {

double psnr(std::span<const float> a, std::span<const float> b, double max_value) {
    if (a.size() != b.size()) {
        throw ShapeError("psnr: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.empty()) throw ShapeError("psnr of empty images");
    if (!(max_value > 0.0) || !std::isfinite(max_value)) throw NumericError("psnr: max_value must be finite and > 0");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += e * e;
    }
    if (acc == 0.0) return kPsnrIdentical;
    const double mse = acc / static_cast<double>(a.size());
    return 10.0 * std::log10(max_value * max_value / mse);
}

double psnr(const Tensor& a, const Tensor& b, double max_value) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError("psnr: shape mismatch " + a.shape().to_string() + " vs " + b.shape().to_string());
    }
    return psnr(a.values(), b.values(), max_value);
}

// ---------------------------------------------------------------------------
// SSIM

namespace {

std::vector<double> gaussian_window(std::size_t n, double sigma) {
    std::vector<double> g(n);
    const double c = static_cast<double>(n - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(i) - c;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Valid-region separable filter of an h x w field: (h-n+1) x (w-n+1).
std::vector<double> filter_valid(const std::vector<double>& f, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
    const std::size_t n = g.size(), oh = h - n + 1, ow = w - n + 1;
    std::vector<double> rows(h * ow);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += g[k] * f[y * w + x + k];
            rows[y * ow + x] = acc;
        }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += g[k] * rows[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    return out;
}

}  // namespace

SsimResult ssim_components(const float* a, const float* b, std::size_t h, std::size_t w, const SsimParams& p) {
    if (p.window == 0 || h < p.window || w < p.window) {
        throw ShapeError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " smaller than " +
                         std::to_string(p.window) + "x" + std::to_string(p.window) + " window");
    }
    const std::size_t n = h * w;
    std::vector<double> fa(n), fb(n), faa(n), fbb(n), fab(n);
    for (std::size_t i = 0; i < n; ++i) {
        fa[i] = a[i];
        fb[i] = b[i];
        faa[i] = fa[i] * fa[i];
        fbb[i] = fb[i] * fb[i];
        fab[i] = fa[i] * fb[i];
    }
    const auto g = gaussian_window(p.window, p.sigma);
    const auto ma = filter_valid(fa, h, w, g), mb = filter_valid(fb, h, w, g);
    const auto saa = filter_valid(faa, h, w, g), sbb = filter_valid(fbb, h, w, g), sab = filter_valid(fab, h, w, g);

    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    const double c3 = c2 / 2.0;
    SsimResult r;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double mu_a = ma[i], mu_b = mb[i];
        const double var_a = saa[i] - mu_a * mu_a;
        const double var_b = sbb[i] - mu_b * mu_b;
        const double cov = sab[i] - mu_a * mu_b;
        r.index += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        const double sd_a = std::sqrt(std::max(var_a, 0.0)), sd_b = std::sqrt(std::max(var_b, 0.0));
        r.luminance += (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
        r.contrast += (2.0 * sd_a * sd_b + c2) / (var_a + var_b + c2);
        r.structure += (cov + c3) / (sd_a * sd_b + c3);
    }
    const double count = static_cast<double>(ma.size());
    r.index /= count;
    r.luminance /= count;
    r.contrast /= count;
    r.structure /= count;
    return r;
}

double ssim(const float* a, const float* b, std::size_t h, std::size_t w, const SsimParams& params) {
    return ssim_components(a, b, h, w, params).index;
}

double ssim(const Tensor& a, const Tensor& b, const SsimParams& params) {
    if (a.shape().rank() != 2 || !(a.shape() == b.shape())) {
        throw ShapeError("ssim needs two [H,W] images of equal shape, got " + a.shape().to_string() + " and " +
                         b.shape().to_string());
    }
    return ssim(a.data(), b.data(), a.extent(0), a.extent(1), params);
}

// ---------------------------------------------------------------------------
// Student t

namespace {

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double md = m;
        const double m2 = 2.0 * md;
        double aa = md * (b - md) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + md) * (qab + md) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
        throw NumericError("incomplete beta needs a, b > 0 and 0 <= x <= 1");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // The fraction converges fast for x below the mean; use symmetry above it.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw NumericError("student t needs df > 0");
    if (std::isnan(t)) throw NumericError("student t of NaN");
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

TTestResult paired_t_test(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw ShapeError("paired_t_test: length mismatch " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
    }
    if (x.size() < 2) throw ShapeError("paired_t_test needs >= 2 pairs");
    const std::size_t n = x.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = x[i] - y[i];
        if (!std::isfinite(d[i])) throw NumericError("paired_t_test: non-finite difference at index " + std::to_string(i));
    }
    double sum = 0.0;
    for (double v : d) sum += v;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult r;
    r.mean_diff = mean;
    r.degrees_of_freedom = n - 1;
    if (sd == 0.0) {
        r.degenerate = true;
        if (mean == 0.0) {
            r.t_statistic = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), mean);
            r.p_value = 0.0;
        }
        return r;
    }
    r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p_value = student_t_two_sided_p(r.t_statistic, static_cast<double>(n - 1));
    return r;
}

// ---------------------------------------------------------------------------
// Aggregation and reports

namespace {

Summary summarize(const std::vector<double>& v, std::size_t excluded) {
    Summary s;
    s.count = v.size();
    s.excluded = excluded;
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

void check_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") != std::string::npos) {
        throw DataError("CSV field contains a separator or quote: '" + s + "'");
    }
}

}  // namespace

Aggregate aggregate(std::span<const SliceSample> samples) {
    if (samples.empty()) throw DataError("aggregate of no samples");
    std::vector<double> p, s;
    std::size_t excluded = 0;
    for (const auto& smp : samples) {
        if (std::isinf(smp.psnr) && smp.psnr > 0) {
            ++excluded;
        } else {
            p.push_back(smp.psnr);
        }
        s.push_back(smp.ssim);
    }
    Aggregate a{summarize(p, excluded), summarize(s, 0)};
    if (p.empty()) a.psnr.mean = kPsnrIdentical;
    return a;
}

std::string format_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string metrics_csv(std::span<const SliceSample> samples) {
    std::string out = "slice_id,method,psnr_db,ssim\n";
    for (const auto& s : samples) {
        check_field(s.slice_id);
        check_field(s.method);
        out += s.slice_id + ',' + s.method + ',' + format_real(s.psnr) + ',' + format_real(s.ssim) + '\n';
    }
    return out;
}

std::string ttest_csv(std::span<const TTestRow> rows) {
    std::string out = "method_a,method_b,metric,mean_diff,t,df,p_two_sided\n";
    for (const auto& r : rows) {
        check_field(r.method_a);
        check_field(r.method_b);
        check_field(r.metric);
        out += r.method_a + ',' + r.method_b + ',' + r.metric + ',' + format_real(r.result.mean_diff) + ',' +
               format_real(r.result.t_statistic) + ',' + std::to_string(r.result.degrees_of_freedom) + ',' +
               format_real(r.result.p_value) + '\n';
    }
    return out;
}

}  // namespace ecnn
