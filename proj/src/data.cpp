#include "ecnn/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "ecnn/io.hpp"
#include "ecnn/rng.hpp"

namespace ecnn {

Volume::Volume(Tensor d, Spacing s) : data(std::move(d)), spacing(s) {
    if (data.shape().rank() != 3) {
        throw ShapeError("volume data must be rank 3 [D,H,W], got " + data.shape().to_string());
    }
    if (!(spacing.dz > 0 && spacing.dy > 0 && spacing.dx > 0) ||
        !std::isfinite(spacing.dz + spacing.dy + spacing.dx)) {
        throw DataError("volume spacing must be finite and > 0");
    }
}

// ---------------------------------------------------------------------------
// .svol

namespace {

constexpr std::string_view kMagicLine = "SVOL 1";
constexpr std::string_view kDtypeLine = "dtype f32le";

std::vector<std::string_view> split_words(std::string_view line) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        const std::size_t j = line.find(' ', i);
        const std::size_t end = j == std::string_view::npos ? line.size() : j;
        if (end > i) words.push_back(line.substr(i, end - i));
        i = end;
    }
    return words;
}

template <typename N>
N parse_number(std::string_view word, std::string_view what) {
    N v{};
    const auto [p, ec] = std::from_chars(word.data(), word.data() + word.size(), v);
    if (ec != std::errc{} || p != word.data() + word.size()) {
        if (ec == std::errc::result_out_of_range) {
            throw DimensionError("svol: " + std::string(what) + " out of range: '" + std::string(word) + "'");
        }
        throw HeaderError("svol: bad " + std::string(what) + ": '" + std::string(word) + "'");
    }
    return v;
}

std::string spacing_text(double v) {
    // Shortest form that parses back to the same double.
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace

std::string encode_volume(const Volume& v) {
    ByteWriter w;
    std::ostringstream header;
    header << kMagicLine << '\n'
           << "dims " << v.depth() << ' ' << v.height() << ' ' << v.width() << '\n'
           << "spacing " << spacing_text(v.spacing.dz) << ' ' << spacing_text(v.spacing.dy) << ' '
           << spacing_text(v.spacing.dx) << '\n'
           << kDtypeLine << "\n\n";
    w.raw(header.str());
    w.f32s(v.data.values());
    return w.bytes();
}

Volume parse_volume(std::string_view bytes) {
    const std::size_t end = bytes.find("\n\n");
    if (end == std::string_view::npos) throw HeaderError("svol: header not terminated by an empty line");
    std::vector<std::string_view> lines;
    for (std::size_t i = 0; i <= end;) {
        const std::size_t j = bytes.find('\n', i);
        lines.push_back(bytes.substr(i, j - i));
        i = j + 1;
    }
    if (lines.size() != 4) {
        throw HeaderError("svol: expected 4 header lines, found " + std::to_string(lines.size()));
    }
    if (lines[0] != kMagicLine) throw HeaderError("svol: bad magic line '" + std::string(lines[0]) + "'");
    const auto dims = split_words(lines[1]);
    if (dims.size() != 4 || dims[0] != "dims") {
        throw HeaderError("svol: expected 'dims D H W', got '" + std::string(lines[1]) + "'");
    }
    const auto sp = split_words(lines[2]);
    if (sp.size() != 4 || sp[0] != "spacing") {
        throw HeaderError("svol: expected 'spacing dz dy dx', got '" + std::string(lines[2]) + "'");
    }
    if (lines[3] != kDtypeLine) throw HeaderError("svol: unsupported dtype line '" + std::string(lines[3]) + "'");

    std::array<std::uint64_t, 3> n{};
    for (int a = 0; a < 3; ++a) {
        n[a] = parse_number<std::uint64_t>(dims[a + 1], "dimension");
        if (n[a] == 0) throw DimensionError("svol: dimension " + std::to_string(a) + " is 0");
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 8;
    if (n[0] > limit / n[1] || n[0] * n[1] > limit / n[2]) {
        throw DimensionError("svol: dims " + std::to_string(n[0]) + "x" + std::to_string(n[1]) + "x" +
                             std::to_string(n[2]) + " overflow");
    }
    Spacing s{parse_number<double>(sp[1], "spacing"), parse_number<double>(sp[2], "spacing"),
              parse_number<double>(sp[3], "spacing")};

    const std::uint64_t count = n[0] * n[1] * n[2];
    ByteReader r(bytes.substr(end + 2), "svol payload");
    if (r.remaining() < count * 4) {
        throw TruncatedError("svol: payload has " + std::to_string(r.remaining()) + " bytes, header needs " +
                             std::to_string(count * 4));
    }
    if (r.remaining() > count * 4) {
        throw DataError("svol: " + std::to_string(r.remaining() - count * 4) + " trailing bytes after payload");
    }
    Tensor t(Shape{n[0], n[1], n[2]});
    r.f32s(t.values());
    for (float x : t.values()) {
        if (!std::isfinite(x)) throw DataError("svol: non-finite voxel value");
    }
    return Volume(std::move(t), s);
}

Volume load_volume(const std::filesystem::path& path) {
    try {
        return parse_volume(read_file(path));
    } catch (const DataError& e) {
        // Re-throw the same category with the path attached.
        const std::string msg = path.string() + ": " + e.what();
        if (dynamic_cast<const HeaderError*>(&e)) throw HeaderError(msg);
        if (dynamic_cast<const TruncatedError*>(&e)) throw TruncatedError(msg);
        if (dynamic_cast<const DimensionError*>(&e)) throw DimensionError(msg);
        throw DataError(msg);
    }
}

void save_volume(const Volume& volume, const std::filesystem::path& path) {
    atomic_write(path, encode_volume(volume));
}

// ---------------------------------------------------------------------------
// Intensity

Tensor normalize(const Tensor& raw, double lo, double hi) {
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw NumericError("normalize requires finite hi > lo");
    }
    Tensor out(raw.shape());
    const double span = hi - lo;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(static_cast<double>(raw[i]), lo, hi);
        out[i] = static_cast<float>((v - lo) / span);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

double catmull_rom(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

struct Taps {
    std::size_t count = 0;
    std::array<std::size_t, 4> index{};
    std::array<double, 4> weight{};
};

long floor_div(long a, long b) {
    const long q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

// Source position of output o is (2o + 1) * in / (2 out) - 1/2, kept as an
// exact rational so integer positions give exact unit weights.
std::vector<Taps> make_taps(std::size_t in, std::size_t out, Interp interp) {
    std::vector<Taps> taps(out);
    const long den = 2 * static_cast<long>(out);
    const long last = static_cast<long>(in) - 1;
    auto clampi = [last](long i) { return static_cast<std::size_t>(std::clamp(i, 0L, last)); };
    for (std::size_t o = 0; o < out; ++o) {
        const long num = (2 * static_cast<long>(o) + 1) * static_cast<long>(in) - static_cast<long>(out);
        const long f = floor_div(num, den);
        const double frac = static_cast<double>(num - f * den) / static_cast<double>(den);
        Taps& t = taps[o];
        switch (interp) {
            case Interp::nearest:
                t.count = 1;
                t.index[0] = clampi(frac < 0.5 ? f : f + 1);
                t.weight[0] = 1.0;
                break;
            case Interp::bilinear:
                t.count = 2;
                t.index = {clampi(f), clampi(f + 1), 0, 0};
                t.weight = {1.0 - frac, frac, 0.0, 0.0};
                break;
            case Interp::bicubic:
                t.count = 4;
                for (int k = 0; k < 4; ++k) {
                    t.index[k] = clampi(f - 1 + k);
                    t.weight[k] = catmull_rom(frac - static_cast<double>(k - 1));
                }
                break;
        }
    }
    return taps;
}

}  // namespace

std::vector<float> resample_image(const float* src, std::size_t h, std::size_t w, std::size_t out_h,
                                  std::size_t out_w, Interp interp) {
    if (h == 0 || w == 0 || out_h == 0 || out_w == 0) throw ShapeError("resample_image: empty extent");
    const auto tx = make_taps(w, out_w, interp);
    const auto ty = make_taps(h, out_h, interp);
    // Rows first (along W), then columns (along H); both passes in double.
    std::vector<double> rows(h * out_w);
    for (std::size_t y = 0; y < h; ++y) {
        const float* line = src + y * w;
        for (std::size_t x = 0; x < out_w; ++x) {
            const Taps& t = tx[x];
            double acc = 0.0;
            for (std::size_t k = 0; k < t.count; ++k) acc += t.weight[k] * static_cast<double>(line[t.index[k]]);
            rows[y * out_w + x] = acc;
        }
    }
    std::vector<float> out(out_h * out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const Taps& t = ty[y];
        for (std::size_t x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < t.count; ++k) acc += t.weight[k] * rows[t.index[k] * out_w + x];
            out[y * out_w + x] = static_cast<float>(acc);
        }
    }
    return out;
}

Volume resample_axial(const Volume& v, std::size_t out_h, std::size_t out_w, Interp interp) {
    Tensor t(Shape{v.depth(), out_h, out_w});
    for (std::size_t z = 0; z < v.depth(); ++z) {
        const auto img = resample_image(v.slice(z), v.height(), v.width(), out_h, out_w, interp);
        std::copy(img.begin(), img.end(), t.data() + z * out_h * out_w);
    }
    Spacing s = v.spacing;
    s.dy *= static_cast<double>(v.height()) / static_cast<double>(out_h);
    s.dx *= static_cast<double>(v.width()) / static_cast<double>(out_w);
    return Volume(std::move(t), s);
}

Volume crop_to_multiple(const Volume& v, std::size_t r) {
    if (r == 0) throw ConfigError("crop factor must be >= 1");
    const std::size_t h = v.height() / r * r;
    const std::size_t w = v.width() / r * r;
    if (h == 0 || w == 0) {
        throw DataError("volume " + v.data.shape().to_string() + " smaller than factor " + std::to_string(r));
    }
    if (h == v.height() && w == v.width()) return v;
    const std::size_t oy = (v.height() - h) / 2;
    const std::size_t ox = (v.width() - w) / 2;
    Tensor t(Shape{v.depth(), h, w});
    for (std::size_t z = 0; z < v.depth(); ++z)
        for (std::size_t y = 0; y < h; ++y) {
            const float* src = v.slice(z) + (y + oy) * v.width() + ox;
            std::copy(src, src + w, t.data() + (z * h + y) * w);
        }
    return Volume(std::move(t), v.spacing);
}

Volume downsample_axial(const Volume& v, std::size_t r, Interp interp) {
    if (r < 2) throw ConfigError("downsampling factor must be >= 2 (got " + std::to_string(r) + ")");
    const Volume c = crop_to_multiple(v, r);
    return resample_axial(c, c.height() / r, c.width() / r, interp);
}

Volume upsample_axial(const Volume& v, std::size_t r, Interp interp) {
    if (r < 2) throw ConfigError("upsampling factor must be >= 2 (got " + std::to_string(r) + ")");
    const std::size_t h = v.height(), w = v.width();
    if (h > std::numeric_limits<std::size_t>::max() / r / r / w) throw ShapeError("upsampled extent overflows");
    return resample_axial(v, h * r, w * r, interp);
}

Volume bicubic_upsample(const Volume& v, std::size_t r) { return upsample_axial(v, r, Interp::bicubic); }

// ---------------------------------------------------------------------------
// Folds

std::vector<std::string> FoldAssignment::members(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : fold_of)
        if (f == fold) out.push_back(id);
    return out;
}

std::vector<std::string> FoldAssignment::train() const {
    std::vector<std::string> out;
    for (const auto& [id, f] : fold_of)
        if (f == 0 || f == 1) out.push_back(id);
    return out;
}

FoldAssignment split_folds(const std::vector<std::string>& scan_ids, std::uint64_t seed) {
    if (scan_ids.size() < 4) {
        throw DataError("split_folds needs >= 4 scans (got " + std::to_string(scan_ids.size()) + ")");
    }
    if (std::set<std::string>(scan_ids.begin(), scan_ids.end()).size() != scan_ids.size()) {
        throw DataError("split_folds: duplicate scan ids");
    }
    std::vector<std::string> order = scan_ids;
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(order));
    FoldAssignment fa;
    for (std::size_t i = 0; i < order.size(); ++i) fa.fold_of[order[i]] = static_cast<int>(i % 4);
    return fa;
}

// ---------------------------------------------------------------------------
// Training pairs

namespace {

std::vector<std::size_t> patch_origins(std::size_t extent, std::size_t patch) {
    const std::size_t stride = std::max<std::size_t>(1, patch / 2);
    std::vector<std::size_t> o;
    for (std::size_t p = 0; p + patch <= extent; p += stride) o.push_back(p);
    if (!o.empty() && o.back() + patch != extent) o.push_back(extent - patch);
    return o;
}

}  // namespace

std::vector<TrainingPair> make_pairs(const Volume& hr, const ModelConfig& cfg, const std::string& scan_id) {
    const Volume cropped = crop_to_multiple(hr, cfg.scale);
    return make_pairs(cropped, downsample_axial(cropped, cfg.scale), cfg, scan_id);
}

std::vector<TrainingPair> make_pairs(const Volume& hr_in, const Volume& lr, const ModelConfig& cfg,
                                     const std::string& scan_id) {
    const std::size_t n = cfg.feature_depth, p = cfg.patch_hw, r = cfg.scale;
    const Volume hr = crop_to_multiple(hr_in, r);
    if (lr.depth() != hr.depth() || lr.height() * r != hr.height() || lr.width() * r != hr.width()) {
        throw DataError("LR volume " + lr.data.shape().to_string() + " is not HR " + hr.data.shape().to_string() +
                        " reduced by " + std::to_string(r));
    }
    if (n == 0 || p == 0 || lr.depth() < n || lr.height() < p || lr.width() < p) {
        throw DataError("volume " + scan_id + " (LR " + lr.data.shape().to_string() + ") too small for n=" +
                        std::to_string(n) + " and patch " + std::to_string(p));
    }
    const auto ys = patch_origins(lr.height(), p);
    const auto xs = patch_origins(lr.width(), p);
    const std::size_t half = n / 2, hp = p * r;
    std::vector<TrainingPair> pairs;
    pairs.reserve((lr.depth() - n + 1) * ys.size() * xs.size());
    for (std::size_t c = half; c + half < lr.depth(); ++c) {
        for (std::size_t y : ys) {
            for (std::size_t x : xs) {
                TrainingPair tp;
                tp.lr_patch = Tensor(Shape{1, n, p, p});
                for (std::size_t dz = 0; dz < n; ++dz)
                    for (std::size_t yy = 0; yy < p; ++yy) {
                        const float* src = lr.slice(c - half + dz) + (y + yy) * lr.width() + x;
                        std::copy(src, src + p, tp.lr_patch.data() + (dz * p + yy) * p);
                    }
                tp.hr_patch = Tensor(Shape{1, 1, hp, hp});
                for (std::size_t yy = 0; yy < hp; ++yy) {
                    const float* src = hr.slice(c) + (y * r + yy) * hr.width() + x * r;
                    std::copy(src, src + hp, tp.hr_patch.data() + yy * hp);
                }
                tp.origin = {scan_id, c, y, x};
                pairs.push_back(std::move(tp));
            }
        }
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Synthetic volumes

SyntheticKind parse_synthetic_kind(const std::string& name) {
    if (name == "spheres") return SyntheticKind::spheres;
    if (name == "ramps") return SyntheticKind::ramps;
    if (name == "shepp-logan") return SyntheticKind::shepp_logan;
    throw ConfigError("unknown synthetic kind '" + name + "' (expected spheres, ramps, shepp-logan)");
}

namespace {

struct Ellipsoid {
    double cz, cy, cx;  // centre, unit-cube coordinates
    double rz, ry, rx;  // semi-axes
    double angle;       // in-plane rotation, radians
    double value;
    double cos_a = 1.0, sin_a = 0.0;
};

bool inside(const Ellipsoid& e, double z, double y, double x) {
    const double ca = e.cos_a, sa = e.sin_a;
    const double dy = y - e.cy, dx = x - e.cx;
    const double u = (ca * dx + sa * dy) / e.rx;
    const double v = (-sa * dx + ca * dy) / e.ry;
    const double w = (z - e.cz) / e.rz;
    return u * u + v * v + w * w <= 1.0;
}

}  // namespace

Volume gen_synthetic(SyntheticKind kind, std::size_t d, std::size_t h, std::size_t w, std::uint64_t seed) {
    if (d < 16 || h < 16 || w < 16) {
        throw ConfigError("synthetic volume extents must be >= 16 (got " + std::to_string(d) + "x" +
                          std::to_string(h) + "x" + std::to_string(w) + ")");
    }
    Rng rng(seed);
    Tensor t(Shape{d, h, w});
    const double two_pi = 2.0 * std::numbers::pi;
    auto coord = [](std::size_t i, std::size_t n) { return static_cast<double>(i) / static_cast<double>(n); };

    if (kind == SyntheticKind::ramps) {
        const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0), c = rng.uniform(-0.25, 0.25);
        const double lo = std::min(a, 0.0) + std::min(b, 0.0) + std::min(c, 0.0);
        const double hi = std::max(a, 0.0) + std::max(b, 0.0) + std::max(c, 0.0);
        const double span = hi > lo ? hi - lo : 1.0;
        for (std::size_t z = 0; z < d; ++z)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double v = a * coord(x, w) + b * coord(y, h) + c * coord(z, d);
                    t.at(z, y, x) = static_cast<float>(std::clamp((v - lo) / span, 0.0, 1.0));
                }
        return Volume(std::move(t), Spacing{});
    }

    std::vector<Ellipsoid> shapes;
    std::array<double, 3> wave{};
    if (kind == SyntheticKind::spheres) {
        wave = {rng.next_double(), rng.next_double(), rng.next_double()};
        for (int i = 0; i < 12; ++i) {
            Ellipsoid e{};
            e.cz = rng.uniform(0.1, 0.9);
            e.cy = rng.uniform(0.1, 0.9);
            e.cx = rng.uniform(0.1, 0.9);
            e.rz = rng.uniform(0.05, 0.2);
            e.ry = rng.uniform(0.05, 0.2);
            e.rx = rng.uniform(0.05, 0.2);
            e.angle = 0.0;
            e.value = rng.uniform(0.3, 1.0);
            shapes.push_back(e);
        }
    } else {
        // Head phantom: {value, rx, ry, cx, cy, angle in degrees}, centred unit square in [-1, 1].
        struct Row {
            double value, rx, ry, cx, cy, deg, rz;
        };
        const Row rows[] = {
            {1.0, 0.69, 0.92, 0.0, 0.0, 0.0, 0.90},       {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0, 0.88},
            {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0, 0.22},   {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0, 0.28},
            {0.1, 0.21, 0.25, 0.0, 0.35, 0.0, 0.41},      {0.1, 0.046, 0.046, 0.0, 0.1, 0.0, 0.05},
            {0.1, 0.046, 0.046, 0.0, -0.1, 0.0, 0.05},    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0, 0.05},
            {0.1, 0.023, 0.023, 0.0, -0.606, 0.0, 0.02},  {0.1, 0.023, 0.046, 0.06, -0.605, 0.0, 0.02},
        };
        for (const Row& row : rows) {
            const double j = rng.uniform(0.95, 1.05);
            Ellipsoid e{};
            e.value = row.value;
            e.cx = 0.5 + 0.5 * row.cx + rng.uniform(-0.01, 0.01);
            e.cy = 0.5 - 0.5 * row.cy + rng.uniform(-0.01, 0.01);
            e.cz = 0.5;
            e.rx = 0.5 * row.rx * j;
            e.ry = 0.5 * row.ry * j;
            e.rz = 0.5 * row.rz * j;
            e.angle = row.deg * std::numbers::pi / 180.0;
            shapes.push_back(e);
        }
    }
    for (auto& e : shapes) {
        e.cos_a = std::cos(e.angle);
        e.sin_a = std::sin(e.angle);
    }

    for (std::size_t z = 0; z < d; ++z)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double zz = coord(z, d), yy = coord(y, h), xx = coord(x, w);
                double v;
                if (kind == SyntheticKind::spheres) {
                    // Smooth background; later shapes paint over earlier ones.
                    v = 0.2 + 0.1 * std::sin(two_pi * (wave[0] * xx + wave[1] * yy)) +
                        0.05 * std::cos(two_pi * wave[2] * zz);
                    for (const auto& e : shapes)
                        if (inside(e, zz, yy, xx)) v = e.value;
                } else {
                    // Phantom intensities add.
                    v = 0.0;
                    for (const auto& e : shapes)
                        if (inside(e, zz, yy, xx)) v += e.value;
                    v = v * 0.8 + 0.05 * std::cos(two_pi * zz);
                }
                t.at(z, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    return Volume(std::move(t), Spacing{});
}

}  // namespace ecnn
