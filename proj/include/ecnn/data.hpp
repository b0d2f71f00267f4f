#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ecnn/config.hpp"
#include "ecnn/tensor.hpp"

namespace ecnn {

/// Physical voxel size in mm along (depth, height, width).
struct Spacing {
    double dz = 1.0;
    double dy = 1.0;
    double dx = 1.0;

    friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// A scalar field stored as a rank-3 tensor [D, H, W].
struct Volume {
    Tensor data;
    Spacing spacing;

    Volume() = default;
    /// Throws ShapeError unless data is rank 3, DataError unless spacing > 0.
    Volume(Tensor data, Spacing spacing);

    std::size_t depth() const { return data.extent(0); }
    std::size_t height() const { return data.extent(1); }
    std::size_t width() const { return data.extent(2); }
    const float* slice(std::size_t z) const { return data.data() + z * height() * width(); }

    friend bool operator==(const Volume&, const Volume&) = default;
};

/// .svol: ASCII header lines "SVOL 1", "dims D H W", "spacing dz dy dx",
/// "dtype f32le", an empty line, then D*H*W little-endian f32, W fastest.
///
/// Throws HeaderError, TruncatedError or DimensionError (zero or overflowing
/// dims); trailing bytes or a non-finite voxel are a DataError.
Volume load_volume(const std::filesystem::path& path);
Volume parse_volume(std::string_view bytes);
void save_volume(const Volume& volume, const std::filesystem::path& path);
std::string encode_volume(const Volume& volume);

/// clamp(raw, lo, hi) mapped affinely onto [0, 1]. Throws NumericError unless hi > lo.
Tensor normalize(const Tensor& raw, double lo, double hi);

enum class Interp { nearest, bilinear, bicubic };

/// Separable resampling of one H x W image to out_h x out_w. Output pixel o
/// samples source coordinate (o + 0.5) * in / out - 0.5; taps beyond the
/// border are clamped to the edge. Bicubic is Catmull-Rom (a = -0.5).
std::vector<float> resample_image(const float* src, std::size_t h, std::size_t w, std::size_t out_h,
                                  std::size_t out_w, Interp interp);

/// Every axial slice resampled to out_h x out_w; spacing follows the
/// physical extent.
Volume resample_axial(const Volume& volume, std::size_t out_h, std::size_t out_w, Interp interp);

/// Centre crop of H and W to the largest multiples of r.
Volume crop_to_multiple(const Volume& volume, std::size_t r);

/// Low-resolution simulation: crop_to_multiple, then each slice reduced by r
/// in-plane with `interp` (no pre-blur). Throws ConfigError for r < 2.
Volume downsample_axial(const Volume& volume, std::size_t r, Interp interp = Interp::bicubic);

/// Each slice enlarged by r in-plane. Throws ConfigError for r < 2.
Volume upsample_axial(const Volume& volume, std::size_t r, Interp interp);
Volume bicubic_upsample(const Volume& volume, std::size_t r);

/// Folds 0 and 1 train, 2 validates, 3 tests.
struct FoldAssignment {
    std::map<std::string, int> fold_of;

    std::vector<std::string> members(int fold) const;
    std::vector<std::string> train() const;
    std::vector<std::string> validation() const { return members(2); }
    std::vector<std::string> test() const { return members(3); }
};

/// Seeded shuffle, then round-robin into four folds. Throws DataError for
/// fewer than 4 scans or duplicate ids.
FoldAssignment split_folds(const std::vector<std::string>& scan_ids, std::uint64_t seed);

struct PairOrigin {
    std::string scan_id;
    std::size_t slice = 0;  // centre slice index
    std::size_t y = 0;      // LR patch origin
    std::size_t x = 0;

    friend auto operator<=>(const PairOrigin&, const PairOrigin&) = default;
};

struct TrainingPair {
    Tensor lr_patch;  // [1, n, p, p]
    Tensor hr_patch;  // [1, 1, p*r, p*r]
    PairOrigin origin;
};

/// Interior n-slice windows (no edge replication) paired with the centre HR
/// slice; in-plane patches of cfg.patch_hw at stride max(1, patch_hw / 2),
/// plus a final row/column flush with the far edge when the stride does not
/// land on it. The HR volume is first cropped to a multiple of r.
/// Throws DataError when not even one patch fits.
std::vector<TrainingPair> make_pairs(const Volume& hr, const ModelConfig& cfg, const std::string& scan_id);

/// Same, reusing an already simulated LR volume of `hr` (after cropping).
std::vector<TrainingPair> make_pairs(const Volume& hr, const Volume& lr, const ModelConfig& cfg,
                                     const std::string& scan_id);

enum class SyntheticKind { spheres, ramps, shepp_logan };

/// Parses "spheres", "ramps", "shepp-logan". Throws ConfigError.
SyntheticKind parse_synthetic_kind(const std::string& name);

/// Reproducible volumes in [0, 1] with unit spacing:
///   spheres     - random ellipsoids of constant intensity over a smooth background
///   ramps       - affine intensity ramp along a random in-plane direction
///   shepp_logan - nested ellipsoids after the classic head phantom, randomly jittered
/// Throws ConfigError if any extent is below 16.
Volume gen_synthetic(SyntheticKind kind, std::size_t d, std::size_t h, std::size_t w, std::uint64_t seed);

}  // namespace ecnn
