#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ecnn {

/// Hyperparameters of one network plus the training schedule.
///
/// filters has conv_layers + 2 entries: one per conv layer, then the
/// deconvolution, then the output layer (which must be 1).
struct ModelConfig {
    std::size_t feature_depth = 5;  // n: LR slices per sample
    std::size_t conv_layers = 3;    // l
    std::vector<std::size_t> filters{64, 64, 32, 32, 1};
    std::size_t kernel = 3;  // k, odd
    std::size_t scale = 3;   // r
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    std::size_t patch_hw = 32;  // LR in-plane patch extent

    /// Every problem found, one per entry; empty when valid.
    std::vector<std::string> problems() const;
    /// Throws ConfigError listing every problem at once.
    void validate() const;

    /// Canonical one-line form, e.g. "n=5 l=3 f=64,64,32,32,1 k=3 r=3".
    /// Covers the architecture only; used for ranking tie-breaks and logs.
    std::string arch_string() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace ecnn
