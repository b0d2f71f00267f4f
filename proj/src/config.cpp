#include "ecnn/config.hpp"

#include <cmath>
#include <sstream>

#include "ecnn/error.hpp"

namespace ecnn {

std::vector<std::string> ModelConfig::problems() const {
    std::vector<std::string> out;
    auto bad = [&out](bool cond, std::string msg) {
        if (cond) out.push_back(std::move(msg));
    };
    bad(feature_depth == 0 || feature_depth % 2 == 0,
        "feature_depth must be odd and >= 1 (got " + std::to_string(feature_depth) + ")");
    bad(conv_layers == 0, "conv_layers must be >= 1");
    bad(filters.size() != conv_layers + 2,
        "filters needs conv_layers + 2 = " + std::to_string(conv_layers + 2) + " entries (got " +
            std::to_string(filters.size()) + ")");
    for (std::size_t i = 0; i < filters.size(); ++i) {
        bad(filters[i] == 0, "filters[" + std::to_string(i) + "] must be >= 1");
    }
    bad(!filters.empty() && filters.back() != 1,
        "last filter count must be 1 (got " + std::to_string(filters.empty() ? 0 : filters.back()) + ")");
    bad(kernel == 0 || kernel % 2 == 0, "kernel must be odd and >= 1 (got " + std::to_string(kernel) + ")");
    bad(scale < 2, "scale must be >= 2 (got " + std::to_string(scale) + ")");
    bad(!std::isfinite(lr) || lr < 0.0, "lr must be finite and >= 0");
    bad(epochs == 0, "epochs must be >= 1");
    bad(batch_size == 0, "batch_size must be >= 1");
    bad(patch_hw == 0, "patch_hw must be >= 1");
    return out;
}

void ModelConfig::validate() const {
    const auto p = problems();
    if (p.empty()) return;
    std::string msg = "invalid model config (" + arch_string() + "):";
    for (const auto& s : p) msg += "\n  - " + s;
    throw ConfigError(msg);
}

std::string ModelConfig::arch_string() const {
    std::ostringstream os;
    os << "n=" << feature_depth << " l=" << conv_layers << " f=";
    for (std::size_t i = 0; i < filters.size(); ++i) os << (i ? "," : "") << filters[i];
    os << " k=" << kernel << " r=" << scale;
    return os.str();
}

}  // namespace ecnn
