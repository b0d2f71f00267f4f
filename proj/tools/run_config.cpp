#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ecnn/error.hpp"
#include "ecnn/io.hpp"
#include "ecnn/metrics.hpp"

namespace ecnn::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string join_problems(const std::string& head, const std::vector<std::string>& problems) {
    std::string msg = head;
    for (const auto& p : problems) msg += "\n  - " + p;
    return msg;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!text.empty() && text.back() == sep) out.emplace_back();
    return out;
}

bool parse_size(const std::string& s, std::size_t& out) {
    if (s.empty() || s[0] == '-' || s[0] == '+') return false;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
    if (s.empty() || s[0] == '-' || s[0] == '+') return false;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

const std::vector<std::string>& model_keys() {
    static const std::vector<std::string> k{"feature_depth", "conv_layers", "filters", "kernel", "scale",
                                            "lr", "seed", "epochs", "batch_size", "patch_hw"};
    return k;
}

const std::vector<std::string>& data_keys() {
    static const std::vector<std::string> k{"manifest", "train_scans", "val_scans", "out_dir"};
    return k;
}

const std::vector<std::string>& grid_keys() {
    static const std::vector<std::string> k{"grid.feature_depth", "grid.conv_layers", "grid.filters", "grid.kernel",
                                            "grid.epoch_fraction"};
    return k;
}

std::string join_sizes(const std::vector<std::size_t>& v, char sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::vector<std::string> problems;
    std::istringstream in(text);
    std::string raw;
    for (std::size_t line = 1; std::getline(in, raw); ++line) {
        const auto hash = raw.find('#');
        const std::string body = trim(std::string_view(raw).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(line) + ": expected 'key = value', got '" + body + "'");
            continue;
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) {
            problems.push_back("line " + std::to_string(line) + ": empty key");
            continue;
        }
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (const auto it = kv.lines.find(key); it != kv.lines.end()) {
            problems.push_back("line " + std::to_string(line) + ": duplicate key '" + key + "' (first on line " +
                               std::to_string(it->second) + ")");
            continue;
        }
        kv.values[key] = value;
        kv.lines[key] = line;
    }
    if (!problems.empty()) throw ConfigError(join_problems("config syntax errors:", problems));
    return kv;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    for (const auto& item : split(text, ',')) {
        std::size_t v = 0;
        if (!parse_size(item, v)) throw ConfigError(what + ": '" + item + "' is not a non-negative integer");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(what + ": empty list");
    return out;
}

RunConfig parse_run_config(const std::string& text, Command command, const std::filesystem::path& base_dir) {
    const KeyValues kv = parse_key_values(text);
    RunConfig rc;
    std::vector<std::string> problems;

    std::vector<std::string> allowed = model_keys();
    allowed.insert(allowed.end(), data_keys().begin(), data_keys().end());
    if (command == Command::gridsearch) allowed.insert(allowed.end(), grid_keys().begin(), grid_keys().end());
    for (const auto& [key, line] : kv.lines) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            problems.push_back("line " + std::to_string(line) + ": unknown key '" + key + "'");
        }
    }

    auto get = [&](const std::string& key) -> const std::string* {
        const auto it = kv.values.find(key);
        return it == kv.values.end() ? nullptr : &it->second;
    };
    auto where = [&](const std::string& key) { return "line " + std::to_string(kv.lines.at(key)) + ": " + key; };
    auto size_field = [&](const std::string& key, std::size_t& field) {
        if (const auto* v = get(key)) {
            if (!parse_size(*v, field)) problems.push_back(where(key) + " must be a non-negative integer, got '" + *v + "'");
        }
    };
    auto list_field = [&](const std::string& key, std::vector<std::size_t>& field) {
        if (const auto* v = get(key)) {
            try {
                field = parse_size_list(*v, where(key));
            } catch (const ConfigError& e) {
                problems.push_back(e.what());
            }
        }
    };
    auto path_field = [&](const std::string& key) -> std::filesystem::path {
        std::filesystem::path p = *get(key);
        return p.is_absolute() ? p : base_dir / p;
    };

    ModelConfig& m = rc.model;
    size_field("feature_depth", m.feature_depth);
    size_field("conv_layers", m.conv_layers);
    list_field("filters", m.filters);
    size_field("kernel", m.kernel);
    size_field("scale", m.scale);
    if (const auto* v = get("lr")) {
        if (!parse_double(*v, m.lr)) problems.push_back(where("lr") + " must be a number, got '" + *v + "'");
    }
    if (const auto* v = get("seed")) {
        if (!parse_u64(*v, m.seed)) problems.push_back(where("seed") + " must be a 64-bit unsigned integer, got '" + *v + "'");
    }
    size_field("epochs", m.epochs);
    size_field("batch_size", m.batch_size);
    size_field("patch_hw", m.patch_hw);
    for (const auto& p : m.problems()) problems.push_back("model: " + p);

    if (!get("manifest")) {
        problems.push_back("manifest: required (path to the CSV written by `simulate`)");
    } else {
        rc.manifest = path_field("manifest");
        if (!std::filesystem::is_regular_file(rc.manifest)) {
            problems.push_back(where("manifest") + ": file not found: " + rc.manifest.string());
        }
    }
    if (const auto* v = get("train_scans")) rc.train_scans = split(*v, ',');
    if (const auto* v = get("val_scans")) rc.val_scans = split(*v, ',');
    for (const auto* list : {&rc.train_scans, &rc.val_scans}) {
        for (const auto& id : *list) {
            if (id.empty()) problems.push_back("train_scans/val_scans: empty scan id");
        }
    }
    if (rc.train_scans.empty() && !rc.val_scans.empty()) {
        problems.push_back("val_scans given without train_scans");
    }
    if (get("out_dir")) rc.out_dir = path_field("out_dir");

    if (command == Command::gridsearch) {
        list_field("grid.feature_depth", rc.grid.feature_depth);
        list_field("grid.conv_layers", rc.grid.conv_layers);
        list_field("grid.kernel", rc.grid.kernel);
        if (const auto* v = get("grid.filters")) {
            for (const auto& group : split(*v, ';')) {
                try {
                    rc.grid.filters.push_back(parse_size_list(group, where("grid.filters")));
                } catch (const ConfigError& e) {
                    problems.push_back(e.what());
                }
            }
        }
        if (const auto* v = get("grid.epoch_fraction")) {
            if (!parse_double(*v, rc.grid_fraction) || !(rc.grid_fraction > 0.0) || !std::isfinite(rc.grid_fraction)) {
                problems.push_back(where("grid.epoch_fraction") + " must be a number > 0, got '" + *v + "'");
            }
        }
        if (rc.grid.feature_depth.empty()) rc.grid.feature_depth = {m.feature_depth};
        if (rc.grid.conv_layers.empty()) rc.grid.conv_layers = {m.conv_layers};
        if (rc.grid.filters.empty()) rc.grid.filters = {m.filters};
        if (rc.grid.kernel.empty()) rc.grid.kernel = {m.kernel};
        if (problems.empty()) {
            try {
                rc.grid.expand(m);
            } catch (const ConfigError& e) {
                problems.push_back(e.what());
            }
        }
    }

    if (!problems.empty()) throw ConfigError(join_problems("invalid config:", problems));
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path, Command command) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const DataError& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    try {
        return parse_run_config(text, command, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string config_reference(Command command) {
    const ModelConfig d;
    std::ostringstream o;
    o << "Config file keys (`key = value`, # comments):\n"
      << "  manifest       = PATH      (required) manifest.csv written by `simulate`\n"
      << "  train_scans    = ID,...    training scan ids (default: folds 0-1 of a seeded 4-fold split)\n"
      << "  val_scans      = ID,...    validation scan ids (default: fold 2)\n"
      << "  out_dir        = PATH      output directory (default: out)\n"
      << "  feature_depth  = " << d.feature_depth << "         LR slices per sample (odd)\n"
      << "  conv_layers    = " << d.conv_layers << "         conv layers before the deconvolution\n"
      << "  filters        = " << join_sizes(d.filters, ',') << "  conv_layers + 2 entries, last is 1\n"
      << "  kernel         = " << d.kernel << "         kernel size (odd)\n"
      << "  scale          = " << d.scale << "         in-plane upscaling factor\n"
      << "  lr             = " << format_real(d.lr) << "     SGD learning rate\n"
      << "  seed           = " << d.seed << "         weight init and shuffling\n"
      << "  epochs         = " << d.epochs << "\n"
      << "  batch_size     = " << d.batch_size << "\n"
      << "  patch_hw       = " << d.patch_hw << "        LR training patch extent\n";
    if (command == Command::gridsearch) {
        o << "  grid.feature_depth = N,...        (default: feature_depth)\n"
          << "  grid.conv_layers   = L,...        (default: conv_layers)\n"
          << "  grid.filters       = F,..;F,..    filter lists separated by ';' (default: filters)\n"
          << "  grid.kernel        = K,...        (default: kernel)\n"
          << "  grid.epoch_fraction = 0.2         share of `epochs` each combination trains\n";
    }
    return o.str();
}

std::string run_key(const ModelConfig& cfg) {
    return "n=" + std::to_string(cfg.feature_depth) + " l=" + std::to_string(cfg.conv_layers) +
           " f=" + join_sizes(cfg.filters, ';') + " k=" + std::to_string(cfg.kernel) +
           " r=" + std::to_string(cfg.scale) + " lr=" + format_real(cfg.lr) + " seed=" + std::to_string(cfg.seed) +
           " epochs=" + std::to_string(cfg.epochs) + " batch=" + std::to_string(cfg.batch_size) +
           " patch=" + std::to_string(cfg.patch_hw);
}

}  // namespace ecnn::cli
