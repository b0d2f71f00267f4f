#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "ecnn/error.hpp"
#include "ecnn/io.hpp"
#include "ecnn/model.hpp"

namespace ecnn::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void check_csv_field(const std::string& s, const std::string& what) {
    if (s.find_first_of(",\"\n\r") != std::string::npos) {
        throw DataError(what + " '" + s + "' contains a comma, quote or newline");
    }
}

std::string csv_safe(std::string s) {
    for (char& c : s) {
        if (c == ',' || c == '"') c = ';';
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

// Removes files written so far unless commit() was called.
class OutputGuard {
public:
    ~OutputGuard() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& p : written_) fs::remove(p, ec);
    }
    void add(const fs::path& p) { written_.push_back(p); }
    void commit() { committed_ = true; }

private:
    std::vector<fs::path> written_;
    bool committed_ = false;
};

struct Split {
    std::vector<const Scan*> train;
    std::vector<const Scan*> val;
};

Split choose_split(const RunConfig& rc, const std::vector<Scan>& scans) {
    std::map<std::string, const Scan*> by_id;
    for (const auto& s : scans) by_id[s.id] = &s;
    std::vector<std::string> train_ids = rc.train_scans, val_ids = rc.val_scans;
    if (train_ids.empty()) {
        std::vector<std::string> ids;
        for (const auto& s : scans) ids.push_back(s.id);
        if (ids.size() < 4) {
            throw DataError("the default fold split needs at least 4 scans (manifest has " +
                            std::to_string(ids.size()) + "); set train_scans and val_scans");
        }
        const FoldAssignment folds = split_folds(ids, rc.model.seed);
        train_ids = folds.train();
        val_ids = folds.validation();
    }
    Split s;
    std::set<std::string> seen;
    for (auto [ids, dst] : {std::pair{&train_ids, &s.train}, std::pair{&val_ids, &s.val}}) {
        for (const auto& id : *ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) throw DataError("scan '" + id + "' is not in the manifest");
            if (!seen.insert(id).second) throw DataError("scan '" + id + "' is listed twice");
            dst->push_back(it->second);
        }
    }
    return s;
}

std::vector<TrainingPair> pairs_of(const std::vector<const Scan*>& scans, const ModelConfig& cfg) {
    std::vector<TrainingPair> out;
    for (const Scan* s : scans) {
        auto p = make_pairs(s->hr, s->lr, cfg, s->id);
        std::move(p.begin(), p.end(), std::back_inserter(out));
    }
    return out;
}

void check_scale(const std::vector<Scan>& scans, const ModelConfig& cfg) {
    for (const auto& s : scans) {
        if (s.lr.height() * cfg.scale != s.hr.height() || s.lr.width() * cfg.scale != s.hr.width()) {
            throw DataError("scan '" + s.id + "': LR " + s.lr.data.shape().to_string() + " and HR " +
                            s.hr.data.shape().to_string() + " do not match scale r=" + std::to_string(cfg.scale));
        }
    }
}

std::string format_fixed(double v, int digits) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << v;
    return o.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ManifestRow> read_manifest(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "scan_id,hr_path,lr_path,r") {
        throw HeaderError(path.string() + ": expected header 'scan_id,hr_path,lr_path,r'");
    }
    const fs::path base = path.parent_path();
    std::vector<ManifestRow> rows;
    std::set<std::string> ids;
    for (std::size_t n = 2; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        std::size_t r = 0;
        if (f.size() != 4 || f[0].empty() || std::sscanf(f[3].c_str(), "%zu", &r) != 1 || r < 2) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": malformed row '" + line + "'");
        }
        if (!ids.insert(f[0]).second) throw DataError(path.string() + ": duplicate scan id '" + f[0] + "'");
        rows.push_back({f[0], resolve(base, f[1]), resolve(base, f[2]), r});
    }
    if (rows.empty()) throw DataError(path.string() + ": manifest lists no scans");
    return rows;
}

std::string manifest_csv(const std::vector<ManifestRow>& rows) {
    std::string s = "scan_id,hr_path,lr_path,r\n";
    for (const auto& r : rows) {
        check_csv_field(r.scan_id, "scan id");
        check_csv_field(r.hr_path.string(), "path");
        check_csv_field(r.lr_path.string(), "path");
        s += r.scan_id + "," + r.hr_path.string() + "," + r.lr_path.string() + "," + std::to_string(r.scale) + "\n";
    }
    return s;
}

std::vector<Scan> load_scans(const std::vector<ManifestRow>& rows) {
    std::vector<Scan> scans;
    for (const auto& r : rows) {
        Scan s{r.scan_id, crop_to_multiple(load_volume(r.hr_path), r.scale), load_volume(r.lr_path)};
        if (s.lr.depth() != s.hr.depth() || s.lr.height() * r.scale != s.hr.height() ||
            s.lr.width() * r.scale != s.hr.width()) {
            throw DataError("scan '" + r.scan_id + "': LR " + s.lr.data.shape().to_string() +
                            " is not the HR " + s.hr.data.shape().to_string() + " reduced by " +
                            std::to_string(r.scale));
        }
        scans.push_back(std::move(s));
    }
    return scans;
}

int report_exception(std::ostream& err) {
    try {
        throw;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return numeric_error;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return data_error;
    } catch (const ShapeError& e) {
        err << "data error: " << e.what() << "\n";
        return data_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return failure;
    }
}

// ---------------------------------------------------------------------------

std::vector<fs::path> cmd_synth(const SynthOptions& opt, std::ostream& out) {
    if (opt.count == 0) throw ConfigError("synth: --count must be >= 1");
    ensure_dir(opt.out_dir);
    OutputGuard guard;
    Rng seeds(opt.seed);
    std::vector<fs::path> paths;
    for (std::size_t i = 0; i < opt.count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scan_%03zu.svol", i);
        const fs::path p = opt.out_dir / name;
        save_volume(gen_synthetic(opt.kind, opt.depth, opt.height, opt.width, seeds.next_u64()), p);
        guard.add(p);
        paths.push_back(p);
    }
    guard.commit();
    out << "wrote " << paths.size() << " volumes to " << opt.out_dir.string() << "\n";
    return paths;
}

std::vector<ManifestRow> cmd_simulate(const SimulateOptions& opt, std::ostream& out) {
    if (opt.scale < 2) throw ConfigError("simulate: --r must be >= 2");
    if (!fs::is_directory(opt.in_dir)) throw DataError("input directory not found: " + opt.in_dir.string());
    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(opt.in_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".svol") inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty()) throw DataError("no volumes found in " + opt.in_dir.string() + " (expected *.svol)");
    ensure_dir(opt.out_dir);
    if (fs::equivalent(opt.in_dir, opt.out_dir)) throw ConfigError("simulate: output directory must differ from input");

    OutputGuard guard;
    std::vector<ManifestRow> rows;
    for (const auto& in : inputs) {
        const Volume lr = downsample_axial(load_volume(in), opt.scale);
        const fs::path dst = opt.out_dir / in.filename();
        save_volume(lr, dst);
        guard.add(dst);
        rows.push_back({in.stem().string(), fs::absolute(in).lexically_normal(), in.filename(), opt.scale});
    }
    const fs::path manifest = opt.out_dir / "manifest.csv";
    atomic_write(manifest, manifest_csv(rows));
    guard.commit();
    out << "simulated " << rows.size() << " LR volumes at r=" << opt.scale << "; manifest " << manifest.string()
        << "\n";
    return rows;
}

std::string train_report_csv(const TrainReport& report) {
    std::string s = "epoch,train_loss,val_psnr_db\n";
    for (const auto& e : report.epochs) {
        s += std::to_string(e.epoch + 1) + "," + format_real(e.train_loss) + "," + format_real(e.val_psnr) + "\n";
    }
    return s;
}

TrainOutcome cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& log) {
    const auto scans = load_scans(read_manifest(rc.manifest));
    check_scale(scans, rc.model);
    const Split split = choose_split(rc, scans);
    ensure_dir(rc.out_dir);
    const auto train_pairs = pairs_of(split.train, rc.model);
    const auto val_pairs = pairs_of(split.val, rc.model);
    log << "training " << rc.model.arch_string() << " on " << train_pairs.size() << " pairs from "
        << split.train.size() << " scans, validating on " << val_pairs.size() << " pairs\n";

    TrainOutcome res;
    res.result = train(rc.model, train_pairs, val_pairs, [&](const EpochRecord& e) {
        log << "epoch " << e.epoch + 1 << "/" << rc.model.epochs << "  loss " << format_real(e.train_loss);
        if (!val_pairs.empty()) log << "  val PSNR " << format_fixed(e.val_psnr, 4) << " dB";
        log << "  (" << format_fixed(e.seconds, 1) << " s)\n";
    });
    res.checkpoint = rc.out_dir / "checkpoint.bin";
    res.report = rc.out_dir / "train_report.csv";
    save_checkpoint(res.checkpoint, rc.model, res.result.params);
    atomic_write(res.report, train_report_csv(res.result.report));
    out << "initial training loss: " << format_real(res.result.report.initial_loss) << "\n";
    if (val_pairs.empty())
        out << "final validation PSNR: n/a (no validation scans)\n";
    else
        out << "final validation PSNR: " << format_real(res.result.report.epochs.back().val_psnr) << " dB\n";
    return res;
}

void cmd_infer(const InferCommand& opt, std::ostream& out) {
    if (opt.input.empty() == opt.manifest.empty()) throw ConfigError("infer: give exactly one of --input, --manifest");
    const Checkpoint ck = load_checkpoint(opt.checkpoint);
    InferOptions io;
    io.tile = opt.tile;
    auto run = [&](const fs::path& src, const fs::path& dst) {
        const Volume lr = load_volume(src);
        if (lr.depth() < ck.cfg.feature_depth) {
            throw DataError("volume " + src.string() + " has shape " + lr.data.shape().to_string() +
                            " but the checkpoint (" + ck.cfg.arch_string() + ") needs at least " +
                            std::to_string(ck.cfg.feature_depth) + " slices");
        }
        const Volume sr = infer_volume(ck.params, ck.cfg, lr, io);
        save_volume(sr, dst);
        out << src.string() << " " << lr.data.shape().to_string() << " -> " << dst.string() << " "
            << sr.data.shape().to_string() << "\n";
    };
    if (!opt.input.empty()) {
        if (opt.out.has_parent_path()) ensure_dir(opt.out.parent_path());
        run(opt.input, opt.out);
        return;
    }
    const auto rows = read_manifest(opt.manifest);
    for (const auto& r : rows) {
        if (r.scale != ck.cfg.scale) {
            throw DataError("scan '" + r.scan_id + "' was simulated at r=" + std::to_string(r.scale) +
                            " but the checkpoint upscales by r=" + std::to_string(ck.cfg.scale));
        }
    }
    ensure_dir(opt.out);
    OutputGuard guard;
    for (const auto& r : rows) {
        const fs::path dst = opt.out / (r.scan_id + ".svol");
        run(r.lr_path, dst);
        guard.add(dst);
    }
    guard.commit();
}

EvaluateOutcome cmd_evaluate(const EvaluateOptions& opt, std::ostream& out) {
    if (opt.manifest.empty() == opt.hr.empty()) throw ConfigError("evaluate: give exactly one of --manifest, --hr");
    struct Method {
        std::string name;
        fs::path path;
    };
    std::vector<Method> methods;
    std::set<std::string> names;
    for (const auto& m : opt.methods) {
        const auto eq = m.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == m.size()) {
            throw ConfigError("evaluate: --method expects NAME=PATH, got '" + m + "'");
        }
        methods.push_back({m.substr(0, eq), m.substr(eq + 1)});
    }
    if (opt.bicubic) methods.insert(methods.begin(), {"bicubic", {}});
    for (const auto& m : methods) {
        check_csv_field(m.name, "method name");
        if (!names.insert(m.name).second) throw ConfigError("evaluate: method '" + m.name + "' given twice");
    }
    if (methods.empty()) throw ConfigError("evaluate: nothing to evaluate (add --method or --bicubic)");

    struct Item {
        std::string id;
        Volume hr;
        std::optional<Volume> lr;
        std::size_t scale = 0;
    };
    std::vector<Item> items;
    if (!opt.manifest.empty()) {
        auto rows = read_manifest(opt.manifest);
        if (!opt.scans.empty()) {
            std::vector<ManifestRow> kept;
            for (const auto& id : opt.scans) {
                const auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.scan_id == id; });
                if (it == rows.end()) throw DataError("scan '" + id + "' is not in the manifest");
                kept.push_back(*it);
            }
            rows = std::move(kept);
        }
        for (const auto& r : rows) {
            Item it{r.scan_id, crop_to_multiple(load_volume(r.hr_path), r.scale), std::nullopt, r.scale};
            if (opt.bicubic) it.lr = load_volume(r.lr_path);
            items.push_back(std::move(it));
        }
    } else {
        Item it{opt.hr.stem().string(), load_volume(opt.hr), std::nullopt, 0};
        if (opt.bicubic) {
            if (opt.lr.empty()) throw ConfigError("evaluate: --bicubic with --hr needs --lr");
            it.lr = load_volume(opt.lr);
            if (it.lr->height() == 0 || it.hr.height() % it.lr->height() != 0) {
                throw DataError("HR " + it.hr.data.shape().to_string() + " is not an integer multiple of LR " +
                                it.lr->data.shape().to_string());
            }
            it.scale = it.hr.height() / it.lr->height();
        }
        items.push_back(std::move(it));
    }

    EvaluateOutcome res;
    // values[method][k] over the flattened slice list
    std::vector<std::vector<double>> psnr_of(methods.size()), ssim_of(methods.size());
    for (const auto& item : items) {
        check_csv_field(item.id, "scan id");
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const auto& m = methods[mi];
            Volume v;
            if (m.name == "bicubic" && m.path.empty()) {
                v = bicubic_upsample(*item.lr, item.scale);
            } else {
                const fs::path p = fs::is_directory(m.path) ? m.path / (item.id + ".svol") : m.path;
                v = load_volume(p);
            }
            if (!(v.data.shape() == item.hr.data.shape())) {
                throw DataError("method '" + m.name + "' on scan '" + item.id + "' has shape " +
                                v.data.shape().to_string() + ", HR has " + item.hr.data.shape().to_string());
            }
            const std::size_t h = v.height(), w = v.width(), n = h * w;
            for (std::size_t z = 0; z < v.depth(); ++z) {
                const std::span<const float> a(v.slice(z), n), b(item.hr.slice(z), n);
                SliceSample s{item.id + ":" + std::to_string(z), m.name, psnr(a, b),
                              ssim(v.slice(z), item.hr.slice(z), h, w)};
                psnr_of[mi].push_back(s.psnr);
                ssim_of[mi].push_back(s.ssim);
                res.samples.push_back(std::move(s));
            }
        }
    }

    for (std::size_t a = 0; a < methods.size(); ++a) {
        for (std::size_t b = a + 1; b < methods.size(); ++b) {
            std::vector<double> pa, pb;
            for (std::size_t k = 0; k < psnr_of[a].size(); ++k) {
                if (std::isinf(psnr_of[a][k]) || std::isinf(psnr_of[b][k])) continue;
                pa.push_back(psnr_of[a][k]);
                pb.push_back(psnr_of[b][k]);
            }
            if (pa.size() >= 2) res.tests.push_back({methods[b].name, methods[a].name, "psnr", paired_t_test(pb, pa)});
            res.tests.push_back({methods[b].name, methods[a].name, "ssim", paired_t_test(ssim_of[b], ssim_of[a])});
        }
    }

    ensure_dir(opt.out_dir);
    OutputGuard guard;
    const fs::path metrics = opt.out_dir / "metrics.csv", tests = opt.out_dir / "ttest.csv";
    atomic_write(metrics, metrics_csv(res.samples));
    guard.add(metrics);
    atomic_write(tests, ttest_csv(res.tests));
    guard.commit();

    for (const auto& m : methods) {
        std::vector<SliceSample> mine;
        for (const auto& s : res.samples)
            if (s.method == m.name) mine.push_back(s);
        const Aggregate g = aggregate(mine);
        out << m.name << ": PSNR " << format_fixed(g.psnr.mean, 4) << " +- " << format_fixed(g.psnr.sd, 4)
            << " dB, SSIM " << format_fixed(g.ssim.mean, 4) << " +- " << format_fixed(g.ssim.sd, 4) << " over "
            << g.ssim.count << " slices";
        if (g.psnr.excluded) out << " (" << g.psnr.excluded << " identical slices excluded from PSNR)";
        out << "\n";
    }
    for (const auto& t : res.tests) {
        out << t.method_a << " - " << t.method_b << " " << t.metric << ": mean diff "
            << format_real(t.result.mean_diff) << ", t = " << format_real(t.result.t_statistic)
            << ", df = " << t.result.degrees_of_freedom << ", p = " << format_real(t.result.p_value) << "\n";
    }
    return res;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kJournalHeader = "key,ok,val_psnr_db,error";

std::map<std::string, GridResult> read_journal(const fs::path& path) {
    std::map<std::string, GridResult> done;
    if (!fs::exists(path)) return done;
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != kJournalHeader) throw HeaderError(path.string() + ": not a grid journal");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4 || (f[1] != "0" && f[1] != "1")) throw DataError(path.string() + ": bad row '" + line + "'");
        GridResult r;
        r.ok = f[1] == "1";
        r.val_psnr = f[2] == "inf" ? kPsnrIdentical : std::strtod(f[2].c_str(), nullptr);
        r.error = f[3];
        done[f[0]] = r;
    }
    return done;
}

std::string journal_row(const std::string& key, const GridResult& r) {
    return key + "," + (r.ok ? "1" : "0") + "," + format_real(r.val_psnr) + "," + csv_safe(r.error) + "\n";
}

std::string grid_results_csv(const std::vector<GridResult>& results) {
    std::string s = "rank,n,l,f,k,r,val_psnr_db,status,error\n";
    for (const auto& r : results) {
        std::string f;
        for (std::size_t i = 0; i < r.cfg.filters.size(); ++i) f += (i ? ";" : "") + std::to_string(r.cfg.filters[i]);
        s += std::to_string(r.rank) + "," + std::to_string(r.cfg.feature_depth) + "," +
             std::to_string(r.cfg.conv_layers) + "," + f + "," + std::to_string(r.cfg.kernel) + "," +
             std::to_string(r.cfg.scale) + "," + (r.ok ? format_real(r.val_psnr) : "") + "," +
             (r.ok ? "ok" : "failed") + "," + csv_safe(r.error) + "\n";
    }
    return s;
}

}  // namespace

std::vector<GridResult> cmd_gridsearch(const RunConfig& rc, std::ostream& out, std::ostream& log) {
    const auto configs = rc.grid.expand(rc.model);
    const auto scans = load_scans(read_manifest(rc.manifest));
    check_scale(scans, rc.model);
    const Split split = choose_split(rc, scans);
    if (split.val.empty()) throw DataError("grid search needs validation scans");
    ensure_dir(rc.out_dir);

    const fs::path journal = rc.out_dir / "grid_journal.csv";
    const auto done = read_journal(journal);
    std::string journal_text = kJournalHeader + std::string("\n");
    if (fs::exists(journal)) journal_text = read_file(journal);

    auto key_of = [&](const ModelConfig& c) {
        ModelConfig run = c;
        run.epochs = grid_epochs(c, rc.grid_fraction);
        return run_key(run);
    };
    log << "grid search over " << configs.size() << " combinations, " << grid_epochs(rc.model, rc.grid_fraction)
        << " epochs each\n";
    auto results = grid_search(
        rc.grid, rc.model,
        [&](const ModelConfig& c) {
            log << "training " << c.arch_string() << "\n";
            return GridData{pairs_of(split.train, c), pairs_of(split.val, c)};
        },
        rc.grid_fraction,
        [&](const ModelConfig& c) -> std::optional<GridResult> {
            const auto it = done.find(key_of(c));
            if (it == done.end()) return std::nullopt;
            log << "skipping " << c.arch_string() << " (journal)\n";
            GridResult r = it->second;
            r.cfg = c;
            return r;
        },
        [&](const GridResult& r) {
            journal_text += journal_row(key_of(r.cfg), r);
            atomic_write(journal, journal_text);
            log << r.cfg.arch_string() << ": "
                << (r.ok ? "val PSNR " + format_fixed(r.val_psnr, 4) + " dB" : "failed: " + r.error) << "\n";
        });
    const fs::path csv = rc.out_dir / "grid_results.csv";
    atomic_write(csv, grid_results_csv(results));
    for (const auto& r : results) {
        out << r.rank << ". " << r.cfg.arch_string() << "  "
            << (r.ok ? format_fixed(r.val_psnr, 4) + " dB" : "failed: " + r.error) << "\n";
    }
    return results;
}

}  // namespace ecnn::cli
