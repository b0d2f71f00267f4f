#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ecnn/data.hpp"
#include "ecnn/metrics.hpp"
#include "run_config.hpp"

namespace ecnn::cli {

/// manifest.csv row. Relative paths are relative to the manifest's directory.
struct ManifestRow {
    std::string scan_id;
    std::filesystem::path hr_path;
    std::filesystem::path lr_path;
    std::size_t scale = 0;
};

/// Header `scan_id,hr_path,lr_path,r`. Paths come back resolved.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
std::string manifest_csv(const std::vector<ManifestRow>& rows);

struct Scan {
    std::string id;
    Volume hr;  // cropped to a multiple of the scale
    Volume lr;
};

std::vector<Scan> load_scans(const std::vector<ManifestRow>& rows);

/// Exit codes.
enum Exit : int { ok = 0, failure = 1, config_error = 2, data_error = 3, numeric_error = 4 };

/// Maps an in-flight exception onto an exit code and prints it to `err`.
int report_exception(std::ostream& err);

struct SynthOptions {
    std::filesystem::path out_dir;
    std::size_t count = 12;
    SyntheticKind kind = SyntheticKind::spheres;
    std::size_t depth = 48, height = 96, width = 96;
    std::uint64_t seed = 0;
};
/// Writes scan_000.svol, scan_001.svol, ... Volume i uses Rng(seed)'s i-th draw as its seed.
std::vector<std::filesystem::path> cmd_synth(const SynthOptions& opt, std::ostream& out);

struct SimulateOptions {
    std::filesystem::path in_dir;
    std::filesystem::path out_dir;
    std::size_t scale = 3;
};
/// One LR .svol per input (same file name) plus manifest.csv in out_dir.
/// Nothing is left behind on failure.
std::vector<ManifestRow> cmd_simulate(const SimulateOptions& opt, std::ostream& out);

struct TrainOutcome {
    TrainResult result;
    std::filesystem::path checkpoint;
    std::filesystem::path report;
};
/// Writes out_dir/checkpoint.bin and out_dir/train_report.csv.
TrainOutcome cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& log);

/// `epoch,train_loss,val_psnr_db`, epochs numbered from 1.
std::string train_report_csv(const TrainReport& report);

struct InferCommand {
    std::filesystem::path checkpoint;
    std::filesystem::path input;     // one LR volume, or
    std::filesystem::path manifest;  // every LR volume of a manifest
    std::filesystem::path out;       // file, or directory in manifest mode
    std::size_t tile = 64;
};
void cmd_infer(const InferCommand& opt, std::ostream& out);

struct EvaluateOptions {
    std::filesystem::path manifest;        // multi-scan mode
    std::vector<std::string> scans;        // subset of the manifest; empty: all
    std::filesystem::path hr;              // single-scan mode
    std::filesystem::path lr;              // single-scan bicubic source
    std::vector<std::string> methods;      // name=path (file, or directory of <scan_id>.svol)
    bool bicubic = false;
    std::filesystem::path out_dir;
};
struct EvaluateOutcome {
    std::vector<SliceSample> samples;
    std::vector<TTestRow> tests;
};
/// Writes out_dir/metrics.csv and out_dir/ttest.csv. Slices where either
/// method's PSNR is +inf are left out of that PSNR t-test.
EvaluateOutcome cmd_evaluate(const EvaluateOptions& opt, std::ostream& out);

/// Writes out_dir/grid_results.csv; out_dir/grid_journal.csv records every
/// finished combination and lets a rerun skip them.
std::vector<GridResult> cmd_gridsearch(const RunConfig& rc, std::ostream& out, std::ostream& log);

}  // namespace ecnn::cli
