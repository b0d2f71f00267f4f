#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "ecnn/error.hpp"

using namespace ecnn;
using namespace ecnn::cli;

namespace {

RunConfig configure(const std::string& path, Command command, const std::optional<std::uint64_t>& seed,
                    const std::string& out) {
    RunConfig rc = load_run_config(path, command);
    if (seed) rc.model.seed = *seed;
    if (!out.empty()) rc.out_dir = out;
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3-D convolutional super-resolution of axial CT slices: data simulation, training, inference, "
                 "evaluation and grid search."};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");

    SynthOptions synth;
    std::string synth_kind = "spheres", synth_size = "48x96x96";
    auto* c_synth = app.add_subcommand("synth", "Write reproducible synthetic HR volumes (.svol)");
    c_synth->add_option("--out", synth.out_dir, "Output directory")->required();
    c_synth->add_option("--count", synth.count, "Number of volumes")->capture_default_str();
    c_synth->add_option("--kind", synth_kind, "spheres | ramps | shepp-logan")->capture_default_str();
    c_synth->add_option("--size", synth_size, "DxHxW, each >= 16")->capture_default_str();
    c_synth->add_option("--seed", synth.seed, "Seed")->capture_default_str();

    SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "Reduce every HR .svol in a directory by r in-plane (bicubic)");
    c_sim->add_option("--in", sim.in_dir, "Directory of HR .svol volumes")->required();
    c_sim->add_option("--out", sim.out_dir, "Output directory for LR volumes and manifest.csv")->required();
    c_sim->add_option("--r", sim.scale, "Downsampling factor")->capture_default_str();

    std::string train_config, train_out;
    std::optional<std::uint64_t> train_seed;
    auto* c_train = app.add_subcommand("train", "Train a model; writes checkpoint.bin and train_report.csv");
    c_train->add_option("--config", train_config, "Config file")->required();
    c_train->add_option("--seed", train_seed, "Override the config seed");
    c_train->add_option("--out", train_out, "Override out_dir");
    c_train->footer(config_reference(Command::train));

    InferCommand infer;
    auto* c_infer = app.add_subcommand("infer", "Super-resolve LR volumes with a checkpoint");
    c_infer->add_option("--checkpoint", infer.checkpoint, "checkpoint.bin from train")->required();
    auto* in_opt = c_infer->add_option("--input", infer.input, "One LR .svol");
    auto* man_opt = c_infer->add_option("--manifest", infer.manifest, "Every LR volume of a manifest");
    in_opt->excludes(man_opt);
    c_infer->add_option("--out", infer.out, "Output .svol (--input) or directory (--manifest)")->required();
    c_infer->add_option("--tile", infer.tile, "LR tile core extent; 0 = whole slices")->capture_default_str();

    EvaluateOptions eval;
    std::string eval_scans;
    auto* c_eval = app.add_subcommand("evaluate", "Per-slice PSNR/SSIM against HR plus paired t-tests");
    auto* e_man = c_eval->add_option("--manifest", eval.manifest, "Manifest; HR and LR paths per scan");
    auto* e_hr = c_eval->add_option("--hr", eval.hr, "Single HR .svol");
    e_man->excludes(e_hr);
    c_eval->add_option("--lr", eval.lr, "LR .svol for --bicubic with --hr")->needs(e_hr);
    c_eval->add_option("--scans", eval_scans, "Comma-separated subset of manifest scans")->needs(e_man);
    c_eval->add_option("--method", eval.methods,
                       "NAME=PATH; PATH is a .svol, or with --manifest a directory of <scan_id>.svol");
    c_eval->add_flag("--bicubic", eval.bicubic, "Add the bicubic baseline computed from the LR volumes");
    c_eval->add_option("--out", eval.out_dir, "Directory for metrics.csv and ttest.csv")->required();

    std::string grid_config, grid_out;
    std::optional<std::uint64_t> grid_seed;
    auto* c_grid = app.add_subcommand("gridsearch", "Rank hyperparameter combinations by validation PSNR");
    c_grid->add_option("--config", grid_config, "Config file")->required();
    c_grid->add_option("--seed", grid_seed, "Override the config seed");
    c_grid->add_option("--out", grid_out, "Override out_dir");
    c_grid->footer(config_reference(Command::gridsearch));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::config_error;
    }

    try {
        if (*c_synth) {
            synth.kind = parse_synthetic_kind(synth_kind);
            unsigned long d = 0, h = 0, w = 0;
            char x1 = 0, x2 = 0;
            std::istringstream in(synth_size);
            if (!(in >> d >> x1 >> h >> x2 >> w) || x1 != 'x' || x2 != 'x' || !in.eof()) {
                throw ConfigError("--size expects DxHxW, got '" + synth_size + "'");
            }
            synth.depth = d;
            synth.height = h;
            synth.width = w;
            cmd_synth(synth, std::cout);
        } else if (*c_sim) {
            cmd_simulate(sim, std::cout);
        } else if (*c_train) {
            cmd_train(configure(train_config, Command::train, train_seed, train_out), std::cout, std::cerr);
        } else if (*c_infer) {
            cmd_infer(infer, std::cout);
        } else if (*c_eval) {
            if (!eval_scans.empty()) {
                std::istringstream in(eval_scans);
                for (std::string id; std::getline(in, id, ',');) eval.scans.push_back(id);
            }
            cmd_evaluate(eval, std::cout);
        } else if (*c_grid) {
            cmd_gridsearch(configure(grid_config, Command::gridsearch, grid_seed, grid_out), std::cout, std::cerr);
        }
    } catch (...) {
        return report_exception(std::cerr);
    }
    return Exit::ok;
}
