#include <CLI11.hpp>

#include <iostream>

#include "wafertex/commands.hpp"

namespace {

void add_common(CLI::App* sub, wafertex::CommandArgs& args) {
    sub->add_option("-c,--config", args.config, "key=value configuration file");
    sub->add_option("-s,--set", args.overrides, "override a config key (key=value), repeatable")
        ->allow_extra_args(false);
    sub->add_option("-o,--out", args.out_dir, "output directory")->required();
    sub->add_option("-j,--threads", args.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("inputs", args.inputs, "input files");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Texture-aware wafer defect segmentation toolkit"};
    app.require_subcommand(1);
    wafertex::CommandArgs args;
    const std::pair<const char*, const char*> commands[] = {
        {"gen", "generate synthetic patterned-wafer scenes with ground truth"},
        {"enhance", "periodic-texture contrast enhancement of PFM images or tensor files"},
        {"muse", "run a seeded multi-scale context block on a feature map"},
        {"fuse", "P2 high-resolution fusion or tri-domain fusion of feature maps"},
        {"eval-seg", "mask-IoU metrics from prediction and ground-truth record files"},
        {"eval-det", "box-IoU metrics from prediction and ground-truth record files"},
        {"gradcheck", "finite-difference gradient check of an operator"},
        {"count", "parameter and FLOP count of a layer table"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    args.name = app.get_subcommands().front()->get_name();
    try {
        wafertex::run_command(args);
    } catch (...) {
        return wafertex::exit_code_for_current_exception();
    }
    return 0;
}
