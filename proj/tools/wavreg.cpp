#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wavreg/config.hpp"
#include "wavreg/errors.hpp"
#include "wavreg/experiments.hpp"

namespace {

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
    std::optional<long long> seed;
    std::optional<double> epsilon;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config_file, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", o.overrides, "override one key, as key=value (repeatable)");
    cmd->add_option("-o,--out", o.out, "output directory (out.dir)");
    cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint path");
    cmd->add_option("--seed", o.seed, "global seed");
    cmd->add_option("--epsilon", o.epsilon, "attack budget in [0,1] units (attack.epsilon)");
}

wavreg::RunConfig resolve(const CommonOptions& o) {
    wavreg::RunConfig cfg = o.config_file.empty() ? wavreg::RunConfig{} : wavreg::load_run_config(o.config_file);
    wavreg::apply_overrides(cfg, o.overrides);
    if (o.out) cfg.set("out.dir", *o.out);
    if (o.checkpoint) cfg.set("checkpoint", *o.checkpoint);
    if (o.seed) cfg.set("seed", std::to_string(*o.seed));
    if (o.epsilon) {
        std::ostringstream os;
        os << *o.epsilon;
        cfg.set("attack.epsilon", os.str());
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wavelet-regularized adversarial training toolkit"};
    app.require_subcommand(1);
    CommonOptions opts;
    std::function<int(const wavreg::RunConfig&, std::ostream&)> run;

    auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help, auto fn) {
        auto* cmd = parent->add_subcommand(name, help);
        add_common(cmd, opts);
        cmd->callback([&run, fn] { run = fn; });
    };
    leaf(&app, "train", "adversarially train a model; writes history.csv and a checkpoint", wavreg::command_train);
    leaf(&app, "eval", "clean and white-box robust accuracy of a checkpoint", wavreg::command_eval);
    leaf(&app, "attack", "run attack.kind (none|fgsm|pgd|mim|cw|nes|all) against a checkpoint",
         wavreg::command_attack);
    leaf(&app, "heatmap", "Fourier heat map of a checkpoint (CSV + PGM)", wavreg::command_heatmap);
    leaf(&app, "gradcam", "Grad-CAM map for one test image (CSV + PGM)", wavreg::command_gradcam);
    auto* check = app.add_subcommand("check", "numerical self-checks");
    check->require_subcommand(1);
    leaf(check, "wavelet", "reconstruction, Parseval and WAP Lipschitz checks on all banks",
         wavreg::command_check_wavelet);
    leaf(check, "theorems", "coefficient decay and local regularity checks", wavreg::command_check_theorems);
    auto* sweep = app.add_subcommand("sweep", "multi-model experiments");
    sweep->require_subcommand(1);
    leaf(sweep, "bases", "train and evaluate one model per base in sweep.bases", wavreg::command_sweep_bases);
    leaf(sweep, "ablation", "WAP-enabled vs WAP-disabled twins with paired deltas", wavreg::command_sweep_ablation);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : wavreg::exit_code(wavreg::ErrorCategory::usage);
    }

    try {
        const auto cfg = resolve(opts);
        return run(cfg, std::cout);
    } catch (const wavreg::Error& e) {
        std::cerr << "error [" << wavreg::category_name(e.category()) << "]: " << e.what() << '\n';
        return wavreg::exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
