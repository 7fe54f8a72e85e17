#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "wavreg/config.hpp"
#include "wavreg/data.hpp"
#include "wavreg/errors.hpp"
#include "wavreg/model.hpp"
#include "wavreg/training.hpp"

namespace wavreg {

// Name of the environment variable holding the CIFAR-10 binary directory.
inline constexpr const char* kDataRootVariable = "WAVREG_DATA_ROOT";

struct DataBundle {
    Dataset train, val, test;
};

// data.source=synthetic draws train and test sets from distinct seeds;
// data.source=cifar10 reads data_batch_{1..5}.bin and test_batch.bin under
// $WAVREG_DATA_ROOT (or its cifar-10-batches-bin subdirectory).
DataBundle load_data(const RunConfig& cfg);

struct RobustnessRow {
    double clean = 0.0, fgsm = 0.0, pgd = 0.0, mim = 0.0, cw = 0.0;
};
RobustnessRow evaluate_robustness(Model& model, const Dataset& data, const AttackConfig& attack);

// Every command writes its outputs and the resolved config (config.txt) into
// out.dir, and logs progress to `log`. The return value is the exit status.
int command_train(const RunConfig& cfg, std::ostream& log);
int command_eval(const RunConfig& cfg, std::ostream& log);
int command_attack(const RunConfig& cfg, std::ostream& log);
int command_heatmap(const RunConfig& cfg, std::ostream& log);
int command_gradcam(const RunConfig& cfg, std::ostream& log);
int command_check_wavelet(const RunConfig& cfg, std::ostream& log);
int command_check_theorems(const RunConfig& cfg, std::ostream& log);
int command_sweep_bases(const RunConfig& cfg, std::ostream& log);
// WAP-enabled and WAP-disabled twins from one seed, with paired deltas.
int command_sweep_ablation(const RunConfig& cfg, std::ostream& log);

// Exit status per error category; 0 is success, 1 an unclassified failure.
int exit_code(ErrorCategory category);

}  // namespace wavreg
