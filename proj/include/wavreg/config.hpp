#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wavreg/attacks.hpp"
#include "wavreg/evaluation.hpp"
#include "wavreg/model.hpp"
#include "wavreg/training.hpp"

namespace wavreg {

// Flat key=value settings. Every known key is present with its default, so
// the resolved configuration is always complete.
class RunConfig {
public:
    RunConfig();

    // Throws ConfigError naming the key when it is unknown.
    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    int get_int(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;

    // Lines of "key=value" in key order.
    std::string serialize() const;
    const std::map<std::string, std::string>& values() const { return values_; }
    bool operator==(const RunConfig& other) const { return values_ == other.values_; }

private:
    std::map<std::string, std::string> values_;
};

// "key = value" lines; '#' starts a comment. Unknown or repeated keys and
// lines without '=' are ConfigErrors naming the line.
RunConfig parse_run_config(std::string_view text, const std::string& origin = "config");
RunConfig load_run_config(const std::filesystem::path& path);
// Applies "key=value" overrides in order.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

ModelConfig model_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
AttackConfig attack_config(const RunConfig& cfg);
AttackKind attack_kind(const RunConfig& cfg);
NesConfig nes_config(const RunConfig& cfg);
HeatMapOptions heatmap_options(const RunConfig& cfg);

}  // namespace wavreg
