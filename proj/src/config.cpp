#include "wavreg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "wavreg/errors.hpp"

namespace wavreg {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Shortest text that reads back to the same float.
std::string fmt(float v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

}  // namespace

RunConfig::RunConfig() {
    const ModelConfig m;
    const TrainConfig t;
    const AttackConfig a;
    const NesConfig n;
    const HeatMapOptions h;
    values_ = {
        {"seed", "0"},
        {"out.dir", "out"},
        {"checkpoint", ""},

        {"data.source", "synthetic"},
        {"data.synthetic_classes", "10"},
        {"data.train_samples", "2000"},
        {"data.test_samples", "500"},
        {"data.val_fraction", "0.1"},

        {"model.depth", std::to_string(m.depth)},
        {"model.width", std::to_string(m.width)},
        {"model.num_classes", std::to_string(m.num_classes)},
        {"model.wavelet_base", m.wavelet_base},
        {"model.wap_position", std::string(to_string(m.wap_position))},
        {"model.pooling_variant", std::string(to_string(m.pooling_variant))},
        {"model.lpf_match_scale", m.lpf_match_scale ? "true" : "false"},

        {"train.epochs", std::to_string(t.epochs)},
        {"train.batch_size", std::to_string(t.batch_size)},
        {"train.lr", fmt(t.lr_initial)},
        {"train.lr_milestones", join_ints(t.lr_milestones)},
        {"train.lr_decay", fmt(t.lr_decay)},
        {"train.momentum", fmt(t.momentum)},
        {"train.weight_decay", fmt(t.weight_decay)},
        {"train.adversarial", t.adversarial ? "true" : "false"},
        {"train.early_stop_patience", std::to_string(t.early_stop_patience)},
        {"train.robust_val_samples", std::to_string(t.robust_val_samples)},
        {"train.augment_flip", "false"},
        {"train.augment_crop", "false"},
        {"train.attack.epsilon", fmt(t.train_attack.epsilon)},
        {"train.attack.step_size", fmt(t.train_attack.step_size)},
        {"train.attack.steps", std::to_string(t.train_attack.steps)},
        {"train.attack.random_init", t.train_attack.random_init ? "true" : "false"},

        {"attack.kind", "pgd"},
        {"attack.epsilon", fmt(a.epsilon)},
        {"attack.step_size", fmt(a.step_size)},
        {"attack.steps", std::to_string(a.steps)},
        {"attack.random_init", a.random_init ? "true" : "false"},
        {"attack.restarts", std::to_string(a.restarts)},
        {"attack.decay", fmt(a.decay)},
        {"attack.kappa", fmt(a.kappa)},

        {"nes.epsilon", fmt(n.epsilon)},
        {"nes.fd_eta", fmt(n.fd_eta)},
        {"nes.lr", fmt(n.lr)},
        {"nes.max_queries", std::to_string(n.max_queries)},
        {"nes.samples_per_step", std::to_string(n.samples_per_step)},
        {"nes.samples", "20"},

        {"heatmap.eps_f", fmt(static_cast<float>(h.eps_f))},
        {"heatmap.samples_per_cell", std::to_string(h.samples_per_cell)},
        {"heatmap.rows", "0"},
        {"heatmap.cols", "0"},

        {"gradcam.index", "0"},
        {"gradcam.class", "-1"},

        {"sweep.bases", "haar,db5,sym4,coif4,bior3.1,rbio2.2"},
    };
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

int RunConfig::get_int(const std::string& key) const {
    const auto& v = get(key);
    try {
        std::size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
}

std::size_t RunConfig::get_size(const std::string& key) const {
    const int v = get_int(key);
    if (v < 0) throw ConfigError("'" + key + "' must be >= 0, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
}

double RunConfig::get_double(const std::string& key) const {
    const auto& v = get(key);
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream is(get(key));
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : get_list(key)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("'" + key + "' expects a comma-separated integer list, got '" + get(key) + "'");
        }
    }
    return out;
}

std::string RunConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

RunConfig parse_run_config(std::string_view text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream is{std::string(text)};
    std::string line;
    std::map<std::string, int> seen;
    int number = 0;
    while (std::getline(is, line)) {
        ++number;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto where = origin + ":" + std::to_string(number);
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + body + "'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (auto [it, fresh] = seen.emplace(key, number); !fresh)
            throw ConfigError(where + ": key '" + key + "' repeats line " + std::to_string(it->second));
        try {
            cfg.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_run_config(os.str(), path.string());
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not key=value");
        cfg.set(trim(std::string_view(item).substr(0, eq)), trim(std::string_view(item).substr(eq + 1)));
    }
}

ModelConfig model_config(const RunConfig& cfg) {
    ModelConfig m;
    m.depth = cfg.get_int("model.depth");
    m.width = cfg.get_int("model.width");
    m.num_classes = cfg.get_int("model.num_classes");
    const auto& base = cfg.get("model.wavelet_base");
    m.wavelet_base = base == "none" ? "" : base;
    m.wap_position = parse_wap_position(cfg.get("model.wap_position"));
    m.pooling_variant = parse_pooling_variant(cfg.get("model.pooling_variant"));
    m.lpf_match_scale = cfg.get_bool("model.lpf_match_scale");
    m.validate();
    return m;
}

TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig t;
    t.epochs = cfg.get_int("train.epochs");
    t.batch_size = cfg.get_size("train.batch_size");
    t.lr_initial = static_cast<float>(cfg.get_double("train.lr"));
    t.lr_milestones = cfg.get_int_list("train.lr_milestones");
    t.lr_decay = static_cast<float>(cfg.get_double("train.lr_decay"));
    t.momentum = static_cast<float>(cfg.get_double("train.momentum"));
    t.weight_decay = static_cast<float>(cfg.get_double("train.weight_decay"));
    t.adversarial = cfg.get_bool("train.adversarial");
    t.early_stop_patience = cfg.get_int("train.early_stop_patience");
    t.robust_val_samples = cfg.get_size("train.robust_val_samples");
    t.augment_flip = cfg.get_bool("train.augment_flip");
    t.augment_crop = cfg.get_bool("train.augment_crop");
    t.train_attack.epsilon = static_cast<float>(cfg.get_double("train.attack.epsilon"));
    t.train_attack.step_size = static_cast<float>(cfg.get_double("train.attack.step_size"));
    t.train_attack.steps = cfg.get_int("train.attack.steps");
    t.train_attack.random_init = cfg.get_bool("train.attack.random_init");
    t.seed = static_cast<std::uint64_t>(cfg.get_size("seed"));
    t.validate();
    return t;
}

AttackConfig attack_config(const RunConfig& cfg) {
    AttackConfig a;
    a.epsilon = static_cast<float>(cfg.get_double("attack.epsilon"));
    a.step_size = static_cast<float>(cfg.get_double("attack.step_size"));
    a.steps = cfg.get_int("attack.steps");
    a.random_init = cfg.get_bool("attack.random_init");
    a.restarts = cfg.get_int("attack.restarts");
    a.decay = static_cast<float>(cfg.get_double("attack.decay"));
    a.kappa = static_cast<float>(cfg.get_double("attack.kappa"));
    a.seed = static_cast<std::uint64_t>(cfg.get_size("seed"));
    a.validate();
    return a;
}

AttackKind attack_kind(const RunConfig& cfg) {
    try {
        return parse_attack_kind(cfg.get("attack.kind"));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("attack.kind: ") + e.what());
    }
}

NesConfig nes_config(const RunConfig& cfg) {
    NesConfig n;
    n.epsilon = static_cast<float>(cfg.get_double("nes.epsilon"));
    n.fd_eta = static_cast<float>(cfg.get_double("nes.fd_eta"));
    n.lr = static_cast<float>(cfg.get_double("nes.lr"));
    n.max_queries = cfg.get_size("nes.max_queries");
    n.samples_per_step = cfg.get_size("nes.samples_per_step");
    n.seed = static_cast<std::uint64_t>(cfg.get_size("seed"));
    n.validate();
    return n;
}

HeatMapOptions heatmap_options(const RunConfig& cfg) {
    HeatMapOptions h;
    h.eps_f = cfg.get_double("heatmap.eps_f");
    h.samples_per_cell = cfg.get_size("heatmap.samples_per_cell");
    h.rows = cfg.get_size("heatmap.rows");
    h.cols = cfg.get_size("heatmap.cols");
    h.seed = static_cast<std::uint64_t>(cfg.get_size("seed"));
    if (!(h.eps_f > 0.0)) throw ConfigError("heatmap.eps_f must be > 0");
    if (h.samples_per_cell == 0) throw ConfigError("heatmap.samples_per_cell must be >= 1");
    return h;
}

}  // namespace wavreg
