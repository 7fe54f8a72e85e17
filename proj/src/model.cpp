#include "wavreg/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "wavreg/errors.hpp"

namespace wavreg {

std::string_view to_string(WapPosition position) {
    switch (position) {
        case WapPosition::after_first_conv: return "after_first_conv";
        case WapPosition::before_final_relu: return "before_final_relu";
        case WapPosition::after_final_relu: return "after_final_relu";
        case WapPosition::disabled: return "disabled";
    }
    return "disabled";
}

std::string_view to_string(PoolingVariant variant) {
    switch (variant) {
        case PoolingVariant::wap: return "wap";
        case PoolingVariant::lpf: return "lpf";
        case PoolingVariant::subsample: return "subsample";
    }
    return "wap";
}

WapPosition parse_wap_position(std::string_view text) {
    for (auto p : {WapPosition::after_first_conv, WapPosition::before_final_relu, WapPosition::after_final_relu,
                   WapPosition::disabled})
        if (text == to_string(p)) return p;
    throw ConfigError("unknown wap position '" + std::string(text) + "'");
}

PoolingVariant parse_pooling_variant(std::string_view text) {
    for (auto v : {PoolingVariant::wap, PoolingVariant::lpf, PoolingVariant::subsample})
        if (text == to_string(v)) return v;
    throw ConfigError("unknown pooling variant '" + std::string(text) + "'");
}

namespace {

std::size_t group_channels(const ModelConfig& cfg, std::size_t group) {
    return (std::size_t{16} << group) * static_cast<std::size_t>(cfg.width);
}

bool pooling_enabled(const ModelConfig& cfg) { return cfg.wap_position != WapPosition::disabled; }

}  // namespace

void ModelConfig::validate() const {
    if (depth < 1) throw ConfigError("model.depth must be >= 1");
    if (width < 1) throw ConfigError("model.width must be >= 1");
    if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
    if (input_size < 4 || input_size % 4 != 0) throw ConfigError("model.input_size must be a positive multiple of 4");
    if (!pooling_enabled(*this)) return;
    if (pooling_variant != PoolingVariant::subsample) {
        if (wavelet_base.empty() || wavelet_base == "none")
            throw ConfigError("model.wavelet_base must be set when model.wap_position is not 'disabled'");
        try {
            (void)filter_bank(wavelet_base);
        } catch (const UnsupportedBaseError& e) {
            throw ConfigError(std::string("model.wavelet_base: ") + e.what());
        }
    }
    const std::size_t at = wap_position == WapPosition::after_first_conv ? input_size : input_size / 4;
    if (at % 2 != 0)
        throw ConfigError("model.wap_position: spatial size " + std::to_string(at) + " at the pooling point is odd");
}

std::string serialize(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "depth=" << cfg.depth << '\n'
       << "width=" << cfg.width << '\n'
       << "num_classes=" << cfg.num_classes << '\n'
       << "wavelet_base=" << (cfg.wavelet_base.empty() ? "none" : cfg.wavelet_base) << '\n'
       << "wap_position=" << to_string(cfg.wap_position) << '\n'
       << "pooling_variant=" << to_string(cfg.pooling_variant) << '\n'
       << "lpf_match_scale=" << (cfg.lpf_match_scale ? "true" : "false") << '\n'
       << "input_size=" << cfg.input_size << '\n';
    return os.str();
}

ModelConfig parse_model_config(std::string_view text) {
    ModelConfig cfg;
    std::istringstream is{std::string(text)};
    std::string line;
    auto to_int = [](const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const int out = std::stoi(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ConfigError("model config: '" + key + "' expects an integer, got '" + v + "'");
        }
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("model config: malformed line '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "depth") cfg.depth = to_int(key, value);
        else if (key == "width") cfg.width = to_int(key, value);
        else if (key == "num_classes") cfg.num_classes = to_int(key, value);
        else if (key == "wavelet_base") cfg.wavelet_base = value == "none" ? "" : value;
        else if (key == "wap_position") cfg.wap_position = parse_wap_position(value);
        else if (key == "pooling_variant") cfg.pooling_variant = parse_pooling_variant(value);
        else if (key == "lpf_match_scale") {
            if (value != "true" && value != "false")
                throw ConfigError("model config: 'lpf_match_scale' expects true/false, got '" + value + "'");
            cfg.lpf_match_scale = value == "true";
        } else if (key == "input_size") cfg.input_size = static_cast<std::size_t>(to_int(key, value));
        else throw ConfigError("model config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

std::size_t expected_parameter_count(const ModelConfig& cfg) {
    std::size_t count = 3 * 16 * 9;
    std::size_t in = 16;
    for (std::size_t g = 0; g < 3; ++g) {
        const std::size_t out = group_channels(cfg, g);
        for (int b = 0; b < cfg.depth; ++b) {
            const std::size_t stride = (b == 0 && g > 0) ? 2 : 1;
            count += 2 * in + in * out * 9 + 2 * out + out * out * 9;
            if (in != out || stride != 1) count += in * out;
            in = out;
        }
    }
    count += 2 * in + in * static_cast<std::size_t>(cfg.num_classes) + static_cast<std::size_t>(cfg.num_classes);
    return count;
}

// ---------------------------------------------------------------------------

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (pooling_enabled(cfg_) && cfg_.pooling_variant != PoolingVariant::subsample) bank_ = filter_bank(cfg_.wavelet_base);

    // (parameter index, init stddev) for every weight, in declaration order.
    std::vector<std::pair<std::size_t, float>> weights;
    auto conv = [&](std::string name, std::size_t out, std::size_t in, std::size_t k) {
        const auto idx = add_param(std::move(name), {out, in, k, k}, 0.0f);
        weights.emplace_back(idx, std::sqrt(2.0f / static_cast<float>(in * k * k)));
        return idx;
    };

    stem_ = conv("stem.conv", 16, 3, 3);
    std::size_t in = 16;
    for (std::size_t g = 0; g < 3; ++g) {
        const std::size_t out = group_channels(cfg_, g);
        for (int b = 0; b < cfg_.depth; ++b) {
            const std::string prefix = "group" + std::to_string(g) + ".block" + std::to_string(b) + ".";
            Block block;
            block.stride = (b == 0 && g > 0) ? 2 : 1;
            block.bn1 = add_norm(prefix + "bn1", in);
            block.conv1 = conv(prefix + "conv1", out, in, 3);
            block.bn2 = add_norm(prefix + "bn2", out);
            block.conv2 = conv(prefix + "conv2", out, out, 3);
            if (in != out || block.stride != 1) block.shortcut = conv(prefix + "shortcut", out, in, 1);
            blocks_.push_back(block);
            in = out;
        }
    }
    final_bn_ = add_norm("final.bn", in);
    const auto classes = static_cast<std::size_t>(cfg_.num_classes);
    fc_weight_ = add_param("fc.weight", {in, classes}, 0.0f);
    weights.emplace_back(fc_weight_, std::sqrt(1.0f / static_cast<float>(in)));
    fc_bias_ = add_param("fc.bias", {classes}, 0.0f);

    // Kaiming-style fan-in normal draws, one seeded stream.
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (const auto& [idx, stddev] : weights)
        for (auto& v : params_[idx].value.data()) v = stddev * normal(rng);
}

std::size_t Model::add_param(std::string name, Shape shape, float fill) {
    params_.push_back({std::move(name), Tensor::full(std::move(shape), fill, true)});
    return params_.size() - 1;
}

Model::Norm Model::add_norm(const std::string& name, std::size_t channels) {
    Norm n{};
    n.gamma = add_param(name + ".gamma", {channels}, 1.0f);
    n.beta = add_param(name + ".beta", {channels}, 0.0f);
    buffers_.push_back({name + ".running_mean", Tensor::zeros({channels})});
    n.mean = buffers_.size() - 1;
    buffers_.push_back({name + ".running_var", Tensor::full({channels}, 1.0f)});
    n.variance = buffers_.size() - 1;
    return n;
}

Tensor Model::apply_norm(const Tensor& x, Norm& norm, bool training) {
    BatchNormState state{buffers_[norm.mean].value, buffers_[norm.variance].value};
    return batch_norm(x, params_[norm.gamma].value, params_[norm.beta].value, state, training);
}

Tensor Model::apply_block(const Tensor& x, Block& block, bool training) {
    const Tensor pre = relu(apply_norm(x, block.bn1, training));
    Tensor y = conv2d(pre, params_[block.conv1].value, block.stride, 1);
    y = relu(apply_norm(y, block.bn2, training));
    y = conv2d(y, params_[block.conv2].value, 1, 1);
    const Tensor skip = block.shortcut ? conv2d(pre, params_[*block.shortcut].value, block.stride, 0) : x;
    return add(y, skip);
}

Tensor Model::pool(const Tensor& x) const {
    switch (cfg_.pooling_variant) {
        case PoolingVariant::wap: return wavelet_average_pool(x, *bank_);
        case PoolingVariant::lpf: return wavelet_low_pass_pool(x, *bank_, cfg_.lpf_match_scale);
        case PoolingVariant::subsample: return subsample2d(x);
    }
    return x;
}

ForwardTrace Model::trace(const Tensor& x, bool training) {
    if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != cfg_.input_size || x.dim(3) != cfg_.input_size)
        throw DimensionError("model expects [N,3," + std::to_string(cfg_.input_size) + "," +
                             std::to_string(cfg_.input_size) + "] input, got " + shape_string(x.shape()));
    Tensor h = conv2d(x, params_[stem_].value, 1, 1);
    if (cfg_.wap_position == WapPosition::after_first_conv) h = pool(h);
    for (auto& block : blocks_) h = apply_block(h, block, training);
    h = apply_norm(h, final_bn_, training);
    if (cfg_.wap_position == WapPosition::before_final_relu) h = pool(h);
    ForwardTrace out;
    out.features = relu(h);
    out.logits = head(out.features);
    return out;
}

Tensor Model::head(const Tensor& features) {
    Tensor h = features;
    if (cfg_.wap_position == WapPosition::after_final_relu) h = pool(h);
    if (h.rank() != 4 || h.dim(2) != h.dim(3))
        throw DimensionError("model head expects a square feature grid, got " + shape_string(h.shape()));
    h = avg_pool2d(h, h.dim(2));
    h = reshape(h, {h.dim(0), h.dim(1)});
    return linear(h, params_[fc_weight_].value, params_[fc_bias_].value);
}

Tensor Model::forward(const Tensor& x, bool training) { return trace(x, training).logits; }

std::vector<Tensor> Model::parameter_tensors() {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.value);
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void Model::set_requires_grad(bool on) {
    for (auto& p : params_) p.value.set_requires_grad(on);
}

void Model::zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
}

Model Model::clone() const {
    Model copy = *this;
    for (auto& p : copy.params_) {
        const bool rg = p.value.requires_grad();
        p.value = p.value.detach();
        p.value.set_requires_grad(rg);
    }
    for (auto& b : copy.buffers_) b.value = b.value.detach();
    return copy;
}

std::size_t Model::final_feature_size() const {
    std::size_t s = cfg_.input_size / 4;
    if (pooling_enabled(cfg_)) s /= 2;
    return s;
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed) { return Model(cfg, seed); }

}  // namespace wavreg
