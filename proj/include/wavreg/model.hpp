#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wavreg/ops.hpp"
#include "wavreg/tensor.hpp"
#include "wavreg/wavelet.hpp"

namespace wavreg {

enum class WapPosition { after_first_conv, before_final_relu, after_final_relu, disabled };
// `subsample` keeps every other pixel; it exists as an ablation stand-in.
enum class PoolingVariant { wap, lpf, subsample };

std::string_view to_string(WapPosition position);
std::string_view to_string(PoolingVariant variant);
WapPosition parse_wap_position(std::string_view text);
PoolingVariant parse_pooling_variant(std::string_view text);

struct ModelConfig {
    int depth = 2;  // residual blocks per group
    int width = 2;  // channel multiplier
    int num_classes = 10;
    std::string wavelet_base = "haar";  // empty = none
    WapPosition wap_position = WapPosition::after_final_relu;
    PoolingVariant pooling_variant = PoolingVariant::wap;
    bool lpf_match_scale = false;
    std::size_t input_size = 32;

    // Throws ConfigError naming the offending field.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

std::string serialize(const ModelConfig& cfg);
ModelConfig parse_model_config(std::string_view text);

// Closed-form parameter count of build_model(cfg).
std::size_t expected_parameter_count(const ModelConfig& cfg);

struct NamedTensor {
    std::string name;
    Tensor value;
};

// The differentiable surface attacks and evaluation drive. logits() is the
// eval-mode forward and must be differentiable with respect to its input.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual Tensor logits(const Tensor& x) = 0;
    virtual std::size_t num_classes() const = 0;
    // Tensors whose gradients an input-gradient query should not touch.
    virtual std::vector<Tensor> trainable_tensors() { return {}; }
};

struct ForwardTrace {
    Tensor features;  // final feature grid [N,C,h,w], before global pooling
    Tensor logits;
};

// A classifier that also exposes its final feature grid, as Grad-CAM needs.
class FeatureClassifier : public Classifier {
public:
    virtual ForwardTrace trace(const Tensor& x) = 0;
    // Maps a feature grid to logits; trace(x).logits == head(trace(x).features).
    virtual Tensor head(const Tensor& features) = 0;
    Tensor logits(const Tensor& x) override { return trace(x).logits; }
};

// Pre-activation wide residual network with an optional wavelet pooling stage.
class Model : public FeatureClassifier {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    Tensor forward(const Tensor& x, bool training);
    ForwardTrace trace(const Tensor& x, bool training);

    ForwardTrace trace(const Tensor& x) override { return trace(x, false); }
    Tensor head(const Tensor& features) override;
    std::size_t num_classes() const override { return static_cast<std::size_t>(cfg_.num_classes); }

    std::vector<NamedTensor>& parameters() { return params_; }
    const std::vector<NamedTensor>& parameters() const { return params_; }
    // Batch-norm running statistics.
    std::vector<NamedTensor>& buffers() { return buffers_; }
    const std::vector<NamedTensor>& buffers() const { return buffers_; }

    std::vector<Tensor> parameter_tensors();
    std::vector<Tensor> trainable_tensors() override { return parameter_tensors(); }
    std::size_t parameter_count() const;
    void set_requires_grad(bool on);
    void zero_grad();

    // Deep copy with independent storage.
    Model clone() const;

    // Spatial size of the feature grid entering global pooling.
    std::size_t final_feature_size() const;

private:
    struct Norm {
        std::size_t gamma, beta;        // indices into params_
        std::size_t mean, variance;     // indices into buffers_
    };
    struct Block {
        Norm bn1, bn2;
        std::size_t conv1, conv2;
        std::optional<std::size_t> shortcut;
        std::size_t stride;
    };

    std::size_t add_param(std::string name, Shape shape, float fill);
    Norm add_norm(const std::string& name, std::size_t channels);
    Tensor apply_norm(const Tensor& x, Norm& norm, bool training);
    Tensor apply_block(const Tensor& x, Block& block, bool training);
    Tensor pool(const Tensor& x) const;

    ModelConfig cfg_;
    std::optional<FilterBank> bank_;
    std::vector<NamedTensor> params_;
    std::vector<NamedTensor> buffers_;
    std::size_t stem_ = 0;
    std::vector<Block> blocks_;
    Norm final_bn_{};
    std::size_t fc_weight_ = 0, fc_bias_ = 0;
};

Model build_model(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace wavreg
