#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wavreg/tensor.hpp"

namespace wavreg {

// N images of shape [3,32,32] in [0,1] with integer labels.
struct Dataset {
    std::vector<float> images;
    std::vector<int> labels;
    std::string provenance;  // "cifar10" or "synthetic"
    std::size_t channels = 3;
    std::size_t height = 32;
    std::size_t width = 32;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const { return channels * height * width; }
    std::span<const float> image(std::size_t i) const {
        return std::span<const float>(images).subspan(i * sample_size(), sample_size());
    }

    // [count, C, H, W] tensor of the given sample indices.
    Tensor batch(std::span<const std::size_t> indices) const;
    std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
    // Contiguous slice [begin, begin + count).
    Dataset slice(std::size_t begin, std::size_t count) const;

    // Throws InputError if N == 0, a label is outside [0, num_classes), or a
    // value is outside [0,1].
    void validate(int num_classes) const;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;

// CIFAR-10 binary batch: per record one label byte (0-9) followed by 1024
// red, 1024 green and 1024 blue bytes in row-major 32x32 order; v -> v / 255.
Dataset load_cifar10(const std::filesystem::path& path);
Dataset parse_cifar10(std::span<const std::uint8_t> bytes);
// Concatenates several batch files.
Dataset load_cifar10(const std::vector<std::filesystem::path>& paths);

// Class-conditional images: a Gaussian blob at a class-specific position plus
// a faint class-specific grating over pixel noise. Labels are assigned round
// robin; everything is fixed by the seed.
struct SyntheticOptions {
    double blob_amplitude_min = 0.15;
    double blob_amplitude_max = 0.30;
    double blob_sigma = 3.0;
    double blob_jitter = 2.0;
    double grating_amplitude = 0.025;
    double noise_stddev = 0.06;
};

Dataset synthetic_dataset(int num_classes, std::size_t n, std::uint64_t seed, const SyntheticOptions& options = {});

// Deterministic train/validation split: the last `fraction` of the samples.
std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction = 0.1);

}  // namespace wavreg
