#include "wavreg/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "wavreg/errors.hpp"

namespace wavreg {

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
    const std::size_t per = sample_size();
    std::vector<float> out(indices.size() * per);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= size()) throw InputError("dataset index " + std::to_string(indices[k]) + " out of range");
        const auto src = image(indices[k]);
        std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(k * per));
    }
    return Tensor::from({indices.size(), channels, height, width}, std::move(out));
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(labels.at(i));
    return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
    if (begin + count > size()) throw InputError("dataset slice out of range");
    Dataset out;
    out.provenance = provenance;
    out.channels = channels;
    out.height = height;
    out.width = width;
    const std::size_t per = sample_size();
    out.images.assign(images.begin() + static_cast<std::ptrdiff_t>(begin * per),
                      images.begin() + static_cast<std::ptrdiff_t>((begin + count) * per));
    out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
    return out;
}

void Dataset::validate(int num_classes) const {
    if (size() == 0) throw InputError("dataset is empty");
    if (images.size() != size() * sample_size()) throw InputError("dataset image buffer does not match label count");
    for (std::size_t i = 0; i < size(); ++i)
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw InputError("dataset label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                             " outside [0," + std::to_string(num_classes) + ")");
    for (float v : images)
        if (!(v >= 0.0f && v <= 1.0f)) throw InputError("dataset pixel value outside [0,1]");
}

Dataset parse_cifar10(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw FormatError("CIFAR-10 file is empty", 0);
    if (bytes.size() % kCifarRecordBytes != 0)
        throw FormatError("CIFAR-10 file size " + std::to_string(bytes.size()) + " is not a multiple of 3073 bytes",
                          bytes.size() - bytes.size() % kCifarRecordBytes);
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    Dataset out;
    out.provenance = "cifar10";
    out.labels.resize(n);
    out.images.resize(n * 3072);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t offset = r * kCifarRecordBytes;
        const std::uint8_t label = bytes[offset];
        if (label > 9) throw FormatError("CIFAR-10 label " + std::to_string(label) + " exceeds 9", offset);
        out.labels[r] = label;
        for (std::size_t p = 0; p < 3072; ++p)
            out.images[r * 3072 + p] = static_cast<float>(bytes[offset + 1 + p]) / 255.0f;
    }
    return out;
}

Dataset load_cifar10(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open CIFAR-10 file '" + path.string() + "'", 0);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_cifar10(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

Dataset load_cifar10(const std::vector<std::filesystem::path>& paths) {
    Dataset all;
    all.provenance = "cifar10";
    for (const auto& p : paths) {
        Dataset part = load_cifar10(p);
        all.images.insert(all.images.end(), part.images.begin(), part.images.end());
        all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    }
    return all;
}

Dataset synthetic_dataset(int num_classes, std::size_t n, std::uint64_t seed, const SyntheticOptions& options) {
    if (num_classes < 2) throw ConfigError("synthetic dataset needs at least two classes");
    if (n == 0) throw ConfigError("synthetic dataset needs at least one sample");
    Dataset out;
    out.provenance = "synthetic";
    constexpr std::size_t side = 32;
    const std::size_t per = 3 * side * side;
    out.images.resize(n * per);
    out.labels.resize(n);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, options.noise_stddev);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double pi = std::numbers::pi;

    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(num_classes));
        out.labels[i] = c;
        // Blob centre on a ring around the image centre.
        const double angle = 2.0 * pi * c / num_classes;
        const double cx = 15.5 + 8.0 * std::cos(angle) + options.blob_jitter * (2.0 * unit(rng) - 1.0);
        const double cy = 15.5 + 8.0 * std::sin(angle) + options.blob_jitter * (2.0 * unit(rng) - 1.0);
        const double amp =
            options.blob_amplitude_min + (options.blob_amplitude_max - options.blob_amplitude_min) * unit(rng);
        // Grating: class-specific orientation and frequency.
        const double freq = 2.0 * pi * (6.0 + 2.0 * c) / static_cast<double>(side);
        const double theta = pi * c / num_classes;
        const double phase = 2.0 * pi * unit(rng);
        float* img = out.images.data() + i * per;
        for (std::size_t ch = 0; ch < 3; ++ch)
            for (std::size_t y = 0; y < side; ++y)
                for (std::size_t x = 0; x < side; ++x) {
                    const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
                    const double blob = amp * std::exp(-(dx * dx + dy * dy) / (2.0 * options.blob_sigma * options.blob_sigma));
                    const double u = std::cos(theta) * static_cast<double>(x) + std::sin(theta) * static_cast<double>(y);
                    const double grating = options.grating_amplitude * std::cos(freq * u + phase);
                    const double v = 0.5 + blob + grating + noise(rng);
                    img[(ch * side + y) * side + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
    }
    return out;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in (0,1)");
    const auto val = static_cast<std::size_t>(std::ceil(static_cast<double>(data.size()) * fraction));
    if (val == 0 || val >= data.size()) throw InputError("dataset too small for a validation split");
    return {data.slice(0, data.size() - val), data.slice(data.size() - val, val)};
}

}  // namespace wavreg
