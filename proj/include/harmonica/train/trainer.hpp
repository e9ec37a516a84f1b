#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "harmonica/data/dataset.hpp"
#include "harmonica/models/arch.hpp"
#include "harmonica/rng.hpp"

namespace harmonica::train {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double base_lr = 0.01;
    double lr_decay_factor = 10.0;  // lr is divided by this every decay_every_epochs
    std::size_t decay_every_epochs = 50;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t pad_pixels = 0;
    std::size_t crop_size = 0;  // 0 = input size
    bool brightness_contrast_aug = false;
    double brightness_delta = 0.2;  // b ~ U(-delta, delta)
    double contrast_delta = 0.2;    // c ~ U(1 - delta, 1 + delta)
    bool standardize = true;        // per-channel, training-set statistics
    std::size_t max_steps = 0;      // 0 = no cap
    std::size_t checkpoint_every = 0;  // epochs; 0 = final checkpoint only
    std::filesystem::path checkpoint_dir;  // empty = no checkpoints
    std::uint64_t seed = 1;

    /// Throws ConfigError naming the field.
    void validate() const;
};

/// base_lr / factor^floor(epoch / every).
double learning_rate(const TrainConfig& config, std::size_t epoch);

struct CropOrigin {
    std::size_t y = 0;
    std::size_t x = 0;
};

/// Offset of a crop x crop window inside a (size + 2 pad)^2 padded image,
/// uniform over all (size + 2 pad - crop + 1)^2 positions.
CropOrigin draw_crop(std::size_t size, std::size_t pad, std::size_t crop, Rng& rng);

/// Zero-pad, random crop, then optional c * x + b clamped to [lo, hi], with
/// fresh draws per sample. Expects raw pixel values (before standardizing).
Tensor augment(const Tensor& batch, const TrainConfig& config, Rng& rng, double lo = 0.0, double hi = 1.0);

/// Per-channel affine input normalization.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Normalizer identity(std::size_t channels);
    static Normalizer fit(const Tensor& samples);
    [[nodiscard]] Tensor apply(const Tensor& batch) const;
    [[nodiscard]] std::string to_text() const;
    /// Reads the lines written by to_text from a key=value document.
    static Normalizer from_text(const std::string& text);
};

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;  // mean over the epoch's mini-batches
    double train_err = 0.0;   // on the fly, training mode
    double test_err = std::numeric_limits<double>::quiet_NaN();
};

struct History {
    std::vector<EpochRecord> epochs;
    std::vector<double> step_losses;
    Normalizer normalizer;
    std::size_t steps = 0;
};

/// Shuffled mini-batch SGD. Shuffling and augmentation use the "shuffle" and
/// "augment" streams of config.seed; build the network with the same seed to
/// cover init and dropout. Throws NumericError on a non-finite loss.
History train(models::Network& net, const data::Dataset& train_set, const data::Dataset* test_set,
              const TrainConfig& config);

/// Top-1 error in eval mode. Throws InputError on an empty dataset.
double evaluate(models::Network& net, const data::Dataset& dataset, const Normalizer& normalizer,
                std::size_t batch_size = 256);

/// CSV with header epoch,lr,train_loss,train_err,test_err.
void write_history_csv(const std::filesystem::path& path, const History& history);

/// Checkpoint meta text: normalizer plus the given extra key=value lines.
std::string checkpoint_meta(const Normalizer& normalizer, std::size_t epoch, std::uint64_t seed);
void save_checkpoint(const std::filesystem::path& path, models::Network& net, const std::string& meta);

struct LoadedModel {
    models::Network net;
    Normalizer normalizer;
};

/// Rebuilds the network from the architecture stored in the checkpoint and
/// restores its tensors. FormatError when the file or tensors do not match.
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace harmonica::train
