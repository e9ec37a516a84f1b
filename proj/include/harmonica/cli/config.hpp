#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harmonica/data/dataset.hpp"
#include "harmonica/models/arch.hpp"
#include "harmonica/train/trainer.hpp"

namespace harmonica::cli {

/// Sectioned key = value run description:
///
///   [arch]    family = norb | wrn | file, plus the family's options
///   [train]   TrainConfig fields and the master seed
///   [data]    source = synth | idx | cifar, plus paths or generator options
///   [output]  dir
///
/// Every key has a default; unknown sections or keys and malformed values
/// throw ConfigError naming the key.
class RunConfig {
public:
    RunConfig();

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);

    /// "section.key=value"
    void set_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    [[nodiscard]] const std::string& get(const std::string& key) const;
    [[nodiscard]] std::size_t get_size(const std::string& key) const;
    [[nodiscard]] double get_double(const std::string& key) const;
    [[nodiscard]] bool get_bool(const std::string& key) const;

    /// Complete document with every key, parseable by parse().
    [[nodiscard]] std::string to_text() const;

    [[nodiscard]] static std::vector<std::string> keys();

private:
    std::map<std::string, std::string> values_;
};

models::ArchSpec arch_from_config(const RunConfig& config);
train::TrainConfig train_from_config(const RunConfig& config);

struct DataSplits {
    data::Dataset train;
    std::optional<data::Dataset> test;
};

/// Loads or generates the datasets. Synthetic splits draw their seeds from
/// the "data/train" and "data/test" streams of train.seed.
DataSplits data_from_config(const RunConfig& config);

}  // namespace harmonica::cli
