#include "harmonica/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "harmonica/models/builders.hpp"

namespace harmonica::cli {

namespace {

enum class Type { size, real, boolean, text, lambda };

struct KeySpec {
    const char* key;
    Type type;
    const char* fallback;
};

// Order here is the order of the resolved dump.
const std::vector<KeySpec>& schema() {
    static const std::vector<KeySpec> s{
        {"arch.family", Type::text, "norb"},
        {"arch.file", Type::text, ""},
        {"arch.variant", Type::text, "harm3"},
        {"arch.pooling", Type::text, "overlap_avg"},
        {"arch.first_block_bn", Type::boolean, "true"},
        {"arch.drop_dc", Type::boolean, "false"},
        {"arch.stages", Type::size, "3"},
        {"arch.width_divisor", Type::size, "1"},
        {"arch.depth", Type::size, "28"},
        {"arch.width", Type::size, "10"},
        {"arch.mode", Type::text, "baseline"},
        {"arch.lambda", Type::lambda, "full"},
        {"arch.dropout", Type::real, "0"},
        {"arch.channels", Type::size, "2"},
        {"arch.input_size", Type::size, "96"},
        {"arch.classes", Type::size, "5"},

        {"train.epochs", Type::size, "200"},
        {"train.batch_size", Type::size, "64"},
        {"train.base_lr", Type::real, "0.01"},
        {"train.lr_decay_factor", Type::real, "10"},
        {"train.decay_every_epochs", Type::size, "50"},
        {"train.momentum", Type::real, "0.9"},
        {"train.weight_decay", Type::real, "0.0005"},
        {"train.pad_pixels", Type::size, "0"},
        {"train.crop_size", Type::size, "0"},
        {"train.brightness_contrast_aug", Type::boolean, "false"},
        {"train.brightness_delta", Type::real, "0.2"},
        {"train.contrast_delta", Type::real, "0.2"},
        {"train.standardize", Type::boolean, "true"},
        {"train.max_steps", Type::size, "0"},
        {"train.checkpoint_every", Type::size, "0"},
        {"train.seed", Type::size, "1"},

        {"data.source", Type::text, "synth"},
        {"data.synth_kind", Type::text, "frequency_classes"},
        {"data.count", Type::size, "256"},
        {"data.test_count", Type::size, "0"},
        {"data.size", Type::size, "16"},
        {"data.channels", Type::size, "1"},
        {"data.classes", Type::size, "2"},
        {"data.train_lighting", Type::text, "standard"},
        {"data.test_lighting", Type::text, "standard"},
        {"data.train_images", Type::text, ""},
        {"data.train_labels", Type::text, ""},
        {"data.test_images", Type::text, ""},
        {"data.test_labels", Type::text, ""},
        {"data.train_files", Type::text, ""},
        {"data.test_files", Type::text, ""},
        {"data.limit", Type::size, "0"},

        {"output.dir", Type::text, "run"},
    };
    return s;
}

const KeySpec& spec_of(const std::string& key) {
    for (const auto& k : schema())
        if (key == k.key) return k;
    throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_size(const std::string& v, std::size_t& out) {
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    return r.ec == std::errc{} && r.ptr == v.data() + v.size() && !v.empty();
}

bool parse_real(const std::string& v, double& out) {
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    return r.ec == std::errc{} && r.ptr == v.data() + v.size() && !v.empty();
}

void check_value(const KeySpec& spec, const std::string& value) {
    std::size_t n = 0;
    double d = 0.0;
    bool ok = true;
    switch (spec.type) {
        case Type::size: ok = parse_size(value, n); break;
        case Type::real: ok = parse_real(value, d); break;
        case Type::boolean: ok = value == "true" || value == "false"; break;
        case Type::lambda: ok = value == "full" || (parse_size(value, n) && n >= 1); break;
        case Type::text: break;
    }
    if (!ok) {
        static const char* names[] = {"a non-negative integer", "a number", "true or false", "text",
                                      "full or a positive integer"};
        throw ConfigError("config key '" + std::string(spec.key) + "' expects " +
                          names[static_cast<int>(spec.type)] + ", got '" + value + "'");
    }
}

std::vector<std::filesystem::path> split_paths(const std::string& s) {
    std::vector<std::filesystem::path> out;
    std::istringstream in(s);
    for (std::string p; std::getline(in, p, ',');)
        if (!trim(p).empty()) out.emplace_back(trim(p));
    return out;
}

}  // namespace

RunConfig::RunConfig() {
    for (const auto& k : schema()) values_[k.key] = k.fallback;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const KeySpec& spec = spec_of(key);
    check_value(spec, value);
    values_[key] = value;
}

void RunConfig::set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not section.key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string section;
    std::vector<std::string> seen;
    std::size_t line_no = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const std::string where = "config line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "arch" && section != "train" && section != "data" && section != "output") {
                throw ConfigError(where + "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        if (section.empty()) throw ConfigError(where + "key outside any section");
        const std::string key = section + "." + trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
            throw ConfigError(where + "duplicate key '" + key + "'");
        }
        seen.push_back(key);
        try {
            c.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    spec_of(key);
    return values_.at(key);
}

std::size_t RunConfig::get_size(const std::string& key) const {
    std::size_t n = 0;
    if (!parse_size(get(key), n)) throw ConfigError("config key '" + key + "' is not an integer");
    return n;
}

double RunConfig::get_double(const std::string& key) const {
    double d = 0.0;
    if (!parse_real(get(key), d)) throw ConfigError("config key '" + key + "' is not a number");
    return d;
}

bool RunConfig::get_bool(const std::string& key) const { return get(key) == "true"; }

std::string RunConfig::to_text() const {
    std::ostringstream os;
    std::string section;
    for (const auto& k : schema()) {
        const std::string key = k.key;
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            if (!section.empty()) os << '\n';
            os << '[' << s << "]\n";
            section = s;
        }
        const std::string& v = values_.at(key);
        const bool quote = k.type == Type::text && (v.empty() || v.find_first_of(" #") != std::string::npos);
        os << key.substr(dot + 1) << " = " << (quote ? "\"" + v + "\"" : v) << '\n';
    }
    return os.str();
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& k : schema()) out.emplace_back(k.key);
    return out;
}

models::ArchSpec arch_from_config(const RunConfig& c) {
    const std::string family = c.get("arch.family");
    std::optional<std::size_t> lambda;
    if (c.get("arch.lambda") != "full") lambda = c.get_size("arch.lambda");
    if (family == "norb") {
        models::NorbOptions o;
        o.variant = models::parse_norb_variant(c.get("arch.variant"));
        o.pooling = models::parse_norb_pooling(c.get("arch.pooling"));
        o.first_block_bn = c.get_bool("arch.first_block_bn");
        o.drop_dc = c.get_bool("arch.drop_dc");
        o.stages = c.get_size("arch.stages");
        o.width_divisor = c.get_size("arch.width_divisor");
        o.channels = c.get_size("arch.channels");
        o.size = c.get_size("arch.input_size");
        o.classes = c.get_size("arch.classes");
        return models::norb_arch(o);
    }
    if (family == "wrn") {
        models::WrnOptions o;
        o.depth = c.get_size("arch.depth");
        o.width = c.get_size("arch.width");
        o.mode = models::parse_wrn_mode(c.get("arch.mode"));
        o.lambda = lambda;
        o.dropout = c.get_double("arch.dropout");
        o.channels = c.get_size("arch.channels");
        o.size = c.get_size("arch.input_size");
        o.classes = c.get_size("arch.classes");
        return models::wrn_arch(o);
    }
    if (family == "file") {
        if (c.get("arch.file").empty()) throw ConfigError("config key 'arch.file' is required for family = file");
        return models::resolve_arch(c.get("arch.file"));
    }
    throw ConfigError("config key 'arch.family' must be norb, wrn or file, got '" + family + "'");
}

train::TrainConfig train_from_config(const RunConfig& c) {
    train::TrainConfig t;
    t.epochs = c.get_size("train.epochs");
    t.batch_size = c.get_size("train.batch_size");
    t.base_lr = c.get_double("train.base_lr");
    t.lr_decay_factor = c.get_double("train.lr_decay_factor");
    t.decay_every_epochs = c.get_size("train.decay_every_epochs");
    t.momentum = c.get_double("train.momentum");
    t.weight_decay = c.get_double("train.weight_decay");
    t.pad_pixels = c.get_size("train.pad_pixels");
    t.crop_size = c.get_size("train.crop_size");
    t.brightness_contrast_aug = c.get_bool("train.brightness_contrast_aug");
    t.brightness_delta = c.get_double("train.brightness_delta");
    t.contrast_delta = c.get_double("train.contrast_delta");
    t.standardize = c.get_bool("train.standardize");
    t.max_steps = c.get_size("train.max_steps");
    t.checkpoint_every = c.get_size("train.checkpoint_every");
    t.seed = c.get_size("train.seed");
    t.validate();
    return t;
}

namespace {

void require_file(const RunConfig& c, const std::string& key) {
    const std::string& p = c.get(key);
    if (p.empty()) throw ConfigError("config key '" + key + "' is required");
    if (!std::filesystem::exists(p)) throw ConfigError("config key '" + key + "': no such file " + p);
}

data::Dataset limit(data::Dataset d, std::size_t n) {
    if (n == 0 || n >= d.size()) return d;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return d.subset(idx);
}

}  // namespace

DataSplits data_from_config(const RunConfig& c) {
    const std::string source = c.get("data.source");
    const std::size_t cap = c.get_size("data.limit");
    if (source == "synth") {
        data::SynthOptions o;
        o.kind = data::parse_synth_kind(c.get("data.synth_kind"));
        o.count = c.get_size("data.count");
        o.size = c.get_size("data.size");
        o.channels = c.get_size("data.channels");
        o.classes = c.get_size("data.classes");
        const std::uint64_t seed = c.get_size("train.seed");
        o.seed = Rng::stream(seed, "data/train").next_u64();
        o.lighting = data::parse_lighting(c.get("data.train_lighting"));
        DataSplits s{limit(data::synth_dataset(o), cap), std::nullopt};
        if (const std::size_t tc = c.get_size("data.test_count"); tc != 0) {
            o.count = tc;
            o.seed = Rng::stream(seed, "data/test").next_u64();
            o.lighting = data::parse_lighting(c.get("data.test_lighting"));
            s.test = data::synth_dataset(o);
        }
        return s;
    }
    if (source == "idx") {
        require_file(c, "data.train_images");
        require_file(c, "data.train_labels");
        DataSplits s{limit(data::load_idx(c.get("data.train_images"), c.get("data.train_labels")), cap), std::nullopt};
        if (!c.get("data.test_images").empty()) {
            require_file(c, "data.test_images");
            require_file(c, "data.test_labels");
            s.test = data::load_idx(c.get("data.test_images"), c.get("data.test_labels"), s.train.classes);
        }
        return s;
    }
    if (source == "cifar") {
        const std::size_t classes = c.get_size("data.classes");
        const auto train_files = split_paths(c.get("data.train_files"));
        if (train_files.empty()) throw ConfigError("config key 'data.train_files' is required");
        for (const auto& p : train_files)
            if (!std::filesystem::exists(p)) throw ConfigError("config key 'data.train_files': no such file " + p.string());
        DataSplits s{limit(data::load_cifar_binary(train_files, classes), cap), std::nullopt};
        const auto test_files = split_paths(c.get("data.test_files"));
        if (!test_files.empty()) {
            for (const auto& p : test_files)
                if (!std::filesystem::exists(p)) throw ConfigError("config key 'data.test_files': no such file " + p.string());
            s.test = data::load_cifar_binary(test_files, classes);
        }
        return s;
    }
    throw ConfigError("config key 'data.source' must be synth, idx or cifar, got '" + source + "'");
}

}  // namespace harmonica::cli
