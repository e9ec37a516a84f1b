#include "harmonica/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "harmonica/spectral.hpp"

namespace harmonica::data {

void Dataset::validate() const {
    if (samples.shape().batch != labels.size()) {
        throw InputError(name + ": " + std::to_string(samples.shape().batch) + " samples but " +
                         std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw InputError(name + ": label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                             " outside [0, " + std::to_string(classes) + ")");
        }
    }
}

Tensor Dataset::gather(const std::vector<std::size_t>& indices) const {
    const Shape s = samples.shape();
    Tensor out(indices.size(), s.channels, s.height, s.width);
    const std::size_t n = s.sample();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= s.batch) throw InputError("sample index " + std::to_string(indices[i]) + " out of range");
        std::copy_n(samples.data().begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n,
                    out.data().begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return out;
}

std::vector<int> Dataset::gather_labels(const std::vector<std::size_t>& indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (const auto i : indices) out.push_back(labels.at(i));
    return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    return Dataset{name, gather(indices), gather_labels(indices), classes};
}

// ------------------------------------------------------------------ IDX

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::filesystem::path& path) {
    if (b.size() < off + 4) {
        throw FormatError(path.string() + ": truncated header at byte offset " + std::to_string(off));
    }
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

struct IdxFile {
    std::vector<std::size_t> dims;
    std::size_t payload = 0;  // byte offset of the data
    std::vector<unsigned char> bytes;
};

IdxFile read_idx(const std::filesystem::path& path, std::initializer_list<std::uint8_t> ranks) {
    IdxFile f;
    f.bytes = read_file(path);
    const std::uint32_t magic = be32(f.bytes, 0, path);
    const std::uint8_t type = (magic >> 8) & 0xff;
    const std::uint8_t rank = magic & 0xff;
    if ((magic >> 16) != 0 || type != 0x08 || std::find(ranks.begin(), ranks.end(), rank) == ranks.end()) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "0x%08x", magic);
        throw FormatError(path.string() + ": bad IDX magic " + hex + " at byte offset 0");
    }
    std::size_t total = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
        f.dims.push_back(be32(f.bytes, 4 + 4 * i, path));
        total *= f.dims.back();
    }
    f.payload = 4 + 4 * std::size_t{rank};
    if (f.bytes.size() < f.payload + total) {
        throw FormatError(path.string() + ": payload truncated at byte offset " + std::to_string(f.bytes.size()) +
                          ", expected " + std::to_string(f.payload + total) + " bytes");
    }
    if (f.bytes.size() > f.payload + total) {
        throw FormatError(path.string() + ": trailing bytes at byte offset " + std::to_string(f.payload + total));
    }
    return f;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t classes) {
    const IdxFile img = read_idx(images, {3, 4});
    const IdxFile lab = read_idx(labels, {1});
    Shape s;
    s.batch = img.dims[0];
    if (img.dims.size() == 3) {
        s.channels = 1;
        s.height = img.dims[1];
        s.width = img.dims[2];
    } else {
        s.channels = img.dims[1];
        s.height = img.dims[2];
        s.width = img.dims[3];
    }
    if (lab.dims[0] != s.batch) {
        throw FormatError(labels.string() + ": " + std::to_string(lab.dims[0]) + " labels for " +
                          std::to_string(s.batch) + " images");
    }
    Dataset d;
    d.name = images.filename().string();
    d.samples = Tensor(s);
    auto& v = d.samples.vec();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.bytes[img.payload + i] / 255.0;
    int max_label = -1;
    for (std::size_t i = 0; i < s.batch; ++i) {
        d.labels.push_back(lab.bytes[lab.payload + i]);
        max_label = std::max(max_label, d.labels.back());
    }
    d.classes = classes != 0 ? classes : static_cast<std::size_t>(max_label + 1);
    d.validate();
    return d;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const Dataset& dataset) {
    dataset.validate();
    const Shape s = dataset.samples.shape();
    std::vector<unsigned char> img;
    const bool rank3 = s.channels == 1;
    put_be32(img, rank3 ? 0x803 : 0x804);
    put_be32(img, static_cast<std::uint32_t>(s.batch));
    if (!rank3) put_be32(img, static_cast<std::uint32_t>(s.channels));
    put_be32(img, static_cast<std::uint32_t>(s.height));
    put_be32(img, static_cast<std::uint32_t>(s.width));
    for (const Scalar x : dataset.samples.data()) {
        if (!(x >= 0.0 && x <= 1.0)) throw InputError("write_idx: pixel value outside [0, 1]");
        img.push_back(static_cast<unsigned char>(std::lround(x * 255.0)));
    }
    std::vector<unsigned char> lab;
    put_be32(lab, 0x801);
    put_be32(lab, static_cast<std::uint32_t>(dataset.size()));
    for (const int l : dataset.labels) {
        if (l > 255) throw InputError("write_idx: label " + std::to_string(l) + " does not fit a byte");
        lab.push_back(static_cast<unsigned char>(l));
    }
    for (const auto& [path, bytes] : {std::pair{images, &img}, std::pair{labels, &lab}}) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot open " + path.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes->data()), static_cast<std::streamsize>(bytes->size()));
        if (!out) throw InputError("failed writing " + path.string());
    }
}

// ------------------------------------------------------------------ CIFAR

Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths, std::size_t classes) {
    if (classes != 10 && classes != 100) throw ConfigError("CIFAR class count must be 10 or 100");
    if (paths.empty()) throw InputError("no CIFAR files given");
    const std::size_t label_bytes = classes == 10 ? 1 : 2;
    constexpr std::size_t pixels = 3 * 32 * 32;
    const std::size_t record = label_bytes + pixels;
    std::vector<std::vector<unsigned char>> files;
    std::size_t count = 0;
    for (const auto& p : paths) {
        files.push_back(read_file(p));
        if (files.back().size() % record != 0) {
            throw FormatError(p.string() + ": size " + std::to_string(files.back().size()) +
                              " is not a multiple of the " + std::to_string(record) + "-byte record; partial record at byte offset " +
                              std::to_string(files.back().size() / record * record));
        }
        count += files.back().size() / record;
    }
    Dataset d;
    d.name = classes == 10 ? "cifar10" : "cifar100";
    d.classes = classes;
    d.samples = Tensor(count, 3, 32, 32);
    auto& v = d.samples.vec();
    std::size_t i = 0;
    for (const auto& bytes : files) {
        for (std::size_t off = 0; off < bytes.size(); off += record, ++i) {
            d.labels.push_back(bytes[off + label_bytes - 1]);
            for (std::size_t k = 0; k < pixels; ++k) v[i * pixels + k] = bytes[off + label_bytes + k] / 255.0;
        }
    }
    d.validate();
    return d;
}

// ------------------------------------------------------------------ synthetic

SynthKind parse_synth_kind(const std::string& name) {
    if (name == "oriented_gratings") return SynthKind::oriented_gratings;
    if (name == "frequency_classes") return SynthKind::frequency_classes;
    if (name == "lit_shapes") return SynthKind::lit_shapes;
    throw ConfigError("unknown synthetic dataset '" + name + "' (oriented_gratings, frequency_classes, lit_shapes)");
}

std::string to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::oriented_gratings: return "oriented_gratings";
        case SynthKind::frequency_classes: return "frequency_classes";
        case SynthKind::lit_shapes: return "lit_shapes";
    }
    return "?";
}

Lighting parse_lighting(const std::string& name) {
    if (name == "standard") return {"standard", 1.0, 0.0};
    if (name == "bright") return {"bright", 1.1, 0.25};
    if (name == "dark") return {"dark", 0.9, -0.25};
    throw ConfigError("unknown lighting '" + name + "' (standard, bright, dark)");
}

namespace {

constexpr std::size_t kPatternWindow = 4;
constexpr std::array<Frequency, 15> kClassFrequencies{{{0, 1},
                                                        {1, 0},
                                                        {1, 1},
                                                        {0, 2},
                                                        {2, 0},
                                                        {2, 2},
                                                        {1, 2},
                                                        {2, 1},
                                                        {0, 3},
                                                        {3, 0},
                                                        {3, 3},
                                                        {1, 3},
                                                        {3, 1},
                                                        {2, 3},
                                                        {3, 2}}};

void frequency_sample(std::span<Scalar> img, std::size_t size, std::size_t channels, int label, Rng& rng) {
    const DCTBasis& basis = *shared_dct_basis(kPatternWindow);
    const Frequency f = kClassFrequencies[static_cast<std::size_t>(label)];
    const double amp = rng.uniform(0.6, 0.9);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double psi = basis.col_factor(f)[y % kPatternWindow] * basis.row_factor(f)[x % kPatternWindow];
                const double v = 0.5 + amp * psi + 0.05 * rng.normal();
                img[(c * size + y) * size + x] = std::clamp(v, 0.0, 1.0);
            }
}

void grating_sample(std::span<Scalar> img, std::size_t size, std::size_t channels, int label, std::size_t classes,
                    Rng& rng) {
    const double theta = std::numbers::pi * label / static_cast<double>(classes);
    const double freq = rng.uniform(0.12, 0.25);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double t = 2.0 * std::numbers::pi * freq * (x * ct + y * st) + phase;
                const double v = 0.5 + 0.35 * std::cos(t) + 0.03 * rng.normal();
                img[(c * size + y) * size + x] = std::clamp(v, 0.0, 1.0);
            }
}

constexpr std::size_t kShapeKinds = 6;

bool inside_shape(int kind, double dy, double dx, double r, double thick) {
    const double ay = std::abs(dy);
    const double ax = std::abs(dx);
    switch (kind) {
        case 0: return ay <= r && ax <= r;                                         // filled square
        case 1: return ay <= r && ax <= r && (ay > r - thick || ax > r - thick);  // outline square
        case 2: return (ay <= r && ax <= r / 3) || (ax <= r && ay <= r / 3);      // cross
        case 3: return dy * dy + dx * dx <= r * r;                                // disc
        case 4: return ay <= r / 3 && ax <= r;                                    // bar
        default: {                                                                // ring
            const double d = std::sqrt(dy * dy + dx * dx);
            return d <= r && d > r - thick;
        }
    }
}

// Base rendering in roughly [0.37, 0.68]; every lighting preset maps it into
// [0, 1] without clamping, so split means are exact affine images.
void shape_sample(std::span<Scalar> img, std::size_t size, std::size_t channels, int label, Rng& rng) {
    const double s = static_cast<double>(size);
    const double r = rng.uniform(0.2 * s, 0.32 * s);
    const double cy = rng.uniform(r, s - 1 - r);
    const double cx = rng.uniform(r, s - 1 - r);
    const double thick = std::max(1.5, s / 14.0);
    const double fg = rng.uniform(0.6, 0.65);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const bool in = inside_shape(label, y - cy, x - cx, r, thick);
            const double v = (in ? fg : 0.4) + rng.uniform(-0.03, 0.03);
            for (std::size_t c = 0; c < channels; ++c) img[(c * size + y) * size + x] = v;
        }
}

}  // namespace

Dataset synth_dataset(const SynthOptions& o) {
    if (o.classes < 2) throw ConfigError("synthetic datasets need >= 2 classes");
    if (o.count == 0 || o.count % o.classes != 0) {
        throw ConfigError("synthetic count " + std::to_string(o.count) + " is not a positive multiple of " +
                          std::to_string(o.classes) + " classes");
    }
    if (o.size < 4 || o.channels == 0) throw ConfigError("synthetic images need size >= 4 and >= 1 channel");
    if (o.kind == SynthKind::frequency_classes && o.classes > kClassFrequencies.size()) {
        throw ConfigError("frequency_classes supports at most " + std::to_string(kClassFrequencies.size()) + " classes");
    }
    if (o.kind == SynthKind::lit_shapes && o.classes > kShapeKinds) {
        throw ConfigError("lit_shapes supports at most " + std::to_string(kShapeKinds) + " classes");
    }
    Dataset d;
    d.name = to_string(o.kind);
    if (o.kind == SynthKind::lit_shapes) d.name += "/" + o.lighting.name;
    d.classes = o.classes;
    d.samples = Tensor(o.count, o.channels, o.size, o.size);
    Rng rng = Rng::stream(o.seed, "synth/" + to_string(o.kind));
    const std::size_t n = d.samples.shape().sample();
    for (std::size_t i = 0; i < o.count; ++i) {
        const int label = static_cast<int>(i % o.classes);
        d.labels.push_back(label);
        std::span<Scalar> img(d.samples.vec().data() + i * n, n);
        switch (o.kind) {
            case SynthKind::frequency_classes: frequency_sample(img, o.size, o.channels, label, rng); break;
            case SynthKind::oriented_gratings: grating_sample(img, o.size, o.channels, label, o.classes, rng); break;
            case SynthKind::lit_shapes:
                shape_sample(img, o.size, o.channels, label, rng);
                for (auto& v : img) v = o.lighting.gain * v + o.lighting.offset;
                break;
        }
    }
    for (const Scalar v : d.samples.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("lighting pushes lit_shapes pixels outside [0, 1]");
    }
    return d;
}

// ------------------------------------------------------------------ batches

BatchIterator::BatchIterator(std::size_t count, std::size_t batch_size, Rng* shuffle)
    : batch_size_(batch_size), rng_(shuffle), order_(count) {
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reset();
}

void BatchIterator::reset() {
    pos_ = 0;
    if (rng_ != nullptr) rng_->shuffle(std::span<std::size_t>(order_));
}

bool BatchIterator::next(std::vector<std::size_t>& out) {
    out.clear();
    if (pos_ >= order_.size()) return false;
    const std::size_t end = std::min(order_.size(), pos_ + batch_size_);
    out.assign(order_.begin() + static_cast<std::ptrdiff_t>(pos_), order_.begin() + static_cast<std::ptrdiff_t>(end));
    pos_ = end;
    return true;
}

std::size_t BatchIterator::batches_per_epoch() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

}  // namespace harmonica::data
