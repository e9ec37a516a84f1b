#include "harmonica/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace harmonica::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'R', 'M', 'N', 'C', 'K', 'P', 'T'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        out_.insert(out_.end(), c, c + n);
    }
    template <typename T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void text64(const std::string& s) {
        uint<std::uint64_t>(s.size());
        bytes(s.data(), s.size());
    }
    [[nodiscard]] const std::vector<char>& buffer() const { return out_; }

private:
    std::vector<char> out_;
};

class Reader {
public:
    explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

    void need(std::size_t n, const char* what) const {
        if (data_.size() - pos_ < n) {
            throw FormatError("checkpoint truncated at byte offset " + std::to_string(pos_) + " while reading " + what);
        }
    }
    template <typename T>
    T uint(const char* what) {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
    std::string text(std::size_t n, const char* what) {
        need(n, what);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] std::size_t offset() const { return pos_; }
    [[nodiscard]] bool done() const { return pos_ == data_.size(); }

private:
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

}  // namespace

Checkpoint capture_checkpoint(Layer& model, std::string arch_text, std::string meta_text) {
    Checkpoint c;
    c.arch_text = std::move(arch_text);
    c.meta_text = std::move(meta_text);
    for (auto* p : model.parameters()) c.tensors.push_back({p->name, false, p->value});
    for (auto& b : model.buffers()) c.tensors.push_back({b.name, true, *b.tensor});
    return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    Writer w;
    w.bytes(kMagic.data(), kMagic.size());
    w.uint<std::uint32_t>(checkpoint.version);
    w.text64(checkpoint.arch_text);
    w.text64(checkpoint.meta_text);
    w.uint<std::uint64_t>(checkpoint.tensors.size());
    for (const auto& t : checkpoint.tensors) {
        w.uint<std::uint8_t>(t.is_buffer ? 1 : 0);
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        const Shape& s = t.tensor.shape();
        w.uint<std::uint64_t>(s.batch);
        w.uint<std::uint64_t>(s.channels);
        w.uint<std::uint64_t>(s.height);
        w.uint<std::uint64_t>(s.width);
        for (const Scalar v : t.tensor.data()) w.f64(v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw InputError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

    const std::string magic = r.text(kMagic.size(), "magic");
    if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError("bad checkpoint magic at byte offset 0 in " + path.string());
    }
    Checkpoint c;
    c.version = r.uint<std::uint32_t>("version");
    if (c.version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(c.version) + " at byte offset 8");
    }
    c.arch_text = r.text(r.uint<std::uint64_t>("arch length"), "arch text");
    c.meta_text = r.text(r.uint<std::uint64_t>("meta length"), "meta text");
    const auto count = r.uint<std::uint64_t>("tensor count");
    for (std::uint64_t i = 0; i < count; ++i) {
        CheckpointTensor t;
        const auto kind = r.uint<std::uint8_t>("tensor kind");
        if (kind > 1) throw FormatError("bad tensor kind at byte offset " + std::to_string(r.offset() - 1));
        t.is_buffer = kind == 1;
        t.name = r.text(r.uint<std::uint32_t>("name length"), "tensor name");
        Shape s;
        s.batch = r.uint<std::uint64_t>("shape");
        s.channels = r.uint<std::uint64_t>("shape");
        s.height = r.uint<std::uint64_t>("shape");
        s.width = r.uint<std::uint64_t>("shape");
        r.need(s.numel() * 8, "tensor values");
        std::vector<Scalar> values(s.numel());
        for (auto& v : values) v = r.f64("tensor values");
        t.tensor = Tensor(s, std::move(values));
        c.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw FormatError("trailing bytes after checkpoint at byte offset " + std::to_string(r.offset()));
    return c;
}

void restore_checkpoint(Layer& model, const Checkpoint& checkpoint) {
    std::vector<Tensor*> targets;
    std::vector<bool> target_is_buffer;
    for (auto* p : model.parameters()) {
        targets.push_back(&p->value);
        target_is_buffer.push_back(false);
    }
    for (auto& b : model.buffers()) {
        targets.push_back(b.tensor);
        target_is_buffer.push_back(true);
    }
    if (targets.size() != checkpoint.tensors.size()) {
        throw FormatError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) + " tensors, model has " +
                          std::to_string(targets.size()));
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& stored = checkpoint.tensors[i];
        if (stored.is_buffer != target_is_buffer[i] || stored.tensor.shape() != targets[i]->shape()) {
            throw FormatError("checkpoint tensor " + std::to_string(i) + " (" + stored.name + ") " +
                              stored.tensor.shape().str() + " does not match model tensor " +
                              targets[i]->shape().str());
        }
    }
    for (std::size_t i = 0; i < targets.size(); ++i) *targets[i] = checkpoint.tensors[i].tensor;
}

}  // namespace harmonica::nn
