#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "harmonica/data/dataset.hpp"

using namespace harmonica;
using namespace harmonica::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("harmonica_data_" + std::to_string(Rng(std::random_device{}()).next_u64()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>(v >> s));
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// 10 images of 28x28, pixel (i, y, x) = (i + y + x) % 256
std::vector<unsigned char> idx_images() {
    std::vector<unsigned char> b;
    put_be32(b, 0x00000803);
    put_be32(b, 10);
    put_be32(b, 28);
    put_be32(b, 28);
    for (unsigned i = 0; i < 10; ++i)
        for (unsigned y = 0; y < 28; ++y)
            for (unsigned x = 0; x < 28; ++x) b.push_back(static_cast<unsigned char>((i * 7 + y + x) % 256));
    return b;
}

std::vector<unsigned char> idx_labels(std::size_t n = 10) {
    std::vector<unsigned char> b;
    put_be32(b, 0x00000801);
    put_be32(b, static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) b.push_back(static_cast<unsigned char>(i % 4));
    return b;
}

}  // namespace

TEST_CASE("IDX loading") {
    TempDir dir;
    const auto img = idx_images();
    CHECK(img.size() == 16 + 10 * 28 * 28);
    write_bytes(dir.path / "img", img);
    write_bytes(dir.path / "lbl", idx_labels());
    const Dataset d = load_idx(dir.path / "img", dir.path / "lbl");
    CHECK(d.size() == 10);
    CHECK(d.classes == 4);
    CHECK(d.samples.shape() == Shape{10, 1, 28, 28});
    CHECK(d.labels[5] == 1);
    CHECK(d.samples.at(3, 0, 2, 5) == doctest::Approx((3 * 7 + 2 + 5) / 255.0));

    SUBCASE("truncated image payload reports the offset") {
        auto cut = img;
        cut.resize(16 + 5 * 784 + 17);
        write_bytes(dir.path / "img", cut);
        CHECK_THROWS_WITH_AS(load_idx(dir.path / "img", dir.path / "lbl"), doctest::Contains("offset"), FormatError);
    }
    SUBCASE("truncated header") {
        write_bytes(dir.path / "img", std::vector<unsigned char>(img.begin(), img.begin() + 9));
        CHECK_THROWS_AS(load_idx(dir.path / "img", dir.path / "lbl"), FormatError);
    }
    SUBCASE("bad magic") {
        auto bad = img;
        bad[2] = 0x09;
        write_bytes(dir.path / "img", bad);
        CHECK_THROWS_WITH_AS(load_idx(dir.path / "img", dir.path / "lbl"), doctest::Contains("offset 0"), FormatError);
    }
    SUBCASE("trailing bytes") {
        auto extra = img;
        extra.push_back(0);
        write_bytes(dir.path / "img", extra);
        CHECK_THROWS_AS(load_idx(dir.path / "img", dir.path / "lbl"), FormatError);
    }
    SUBCASE("count mismatch") {
        write_bytes(dir.path / "lbl", idx_labels(9));
        CHECK_THROWS(load_idx(dir.path / "img", dir.path / "lbl"));
    }
    SUBCASE("label outside the declared classes") {
        CHECK_THROWS_AS(load_idx(dir.path / "img", dir.path / "lbl", 3), InputError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_idx(dir.path / "nope", dir.path / "lbl"), InputError);
    }
}

TEST_CASE("IDX round trip is byte identical") {
    TempDir dir;
    write_bytes(dir.path / "img", idx_images());
    write_bytes(dir.path / "lbl", idx_labels());
    const Dataset d = load_idx(dir.path / "img", dir.path / "lbl");
    write_idx(dir.path / "img2", dir.path / "lbl2", d);
    CHECK(read_bytes(dir.path / "img2") == read_bytes(dir.path / "img"));
    CHECK(read_bytes(dir.path / "lbl2") == read_bytes(dir.path / "lbl"));

    // rank 4 for multi-channel data
    Dataset stereo = synth_dataset({SynthKind::oriented_gratings, 10, 12, 5, 2, 3, {}});
    for (auto& v : stereo.samples.vec()) v = std::round(v * 255.0) / 255.0;
    write_idx(dir.path / "s_img", dir.path / "s_lbl", stereo);
    const Dataset back = load_idx(dir.path / "s_img", dir.path / "s_lbl");
    CHECK(back.samples.shape() == stereo.samples.shape());
    CHECK(back.labels == stereo.labels);
    for (std::size_t i = 0; i < back.samples.size(); ++i) CHECK(back.samples[i] == doctest::Approx(stereo.samples[i]));
}

TEST_CASE("CIFAR binary records") {
    TempDir dir;
    std::vector<unsigned char> rec(3073, 0);
    rec[0] = 7;
    rec[1] = 1;  // red channel, pixel (0, 0)
    rec[1 + 1024 + 33] = 255;  // green channel, pixel (1, 1)
    write_bytes(dir.path / "b10", rec);
    const Dataset d = load_cifar_binary({dir.path / "b10"}, 10);
    CHECK(d.size() == 1);
    CHECK(d.labels[0] == 7);
    CHECK(d.samples.shape() == Shape{1, 3, 32, 32});
    CHECK(d.samples.at(0, 0, 0, 0) == doctest::Approx(1.0 / 255));
    CHECK(d.samples.at(0, 1, 1, 1) == 1.0);
    CHECK(d.samples.at(0, 2, 0, 0) == 0.0);

    std::vector<unsigned char> rec100(3074, 0);
    rec100[0] = 3;
    rec100[1] = 42;
    write_bytes(dir.path / "b100", rec100);
    const Dataset f = load_cifar_binary({dir.path / "b100"}, 100);
    CHECK(f.labels[0] == 42);

    // two files concatenate
    CHECK(load_cifar_binary({dir.path / "b10", dir.path / "b10"}, 10).size() == 2);

    rec.pop_back();
    write_bytes(dir.path / "bad", rec);
    CHECK_THROWS_AS(load_cifar_binary({dir.path / "bad"}, 10), FormatError);
    CHECK_THROWS_AS(load_cifar_binary({dir.path / "b10"}, 20), ConfigError);
}

TEST_CASE("synthetic sets are deterministic and in range") {
    for (auto kind : {SynthKind::frequency_classes, SynthKind::oriented_gratings, SynthKind::lit_shapes}) {
        SynthOptions o;
        o.kind = kind;
        o.count = 24;
        o.size = 16;
        o.classes = 4;
        o.seed = 11;
        const Dataset a = synth_dataset(o);
        const Dataset b = synth_dataset(o);
        CHECK(a.samples.vec() == b.samples.vec());
        CHECK(a.labels == b.labels);
        for (const double v : a.samples.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.labels[i] == static_cast<int>(i % 4));
        o.seed = 12;
        CHECK(synth_dataset(o).samples.vec() != a.samples.vec());
        CHECK(parse_synth_kind(to_string(kind)) == kind);
    }
    SynthOptions bad;
    bad.count = 7;
    bad.classes = 2;
    CHECK_THROWS_AS(synth_dataset(bad), ConfigError);
    CHECK_THROWS_AS(parse_synth_kind("noise"), ConfigError);
}

TEST_CASE("lighting only rescales the same shapes") {
    SynthOptions o;
    o.kind = SynthKind::lit_shapes;
    o.count = 40;
    o.size = 32;
    o.classes = 4;
    o.seed = 5;
    const Dataset standard = synth_dataset(o);
    for (const char* name : {"bright", "dark"}) {
        o.lighting = parse_lighting(name);
        const Dataset lit = synth_dataset(o);
        for (std::size_t i = 0; i < lit.samples.size(); ++i)
            CHECK(lit.samples[i] ==
                  doctest::Approx(o.lighting.gain * standard.samples[i] + o.lighting.offset).epsilon(1e-12));
        const double m0 = std::accumulate(standard.samples.data().begin(), standard.samples.data().end(), 0.0);
        const double m1 = std::accumulate(lit.samples.data().begin(), lit.samples.data().end(), 0.0);
        const double n = static_cast<double>(lit.samples.size());
        CHECK(m1 / n == doctest::Approx(o.lighting.gain * m0 / n + o.lighting.offset).epsilon(1e-9));
    }
    CHECK_THROWS_AS(parse_lighting("dusk"), ConfigError);
    o.lighting = {"harsh", 2.0, 0.5};
    CHECK_THROWS_AS(synth_dataset(o), ConfigError);
}

TEST_CASE("batch iteration partitions every epoch") {
    for (std::size_t count : {1, 10, 64, 101})
        for (std::size_t batch : {1, 7, 64, 200}) {
            Rng rng(count * 1000 + batch);
            BatchIterator it(count, batch, &rng);
            for (int epoch = 0; epoch < 3; ++epoch) {
                it.reset();
                std::multiset<std::size_t> seen;
                std::vector<std::size_t> b;
                std::size_t batches = 0;
                while (it.next(b)) {
                    CHECK(!b.empty());
                    CHECK(b.size() <= batch);
                    seen.insert(b.begin(), b.end());
                    ++batches;
                }
                CHECK(batches == it.batches_per_epoch());
                CHECK(seen.size() == count);
                std::size_t expect = 0;
                for (const auto i : seen) CHECK(i == expect++);
            }
        }
    BatchIterator ordered(5, 2);
    std::vector<std::size_t> b;
    ordered.reset();
    ordered.next(b);
    CHECK(b == std::vector<std::size_t>{0, 1});
}

TEST_CASE("subset and gather") {
    const Dataset d = synth_dataset({SynthKind::frequency_classes, 6, 8, 3, 1, 2, {}});
    const Dataset s = d.subset({4, 1});
    CHECK(s.size() == 2);
    CHECK(s.labels == std::vector<int>{1, 1});
    CHECK(s.samples.at(0, 0, 3, 3) == d.samples.at(4, 0, 3, 3));
    CHECK(d.gather({2}).shape() == Shape{1, 1, 8, 8});
    Dataset broken = d;
    broken.labels[0] = 5;
    CHECK_THROWS_AS(broken.validate(), InputError);
}
