#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "harmonica/cli/config.hpp"
#include "harmonica/models/builders.hpp"

using namespace harmonica;
using namespace harmonica::cli;

TEST_CASE("defaults cover every key") {
    const RunConfig c;
    for (const auto& key : RunConfig::keys()) CHECK_NOTHROW(c.get(key));
    CHECK(c.get("arch.family") == "norb");
    CHECK(c.get_size("train.batch_size") == 64);
    CHECK(c.get_double("train.base_lr") == 0.01);
    const auto t = train_from_config(c);
    CHECK(t.epochs == 200);
    CHECK(t.decay_every_epochs == 50);
    CHECK(t.lr_decay_factor == 10.0);
}

TEST_CASE("parsing") {
    const RunConfig c = RunConfig::parse(
        "# comment\n"
        "[arch]\n"
        "family = wrn\n"
        "depth = 16   # trailing comment\n"
        "width = 4\n"
        "mode = fully_harm\n"
        "lambda = 2\n"
        "\n"
        "[train]\n"
        "base_lr = 0.1\n"
        "brightness_contrast_aug = true\n");
    CHECK(c.get_size("arch.depth") == 16);
    CHECK(c.get_bool("train.brightness_contrast_aug"));
    models::WrnOptions o;
    o.depth = 16;
    o.width = 4;
    o.mode = models::WrnMode::fully_harm;
    o.lambda = 2;
    o.classes = 5;
    o.channels = 2;
    o.size = 96;
    CHECK(arch_from_config(c) == models::wrn_arch(o));
}

TEST_CASE("strictness") {
    CHECK_THROWS_WITH_AS(RunConfig::parse("[arch]\nflavour = x\n"), doctest::Contains("flavour"), ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::parse("[model]\ndepth = 3\n"), doctest::Contains("model"), ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::parse("[train]\nepochs = 3\nepochs = 4\n"), doctest::Contains("duplicate"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::parse("[train]\nepochs = many\n"), doctest::Contains("train.epochs"), ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::parse("[train]\nbase_lr = fast\n"), doctest::Contains("train.base_lr"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::parse("[train]\nstandardize = maybe\n"), doctest::Contains("train.standardize"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(RunConfig::parse("\n\n[train]\nepochs\n"), doctest::Contains("line 4"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("epochs = 3\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[train\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/run.toml"), ConfigError);

    RunConfig c;
    c.set("train.batch_size", "0");
    CHECK_THROWS_WITH_AS(train_from_config(c), doctest::Contains("train.batch_size"), ConfigError);
    c = RunConfig();
    c.set("arch.family", "vgg");
    CHECK_THROWS_WITH_AS(arch_from_config(c), doctest::Contains("arch.family"), ConfigError);
    c = RunConfig();
    c.set("arch.variant", "harm7");
    CHECK_THROWS_AS(arch_from_config(c), ConfigError);
}

TEST_CASE("overrides") {
    RunConfig c;
    c.set_override("train.epochs=7");
    c.set_override("data.synth_kind = lit_shapes");
    CHECK(c.get_size("train.epochs") == 7);
    CHECK(c.get("data.synth_kind") == "lit_shapes");
    CHECK_THROWS_AS(c.set_override("train.epochs"), ConfigError);
    CHECK_THROWS_AS(c.set_override("train.speed=3"), ConfigError);
    CHECK_THROWS_AS(c.set_override("train.epochs=-1"), ConfigError);
}

TEST_CASE("resolved dump parses back to the same configuration") {
    RunConfig c;
    c.set_override("arch.family=file");
    c.set_override("arch.file=/tmp/x.arch");
    c.set_override("train.base_lr=0.125");
    c.set_override("data.train_lighting=bright");
    const RunConfig back = RunConfig::parse(c.to_text());
    for (const auto& key : RunConfig::keys()) CHECK(back.get(key) == c.get(key));
    CHECK(back.to_text() == c.to_text());
}

TEST_CASE("data from config") {
    RunConfig c;
    c.set_override("data.count=30");
    c.set_override("data.test_count=15");
    c.set_override("data.classes=3");
    c.set_override("data.size=8");
    const DataSplits a = data_from_config(c);
    const DataSplits b = data_from_config(c);
    CHECK(a.train.size() == 30);
    REQUIRE(a.test.has_value());
    CHECK(a.test->size() == 15);
    CHECK(a.train.samples.vec() == b.train.samples.vec());
    // train and test come from different streams
    CHECK(a.train.gather({0}).vec() != a.test->gather({0}).vec());
    c.set_override("train.seed=2");
    CHECK(data_from_config(c).train.samples.vec() != a.train.samples.vec());

    c.set_override("data.limit=9");
    CHECK(data_from_config(c).train.size() == 9);

    RunConfig idx;
    idx.set_override("data.source=idx");
    CHECK_THROWS_WITH_AS(data_from_config(idx), doctest::Contains("data.train_images"), ConfigError);
    idx.set_override("data.train_images=/nonexistent/img");
    CHECK_THROWS_WITH_AS(data_from_config(idx), doctest::Contains("no such file"), ConfigError);
    RunConfig cifar;
    cifar.set_override("data.source=cifar");
    CHECK_THROWS_AS(data_from_config(cifar), ConfigError);
}

TEST_CASE("shipped configs describe valid runs") {
    const std::filesystem::path root = HARMONICA_SOURCE_DIR;
    std::size_t seen = 0;
    for (const auto& entry : std::filesystem::directory_iterator(root / "configs")) {
        if (entry.path().extension() != ".toml") continue;
        INFO(entry.path().filename().string());
        RunConfig c = RunConfig::load(entry.path());
        if (c.get("arch.family") == "file") c.set("arch.file", (root / c.get("arch.file")).string());
        const auto arch = arch_from_config(c);
        CHECK_NOTHROW(models::infer_shapes(arch));
        CHECK_NOTHROW(train_from_config(c));
        if (c.get("data.source") == "synth") {
            const auto d = data_from_config(c);
            CHECK(d.train.sample_shape() == arch.input_shape());
        }
        ++seen;
    }
    CHECK(seen >= 5);
}
