#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "harmonica/models/builders.hpp"
#include "harmonica/nn/checkpoint.hpp"
#include "harmonica/nn/gradcheck.hpp"
#include "harmonica/nn/layers.hpp"
#include "harmonica/nn/optim.hpp"
#include "harmonica/ops.hpp"
#include "support.hpp"

using namespace harmonica;
using namespace harmonica::nn;
using test::random_tensor;
using test::scaled_error;

namespace {

HarmonicConfig harm_config(std::size_t n, std::size_t m, std::size_t k, std::size_t stride, std::size_t pad,
                           std::optional<std::size_t> lambda = std::nullopt, bool bn = false, bool drop_dc = false) {
    return HarmonicConfig{n, m, k, stride, pad, lambda, bn, drop_dc};
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
    std::vector<int> l(n);
    for (auto& v : l) v = static_cast<int>(rng.below(classes));
    return l;
}

// Appends a linear head mapping whatever `body` produces to `classes` logits.
GradCheckReport check_with_head(std::unique_ptr<Sequential> body, const Shape& in, std::size_t classes, Rng& rng,
                                double tol = 1e-4) {
    Tensor probe = body->forward(Tensor(in), false);
    body->emplace<Linear>(probe.shape().sample(), classes, rng);
    const Tensor x = random_tensor(in, rng);
    const auto labels = random_labels(in.batch, classes, rng);
    GradCheckOptions o;
    o.tolerance = tol;
    return grad_check(*body, x, labels, o);
}

}  // namespace

// ------------------------------------------------------------ harmonic block

TEST_CASE("DC-only block with unit weight is scaled average pooling") {
    Rng rng(1);
    HarmonicBlock h(harm_config(1, 1, 2, 2, 0, 1), rng);
    h.weight().value.fill(1.0);
    const Tensor out = h.forward(Tensor(1, 1, 4, 4, 1.0), false);
    REQUIRE(out.shape() == Shape{1, 1, 2, 2});
    for (const Scalar v : out.data()) CHECK(v == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("zero weights give a zero output") {
    Rng rng(2);
    HarmonicBlock h(harm_config(2, 3, 3, 1, 1), rng);
    h.weight().value.fill(0.0);
    const Tensor y = h.forward(random_tensor({2, 2, 5, 5}, rng), true);
    for (const Scalar v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("full-spectrum block equals conv2d with the composed kernel (grid)") {
    Rng rng(3);
    std::size_t configs = 0;
    for (std::size_t n : {1, 3})
        for (std::size_t m : {1, 4})
            for (std::size_t k : {1, 2, 3, 5})
                for (std::size_t stride : {1, 2})
                    for (std::size_t pad : {std::size_t{0}, k / 2}) {
                        HarmonicBlock h(harm_config(n, m, k, stride, pad), rng);
                        const Tensor x = random_tensor({2, n, 7, 6}, rng);
                        const Tensor y = h.forward(x, false);
                        // composed kernel from the long-double filter formula
                        Tensor kernel(m, n, k, k);
                        const Tensor& w = h.weight().value;
                        for (std::size_t mm = 0; mm < m; ++mm)
                            for (std::size_t nn = 0; nn < n; ++nn)
                                for (std::size_t p = 0; p < k * k; ++p)
                                    for (std::size_t yy = 0; yy < k; ++yy)
                                        for (std::size_t xx = 0; xx < k; ++xx)
                                            kernel.at(mm, nn, yy, xx) +=
                                                w[mm * n * k * k + nn * k * k + p] *
                                                static_cast<double>(test::dct_entry(k, p / k, p % k, yy, xx));
                        CHECK(scaled_error(h.composed_kernel(), kernel) < 1e-12);
                        CHECK(scaled_error(y, conv2d(x, kernel, ConvSpec::square(k, stride, pad))) < 1e-6);
                        ++configs;
                    }
    CHECK(configs >= 24);
}

TEST_CASE("full-spectrum block has exactly as many parameters as the matching conv") {
    Rng rng(4);
    for (std::size_t n : {1, 3, 8})
        for (std::size_t m : {1, 16})
            for (std::size_t k : {1, 3, 4, 5}) {
                HarmonicBlock h(harm_config(n, m, k, 1, 0), rng);
                Conv2d c(n, m, k, 1, 0, rng);
                CHECK(h.parameter_count() == c.parameter_count());
                CHECK(h.parameter_count() == n * m * k * k);
            }
    HarmonicBlock bn(harm_config(3, 4, 3, 1, 1, 2, true), rng);
    CHECK(bn.parameter_count() == 3 * 3 * 4);
    HarmonicBlock dc(harm_config(3, 4, 3, 1, 1, 2, false, true), rng);
    CHECK(dc.parameter_count() == 3 * 2 * 4);
}

TEST_CASE("a lambda block is reproduced by a lambda+1 block with extra weights zero") {
    Rng rng(5);
    for (std::size_t k = 2; k <= 5; ++k)
        for (std::size_t l = 1; l < k; ++l) {
            HarmonicBlock small(harm_config(2, 3, k, 1, k / 2, l), rng);
            HarmonicBlock big(harm_config(2, 3, k, 1, k / 2, l + 1), rng);
            const std::size_t ps = small.selection().count();
            const std::size_t pb = big.selection().count();
            auto& wb = big.weight().value;
            wb.fill(0.0);
            for (std::size_t m = 0; m < 3; ++m)
                for (std::size_t n = 0; n < 2; ++n)
                    for (std::size_t p = 0; p < ps; ++p) {
                        const auto q = big.selection().position(small.selection().indices[p]);
                        REQUIRE(q.has_value());
                        wb[m * 2 * pb + n * pb + *q] = small.weight().value[m * 2 * ps + n * ps + p];
                    }
            const Tensor x = random_tensor({2, 2, 6, 6}, rng);
            CHECK(small.forward(x, false).vec() == big.forward(x, false).vec());
        }
}

TEST_CASE("harmonic backward examples") {
    Rng rng(6);
    HarmonicBlock h(harm_config(2, 3, 3, 1, 1, 2), rng);
    const Tensor x = random_tensor({2, 2, 5, 5}, rng);
    const Tensor y = h.forward(x, true);
    h.zero_grad();
    const Tensor gx = h.backward(Tensor(y.shape()));
    for (const Scalar v : gx.data()) CHECK(v == 0.0);
    for (const Scalar v : h.weight().grad.data()) CHECK(v == 0.0);

    // one window, DC only: dL/dw = g * K * mean
    for (std::size_t K : {2, 3, 4}) {
        HarmonicBlock dc(harm_config(1, 1, K, K, 0, 1), rng);
        const Tensor px = random_tensor({1, 1, K, K}, rng);
        double mean = 0.0;
        for (const Scalar v : px.data()) mean += v;
        mean /= static_cast<double>(K * K);
        dc.forward(px, true);
        dc.zero_grad();
        dc.backward(Tensor({1, 1, 1, 1}, {0.7}));
        CHECK(dc.weight().grad[0] == doctest::Approx(0.7 * K * mean).epsilon(1e-13));
    }
}

TEST_CASE("harmonic weight gradients match finite differences (B=2,N=2,M=3,K=3,H=W=5)") {
    Rng rng(7);
    auto body = std::make_unique<Sequential>();
    body->emplace<HarmonicBlock>(harm_config(2, 3, 3, 1, 1), rng);
    const auto r = check_with_head(std::move(body), {2, 2, 5, 5}, 3, rng);
    CHECK_MESSAGE(r.passed, r.diagnostics);
}

TEST_CASE("backward without a forward is a state error") {
    Rng rng(8);
    std::vector<LayerPtr> layers;
    layers.push_back(std::make_unique<HarmonicBlock>(harm_config(1, 1, 2, 1, 0), rng));
    layers.push_back(std::make_unique<Conv2d>(1, 1, 2, 1, 0, rng));
    layers.push_back(std::make_unique<BatchNorm>(1));
    layers.push_back(std::make_unique<ReLU>());
    layers.push_back(std::make_unique<Dropout>(0.5, Rng(1)));
    layers.push_back(std::make_unique<Pool>(PoolSpec{PoolKind::max, 2, 1, 0}));
    layers.push_back(std::make_unique<Linear>(16, 2, rng));
    for (auto& l : layers) {
        CHECK_THROWS_AS(l->backward(Tensor(1, 1, 3, 3)), StateError);
        const Tensor y = l->forward(random_tensor({1, 1, 4, 4}, rng), true);
        l->backward(Tensor(y.shape()));
        CHECK_THROWS_AS(l->backward(Tensor(y.shape())), StateError);
    }
}

TEST_CASE("channel mismatch is a dimension error") {
    Rng rng(9);
    HarmonicBlock h(harm_config(2, 2, 3, 1, 1), rng);
    CHECK_THROWS_AS(h.forward(Tensor(1, 3, 5, 5), true), DimensionError);
}

// ------------------------------------------------------------ normalization

TEST_CASE("spectrum BN yields zero-mean unit-variance responses per frequency") {
    Rng rng(10);
    const std::size_t n = 2, k = 3;
    const auto sel_count = 6;
    // identity recombination exposes the normalized responses directly
    HarmonicBlock h(harm_config(n, n * sel_count, k, 1, 1, 3, true), rng);
    h.weight().value.fill(0.0);
    for (std::size_t c = 0; c < n * sel_count; ++c) h.weight().value[c * n * sel_count + c] = 1.0;
    // pixel-scale input (0..255): eps becomes negligible next to the variances
    const Tensor x = random_tensor({8, n, 6, 6}, rng, 0.0, 255.0);
    const Tensor y = h.forward(x, true);
    const double count = 8 * 36;
    for (std::size_t c = 0; c < n * sel_count; ++c) {
        double mean = 0.0;
        for (std::size_t b = 0; b < 8; ++b)
            for (const Scalar v : y.plane(b, c)) mean += v;
        mean /= count;
        double var = 0.0;
        for (std::size_t b = 0; b < 8; ++b)
            for (const Scalar v : y.plane(b, c)) var += (v - mean) * (v - mean);
        var /= count;
        CHECK(std::abs(mean) < 1e-8);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("normalized variance equals s2 / (s2 + eps) exactly at unit scale") {
    Rng rng(11);
    BatchNorm bn(3, false);
    const Tensor x = random_tensor({4, 3, 5, 5}, rng, -0.01, 0.01);
    const Tensor y = bn.forward(x, true);
    for (std::size_t c = 0; c < 3; ++c) {
        long double m = 0.0L, s2 = 0.0L, ym = 0.0L, yv = 0.0L;
        for (std::size_t b = 0; b < 4; ++b)
            for (const Scalar v : x.plane(b, c)) m += v;
        m /= 100;
        for (std::size_t b = 0; b < 4; ++b)
            for (const Scalar v : x.plane(b, c)) s2 += (v - m) * (v - m);
        s2 /= 100;
        for (std::size_t b = 0; b < 4; ++b)
            for (const Scalar v : y.plane(b, c)) ym += v;
        ym /= 100;
        for (std::size_t b = 0; b < 4; ++b)
            for (const Scalar v : y.plane(b, c)) yv += (v - ym) * (v - ym);
        yv /= 100;
        CHECK(std::abs(static_cast<double>(ym)) < 1e-12);
        CHECK(static_cast<double>(yv) == doctest::Approx(static_cast<double>(s2 / (s2 + kBatchNormEps))).epsilon(1e-10));
    }
}

TEST_CASE("spectrum BN off reproduces the plain weighted sum of DCT responses") {
    Rng rng(12);
    HarmonicBlock h(harm_config(2, 3, 3, 2, 1, 2), rng);
    const Tensor x = random_tensor({2, 2, 7, 7}, rng);
    const Tensor y = h.forward(x, true);
    const Tensor r = dct_transform(x, h.basis(), h.selection(), h.transform_spec());
    const std::size_t np = r.shape().channels;
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t m = 0; m < 3; ++m)
            for (std::size_t i = 0; i < y.shape().plane(); ++i) {
                long double s = 0.0L;
                for (std::size_t c = 0; c < np; ++c)
                    s += static_cast<long double>(h.weight().value[m * np + c]) * r.plane(b, c)[i];
                CHECK(std::abs(y.plane(b, m)[i] - static_cast<double>(s)) < 1e-14);
            }
}

TEST_CASE("batch norm running statistics and eval mode") {
    Rng rng(13);
    BatchNorm bn(2);
    const Tensor x = random_tensor({4, 2, 3, 3}, rng, 1.0, 3.0);
    bn.forward(x, true);
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0.0;
        for (std::size_t b = 0; b < 4; ++b)
            for (const Scalar v : x.plane(b, c)) m += v;
        m /= 36;
        double s = 0.0;
        for (std::size_t b = 0; b < 4; ++b)
            for (const Scalar v : x.plane(b, c)) s += (v - m) * (v - m);
        CHECK(bn.running_mean()[c] == doctest::Approx(0.1 * m).epsilon(1e-13));
        CHECK(bn.running_var()[c] == doctest::Approx(0.9 + 0.1 * s / 35).epsilon(1e-13));
    }
    // eval uses the running estimates
    const Tensor y = bn.forward(x, false);
    const double expect = (x[0] - bn.running_mean()[0]) / std::sqrt(bn.running_var()[0] + kBatchNormEps);
    CHECK(y[0] == doctest::Approx(expect).epsilon(1e-13));
    CHECK(bn.parameter_count() == 4);
    CHECK(BatchNorm(5, false).parameter_count() == 0);
}

// ------------------------------------------------------------ dropout

TEST_CASE("dropout") {
    CHECK_THROWS_AS(Dropout(1.0, Rng(1)), ConfigError);
    CHECK_THROWS_AS(Dropout(-0.1, Rng(1)), ConfigError);
    Dropout d(0.5, Rng(2));
    Rng rng(3);
    const Tensor x = random_tensor({4, 8, 8, 8}, rng, 1.0, 2.0);
    CHECK(d.forward(x, false).vec() == x.vec());
    const Tensor y = d.forward(x, true);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] != 0.0) {
            ++kept;
            CHECK(y[i] == doctest::Approx(2.0 * x[i]).epsilon(1e-15));
        }
    }
    const double frac = static_cast<double>(kept) / static_cast<double>(x.size());
    CHECK(frac > 0.45);
    CHECK(frac < 0.55);
    Dropout none(0.0, Rng(4));
    CHECK(none.forward(x, true).vec() == x.vec());
}

// ------------------------------------------------------------ finite differences

TEST_CASE("every layer type passes finite-difference checks over 20 seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(100 + seed);
        struct Case {
            const char* name;
            std::function<std::unique_ptr<Sequential>(Rng&)> make;
            Shape in;
        };
        const std::vector<Case> cases{
            {"conv", [](Rng& r) { auto s = std::make_unique<Sequential>(); s->emplace<Conv2d>(2, 3, 3, 2, 1, r); return s; },
             {2, 2, 5, 5}},
            {"harm full", [](Rng& r) { auto s = std::make_unique<Sequential>(); s->emplace<HarmonicBlock>(harm_config(2, 3, 3, 1, 1), r); return s; },
             {2, 2, 5, 5}},
            {"harm lambda2 stride2", [](Rng& r) { auto s = std::make_unique<Sequential>(); s->emplace<HarmonicBlock>(harm_config(2, 2, 3, 2, 1, 2), r); return s; },
             {2, 2, 5, 5}},
            {"harm drop_dc", [](Rng& r) { auto s = std::make_unique<Sequential>(); s->emplace<HarmonicBlock>(harm_config(1, 2, 4, 4, 0, std::nullopt, false, true), r); return s; },
             {2, 1, 8, 8}},
            {"harm spectrum bn", [](Rng& r) { auto s = std::make_unique<Sequential>(); s->emplace<HarmonicBlock>(harm_config(2, 2, 2, 1, 0, 2, true), r); return s; },
             {4, 2, 4, 4}},
            {"bn", [](Rng&) { auto s = std::make_unique<Sequential>(); s->emplace<BatchNorm>(3); return s; },
             {4, 3, 3, 3}},
            {"relu", [](Rng&) { auto s = std::make_unique<Sequential>(); s->emplace<ReLU>(); return s; },
             {2, 2, 3, 3}},
            {"dropout", [](Rng& r) { auto s = std::make_unique<Sequential>(); s->emplace<Dropout>(0.3, Rng(r.next_u64())); return s; },
             {2, 2, 3, 3}},
            {"max pool", [](Rng&) { auto s = std::make_unique<Sequential>(); s->emplace<Pool>(PoolSpec{PoolKind::max, 3, 2, 1}); return s; },
             {2, 2, 5, 5}},
            {"avg pool", [](Rng&) { auto s = std::make_unique<Sequential>(); s->emplace<Pool>(PoolSpec{PoolKind::avg, 3, 2, 1}); return s; },
             {2, 2, 5, 5}},
            {"linear", [](Rng& r) { auto s = std::make_unique<Sequential>(); s->emplace<Linear>(12, 4, r); return s; },
             {3, 3, 2, 2}},
        };
        for (const auto& c : cases) {
            auto body = c.make(rng);
            const auto r = check_with_head(std::move(body), c.in, 3, rng);
            INFO(c.name << " seed " << seed << ": " << r.diagnostics);
            CHECK(r.passed);
        }
    }
}

TEST_CASE("residual units pass finite-difference checks") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (const char* body : {"conv", "harm"}) {
            const std::string text = std::string("input 2x6x6\nclasses 3\nres 3,3x3/2 body=") + body +
                                      " dropout=0.2\nres 3,3x3/1 body=" + body + "\npool avg 3x3/3\nfc 3\n";
            auto net = models::build(models::parse_arch(text), seed);
            Rng rng(seed);
            const Tensor x = random_tensor({4, 2, 6, 6}, rng);
            const auto labels = random_labels(4, 3, rng);
            const auto r = grad_check(*net.net, x, labels);
            INFO(body << " seed " << seed << ": " << r.diagnostics);
            CHECK(r.passed);
        }
    }
}

TEST_CASE("grad_check examples") {
    Rng rng(14);
    {
        Sequential m;
        m.emplace<Linear>(6, 4, rng);
        const Tensor x = random_tensor({5, 6, 1, 1}, rng);
        GradCheckOptions o;
        o.tolerance = 1e-6;
        const auto r = grad_check(m, x, random_labels(5, 4, rng), o);
        CHECK_MESSAGE(r.passed, r.diagnostics);
    }
    {
        auto net = models::build(models::resolve_arch("toy-harm-l2"), 3);
        const auto r = grad_check(*net.net, random_tensor({3, 2, 6, 6}, rng), random_labels(3, 3, rng));
        CHECK_MESSAGE(r.passed, r.diagnostics);
    }
    {
        auto net = models::build(models::resolve_arch("toy-harm-bn"), 4);
        const auto r = grad_check(*net.net, random_tensor({4, 2, 6, 6}, rng), random_labels(4, 3, rng));
        CHECK_MESSAGE(r.passed, r.diagnostics);
        // running statistics are left as they were
        auto bufs = net.net->buffers();
        CHECK(bufs.front().tensor->vec() == std::vector<Scalar>(bufs.front().tensor->size(), 0.0));
    }
    {
        // non-finite loss is a failed check with diagnostics, not an exception
        Sequential m;
        auto& lin = m.emplace<Linear>(2, 2, rng);
        lin.weight().value.fill(std::numeric_limits<double>::infinity());
        const auto r = grad_check(m, Tensor(1, 2, 1, 1, 1.0), std::vector<int>{0});
        CHECK_FALSE(r.passed);
        CHECK(r.diagnostics.find("non-finite") != std::string::npos);
    }
}

// ------------------------------------------------------------ optimizer

TEST_CASE("sgd examples") {
    Parameter p("w", Tensor({1, 3, 1, 1}, {1, 2, 3}));
    Parameter* list[] = {&p};
    sgd_step(list, {0.1, 0.9, 0.0});
    CHECK(p.value.vec() == std::vector<Scalar>{1, 2, 3});

    p.grad = Tensor({1, 3, 1, 1}, {0.5, -1, 2});
    sgd_step(list, {0.1, 0.0, 0.0});
    CHECK(p.value[0] == 1 - 0.1 * 0.5);
    CHECK(p.value[1] == 2 + 0.1);
    CHECK(p.value[2] == 3 - 0.1 * 2);

    Parameter q("q", Tensor(1, 1, 1, 1, 0.0));
    q.grad.fill(1.0);
    Parameter* ql[] = {&q};
    sgd_step(ql, {0.1, 0.9, 0.0});
    sgd_step(ql, {0.1, 0.9, 0.0});
    CHECK(q.value[0] == doctest::Approx(-(0.1 + 0.1 * 1.9)).epsilon(1e-15));

    Parameter d("d", Tensor(1, 1, 1, 1, 2.0));
    Parameter* dl[] = {&d};
    sgd_step(dl, {0.5, 0.0, 0.1});
    CHECK(d.value[0] == doctest::Approx(2.0 - 0.5 * 0.2).epsilon(1e-15));
}

TEST_CASE("identical seeds give bitwise-identical losses for 5 steps") {
    auto run = [] {
        auto net = models::build(models::resolve_arch("toy-harm3"), 9);
        Rng rng(10);
        const Tensor x = random_tensor({4, 1, 12, 12}, rng);
        const auto labels = random_labels(4, 3, rng);
        auto params = net.net->parameters();
        std::vector<double> losses;
        for (int i = 0; i < 5; ++i) {
            net.net->zero_grad();
            const auto l = softmax_cross_entropy(net.forward(x, true), labels);
            net.backward(softmax_cross_entropy_grad(l, labels));
            sgd_step(params, {0.05, 0.9, 5e-4});
            losses.push_back(l.loss);
        }
        return losses;
    };
    CHECK(run() == run());
}

// ------------------------------------------------------------ checkpoints

TEST_CASE("checkpoint round trip and corruption") {
    const auto dir = std::filesystem::temp_directory_path() / "harmonica_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "m.ckpt";
    auto net = models::build(models::resolve_arch("toy-harm-bn"), 5);
    Rng rng(1);
    net.forward(random_tensor({4, 2, 6, 6}, rng), true);  // move BN statistics off their defaults
    write_checkpoint(path, capture_checkpoint(*net.net, models::to_text(net.arch), "k=v\n"));

    const Checkpoint c = read_checkpoint(path);
    CHECK(c.version == kCheckpointVersion);
    CHECK(c.meta_text == "k=v\n");
    CHECK(models::parse_arch(c.arch_text) == net.arch);
    auto other = models::build(net.arch, 6);
    restore_checkpoint(*other.net, c);
    const Tensor x = random_tensor({2, 2, 6, 6}, rng);
    CHECK(other.forward(x, false).vec() == net.forward(x, false).vec());

    // little-endian magic and version
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    CHECK(bytes.substr(0, 8) == "HRMNCKPT");
    CHECK(bytes[8] == 1);
    CHECK(bytes[9] == 0);

    std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS_WITH_AS(read_checkpoint(dir / "short.ckpt"), doctest::Contains("byte offset"), FormatError);
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream(dir / "bad.ckpt", std::ios::binary) << bad;
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), FormatError);

    auto mismatch = models::build(models::resolve_arch("toy-harm-l2"), 1);
    CHECK_THROWS_AS(restore_checkpoint(*mismatch.net, c), FormatError);
    std::filesystem::remove_all(dir);
}
