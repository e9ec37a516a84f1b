// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "harmonica/costing/cost.hpp"
#include "harmonica/models/builders.hpp"
#include "harmonica/nn/gradcheck.hpp"
#include "harmonica/nn/layers.hpp"
#include "harmonica/ops.hpp"
#include "harmonica/spectral.hpp"
#include "harmonica/train/trainer.hpp"
#include "support.hpp"

using namespace harmonica;
using test::random_tensor;
using test::scaled_error;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
    std::vector<int> l(n);
    for (auto& v : l) v = static_cast<int>(rng.below(classes));
    return l;
}

// ------------------------------------------------------------ 1

Outcome basis_correctness() {
    Outcome o;
    double worst = 0.0;
    for (std::size_t k = 1; k <= 8; ++k) {
        const DCTBasis basis(k);
        const Tensor& f = basis.filters();
        const std::size_t n = k * k;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                long double dot = 0.0L;
                for (std::size_t i = 0; i < n; ++i) dot += static_cast<long double>(f[a * n + i]) * f[b * n + i];
                worst = std::max(worst, std::abs(static_cast<double>(dot) - (a == b ? 1.0 : 0.0)));
            }
    }
    o.require(worst < 1e-10, "Gram deviation " + fmt(worst));
    const DCTBasis k2(2);
    const auto f0 = k2.factor(0);
    const auto f1 = k2.factor(1);
    const double r = 0.70711;
    o.require(std::abs(f0[0] - r) < 5e-6 && std::abs(f0[1] - r) < 5e-6, "K=2 DC factor");
    o.require(std::abs(f1[0] - r) < 5e-6 && std::abs(f1[1] + r) < 5e-6, "K=2 first factor");
    if (o.pass) o.detail = "max |G - I| = " + fmt(worst);
    return o;
}

// ------------------------------------------------------------ 2

Outcome truncation_counts() {
    Outcome o;
    std::size_t checked = 0;
    for (std::size_t k = 1; k <= 8; ++k)
        for (std::size_t l = 1; l <= k; ++l) {
            const auto sel = select_frequencies(k, l);
            o.require(sel.count() == l * (l + 1) / 2, "P for K=" + std::to_string(k) + " lambda=" + std::to_string(l));
            std::set<std::pair<std::size_t, std::size_t>> seen;
            for (const auto f : sel.indices) {
                o.require(f.u + f.v < l, "frequency outside u+v<lambda");
                seen.insert({f.u, f.v});
            }
            o.require(seen.size() == sel.count(), "duplicate frequency");
            ++checked;
        }
    const auto l1 = select_frequencies(5, 1).indices;
    o.require(l1 == std::vector<Frequency>{{0, 0}}, "lambda=1 set");
    const auto l2 = select_frequencies(5, 2).indices;
    const std::set<std::pair<std::size_t, std::size_t>> got{{l2[0].u, l2[0].v}, {l2[1].u, l2[1].v}, {l2[2].u, l2[2].v}};
    o.require(l2.size() == 3 && got == std::set<std::pair<std::size_t, std::size_t>>{{0, 0}, {0, 1}, {1, 0}},
              "lambda=2 set");
    if (o.pass) o.detail = std::to_string(checked) + " (K, lambda) pairs";
    return o;
}

// ------------------------------------------------------------ 3

Outcome dc_pooling_identity() {
    Outcome o;
    Rng rng(3);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = 1 + rng.below(5);
        const std::size_t c = 1 + rng.below(3);
        const std::size_t h = k * (1 + rng.below(4));
        const std::size_t w = k * (1 + rng.below(4));
        const Tensor x = random_tensor({2, c, h, w}, rng, -3.0, 3.0);
        const auto basis = shared_dct_basis(k);
        const Tensor dc = dct_transform(x, *basis, select_frequencies(k, 1), ConvSpec::square(k, k, 0));
        // window means computed directly
        Tensor pooled(2, c, h / k, w / k);
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t oy = 0; oy < h / k; ++oy)
                    for (std::size_t ox = 0; ox < w / k; ++ox) {
                        long double s = 0.0L;
                        for (std::size_t y = 0; y < k; ++y)
                            for (std::size_t xx = 0; xx < k; ++xx) s += x.at(b, ch, oy * k + y, ox * k + xx);
                        pooled.at(b, ch, oy, ox) = static_cast<double>(static_cast<long double>(k) * s / (k * k));
                    }
        o.require(dc.shape() == pooled.shape(), "shape");
        for (std::size_t i = 0; i < dc.size() && i < pooled.size(); ++i) worst = std::max(worst, std::abs(dc[i] - pooled[i]));
    }
    o.require(worst < 1e-12, "max deviation " + fmt(worst));
    if (o.pass) o.detail = "100 tensors, max deviation " + fmt(worst);
    return o;
}

// ------------------------------------------------------------ 4

Outcome conv_equivalence() {
    Outcome o;
    Rng rng(4);
    std::size_t configs = 0;
    double worst = 0.0;
    for (std::size_t n : {1, 3})
        for (std::size_t m : {1, 4})
            for (std::size_t k : {1, 2, 3, 5})
                for (std::size_t stride : {1, 2})
                    for (std::size_t pad : {std::size_t{0}, k / 2}) {
                        nn::HarmonicBlock h({n, m, k, stride, pad, std::nullopt, false, false}, rng);
                        const Tensor x = random_tensor({2, n, 9, 8}, rng);
                        const Tensor& w = h.weight().value;
                        Tensor kernel(m, n, k, k);
                        for (std::size_t mm = 0; mm < m; ++mm)
                            for (std::size_t nn = 0; nn < n; ++nn)
                                for (std::size_t yy = 0; yy < k; ++yy)
                                    for (std::size_t xx = 0; xx < k; ++xx) {
                                        long double s = 0.0L;
                                        for (std::size_t p = 0; p < k * k; ++p)
                                            s += w[(mm * n + nn) * k * k + p] * test::dct_entry(k, p / k, p % k, yy, xx);
                                        kernel.at(mm, nn, yy, xx) = static_cast<double>(s);
                                    }
                        const double e = scaled_error(h.forward(x, false), test::oracle_conv(x, kernel, stride, pad));
                        worst = std::max(worst, e);
                        ++configs;
                    }
    o.require(configs >= 24, "grid too small");
    o.require(worst < 1e-6, "relative error " + fmt(worst));
    if (o.pass) o.detail = std::to_string(configs) + " configurations, max relative error " + fmt(worst);
    return o;
}

// ------------------------------------------------------------ 5

Outcome gradient_checks() {
    using namespace nn;
    Outcome o;
    std::size_t runs = 0;
    double worst = 0.0;
    auto record = [&](const GradCheckReport& r, const std::string& what) {
        ++runs;
        worst = std::max({worst, r.max_rel_error, r.max_input_rel_error});
        o.require(r.passed, what + ": " + r.diagnostics);
    };
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(500 + seed);
        struct Case {
            const char* name;
            std::function<void(Sequential&, Rng&)> add;
            Shape in;
        };
        const std::vector<Case> cases{
            {"conv", [](Sequential& s, Rng& r) { s.emplace<Conv2d>(2, 3, 3, 2, 1, r); }, {2, 2, 5, 5}},
            {"harm", [](Sequential& s, Rng& r) { s.emplace<HarmonicBlock>(HarmonicConfig{2, 3, 3, 1, 1, std::nullopt, false, false}, r); }, {2, 2, 5, 5}},
            {"harm lambda", [](Sequential& s, Rng& r) { s.emplace<HarmonicBlock>(HarmonicConfig{2, 2, 3, 2, 1, 2, false, false}, r); }, {2, 2, 5, 5}},
            {"harm drop_dc", [](Sequential& s, Rng& r) { s.emplace<HarmonicBlock>(HarmonicConfig{1, 2, 4, 4, 0, std::nullopt, false, true}, r); }, {2, 1, 8, 8}},
            {"harm bn", [](Sequential& s, Rng& r) { s.emplace<HarmonicBlock>(HarmonicConfig{2, 2, 2, 1, 0, 2, true, false}, r); }, {4, 2, 4, 4}},
            {"bn", [](Sequential& s, Rng&) { s.emplace<BatchNorm>(3); }, {4, 3, 3, 3}},
            {"relu", [](Sequential& s, Rng&) { s.emplace<ReLU>(); }, {2, 2, 3, 3}},
            {"dropout", [](Sequential& s, Rng& r) { s.emplace<Dropout>(0.3, Rng(r.next_u64())); }, {2, 2, 3, 3}},
            {"max pool", [](Sequential& s, Rng&) { s.emplace<Pool>(PoolSpec{PoolKind::max, 3, 2, 1}); }, {2, 2, 5, 5}},
            {"avg pool", [](Sequential& s, Rng&) { s.emplace<Pool>(PoolSpec{PoolKind::avg, 3, 2, 1}); }, {2, 2, 5, 5}},
            {"linear", [](Sequential& s, Rng& r) { s.emplace<Linear>(12, 4, r); }, {3, 3, 2, 2}},
        };
        for (const auto& c : cases) {
            Sequential body;
            c.add(body, rng);
            const Tensor probe = body.forward(Tensor(c.in), false);
            body.emplace<Linear>(probe.shape().sample(), 3, rng);
            const Tensor x = random_tensor(c.in, rng);
            record(grad_check(body, x, random_labels(c.in.batch, 3, rng)),
                   std::string(c.name) + " seed " + std::to_string(seed));
        }
        for (const char* body : {"conv", "harm"}) {
            const std::string text = std::string("input 2x6x6\nclasses 3\nres 3,3x3/2 body=") + body +
                                     " dropout=0.2\npool avg 3x3/3\nfc 3\n";
            auto net = models::build(models::parse_arch(text), seed);
            record(grad_check(*net.net, random_tensor({4, 2, 6, 6}, rng), random_labels(4, 3, rng)),
                   std::string("res ") + body + " seed " + std::to_string(seed));
        }
        // three stacked harmonic blocks
        auto toy = models::build(models::resolve_arch("toy-harm3"), seed);
        record(grad_check(*toy.net, random_tensor({3, 1, 12, 12}, rng), random_labels(3, 3, rng)),
               "toy-harm3 seed " + std::to_string(seed));
    }
    if (o.pass) o.detail = std::to_string(runs) + " checks, max relative error " + fmt(worst);
    return o;
}

// ------------------------------------------------------------ 6

Outcome parameter_counts() {
    Outcome o;
    auto count = [](const char* name) { return static_cast<double>(costing::count_params(models::resolve_arch(name))); };
    auto within = [&](const char* name, double target, double tol) {
        const double c = count(name);
        o.require(std::abs(c - target) <= tol * target, std::string(name) + " has " + fmt(c));
        return c;
    };
    const double base = within("wrn-28-10", 36.5e6, 0.01);
    const double l3 = within("wrn-28-10-fully_harm-l3", 24.4e6, 0.01);
    within("wrn-28-10-fully_harm-l2", 12.3e6, 0.01);
    within("norb-harm3", 1.28e6, 0.02);
    within("norb-cnn2", 2.39e6, 0.02);
    const double compact = count("norb-compact131k");
    o.require(compact > 125e3 && compact < 135e3, "compact has " + fmt(compact));
    if (o.pass)
        o.detail = "WRN-28-10 " + fmt(base) + ", lambda=3 reduction " + fmt(1.0 - l3 / base) + ", compact " + fmt(compact);
    return o;
}

// ------------------------------------------------------------ 7

Outcome cost_ratios() {
    Outcome o;
    std::size_t cases = 0;
    double worst = 0.0;
    for (std::uint64_t n : {1, 3, 16, 64})
        for (std::uint64_t m : {1, 8, 64, 640})
            for (std::uint64_t k : {1, 2, 3, 4, 5, 7})
                for (std::uint64_t a : {1, 8, 32}) {
                    const double conv = static_cast<double>(costing::conv_madds(n, m, k, a, a));
                    const double full = static_cast<double>(costing::harm_madds(n, k * k, m, k, a, a));
                    const double kk = static_cast<double>(k * k);
                    const double md = static_cast<double>(m);
                    worst = std::max(worst, std::abs(full / conv - (1.0 + kk / md)));
                    for (std::uint64_t l = 1; l <= k; ++l) {
                        const double p = static_cast<double>(l * (l + 1) / 2);
                        const double t = static_cast<double>(costing::harm_madds(n, l * (l + 1) / 2, m, k, a, a));
                        worst = std::max(worst, std::abs(t / conv - (p / kk + p / md)));
                        ++cases;
                    }
                }
    o.require(worst < 1e-12, "ratio deviation " + fmt(worst));
    if (o.pass) o.detail = std::to_string(cases) + " truncated cases, max deviation " + fmt(worst);
    return o;
}

// ------------------------------------------------------------ 8

Outcome spectrum_bn() {
    Outcome o;
    Rng rng(8);
    double worst_mean = 0.0, worst_var = 0.0;
    for (std::size_t k : {2, 3, 4}) {
        const std::size_t n = 2;
        const std::size_t p = select_frequencies(k, std::nullopt).count();
        nn::HarmonicBlock h({n, n * p, k, 1, k / 2, std::nullopt, true, false}, rng);
        // identity recombination exposes the normalized spectrum
        h.weight().value.fill(0.0);
        for (std::size_t c = 0; c < n * p; ++c) h.weight().value[c * n * p + c] = 1.0;
        const Tensor x = random_tensor({8, n, 7, 7}, rng, 0.0, 255.0);
        const Tensor y = h.forward(x, true);
        const double count = static_cast<double>(8 * y.shape().plane());
        for (std::size_t c = 0; c < n * p; ++c) {
            long double mean = 0.0L, var = 0.0L;
            for (std::size_t b = 0; b < 8; ++b)
                for (const Scalar v : y.plane(b, c)) mean += v;
            mean /= count;
            for (std::size_t b = 0; b < 8; ++b)
                for (const Scalar v : y.plane(b, c)) var += (v - mean) * (v - mean);
            var /= count;
            worst_mean = std::max(worst_mean, std::abs(static_cast<double>(mean)));
            worst_var = std::max(worst_var, std::abs(static_cast<double>(var) - 1.0));
        }
    }
    o.require(worst_mean < 1e-8, "mean " + fmt(worst_mean));
    o.require(worst_var < 1e-6, "variance deviation " + fmt(worst_var));

    // BN off: plain weighted sum of the DCT responses
    double worst_sum = 0.0;
    for (int t = 0; t < 5; ++t) {
        nn::HarmonicBlock h({2, 3, 3, 2, 1, 2, false, false}, rng);
        const Tensor x = random_tensor({2, 2, 7, 7}, rng);
        const Tensor y = h.forward(x, true);
        const Tensor r = dct_transform(x, h.basis(), h.selection(), h.transform_spec());
        Tensor want(y.shape());
        const std::size_t np = r.shape().channels;
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t m = 0; m < 3; ++m)
                for (std::size_t i = 0; i < y.shape().plane(); ++i) {
                    long double s = 0.0L;
                    for (std::size_t c = 0; c < np; ++c) s += static_cast<long double>(h.weight().value[m * np + c]) * r.plane(b, c)[i];
                    want.plane(b, m)[i] = static_cast<double>(s);
                }
        worst_sum = std::max(worst_sum, scaled_error(y, want));
    }
    o.require(worst_sum < 1e-14, "BN-off deviation " + fmt(worst_sum));
    if (o.pass)
        o.detail = "max |mean| " + fmt(worst_mean) + ", max |var-1| " + fmt(worst_var) + ", BN-off deviation " +
                   fmt(worst_sum);
    return o;
}

// ------------------------------------------------------------ 9 / 11

struct LearningRun {
    double tiny_err = 1.0;
    std::size_t tiny_steps = 0;
    double norb_err = 1.0;
    std::size_t norb_epochs = 0;
    std::vector<double> tiny_losses;
    std::vector<double> norb_losses;
};

LearningRun learning_run() {
    LearningRun run;
    {
        data::SynthOptions d;
        d.kind = data::SynthKind::frequency_classes;
        d.count = 256;
        d.size = 16;
        d.classes = 2;
        d.seed = 1;
        const auto set = data::synth_dataset(d);
        auto net = models::build(models::parse_arch("input 1x16x16\nclasses 2\nharm 4,4x4/4\nfc 2\n"), 1);
        train::TrainConfig c;
        c.epochs = 1000;
        c.batch_size = 32;
        c.base_lr = 0.05;
        c.decay_every_epochs = 1000;
        c.max_steps = 500;
        const auto h = train::train(net, set, nullptr, c);
        run.tiny_err = train::evaluate(net, set, h.normalizer);
        run.tiny_steps = h.steps;
        run.tiny_losses = h.step_losses;
    }
    {
        models::NorbOptions n;
        n.variant = models::NorbVariant::harm3;
        n.width_divisor = 8;
        data::SynthOptions d;
        d.kind = data::SynthKind::oriented_gratings;
        d.count = 200;
        d.size = 96;
        d.channels = 2;
        d.classes = 5;
        d.seed = 2;
        const auto set = data::synth_dataset(d);
        auto net = models::build_norb(n, 2);
        train::TrainConfig c;
        c.epochs = 30;
        c.batch_size = 20;
        c.base_lr = 0.01;
        c.decay_every_epochs = 1000;
        c.seed = 2;
        const auto h = train::train(net, set, nullptr, c);
        run.norb_err = train::evaluate(net, set, h.normalizer);
        run.norb_epochs = h.epochs.size();
        run.norb_losses = h.step_losses;
    }
    return run;
}

Outcome learning_sanity(const LearningRun& run) {
    Outcome o;
    o.require(run.tiny_err == 0.0, "one-block model train error " + fmt(run.tiny_err));
    o.require(run.tiny_steps <= 500, "too many steps");
    o.require(run.norb_err < 0.01, "NORB-style train error " + fmt(run.norb_err));
    o.require(run.norb_epochs <= 30, "too many epochs");
    if (o.pass)
        o.detail = "one-block error " + fmt(run.tiny_err) + " after " + std::to_string(run.tiny_steps) +
                   " steps, NORB-style error " + fmt(run.norb_err) + " after " + std::to_string(run.norb_epochs) +
                   " epochs";
    return o;
}

Outcome determinism(const LearningRun& first) {
    Outcome o;
    const LearningRun second = learning_run();
    o.require(first.tiny_losses == second.tiny_losses, "one-block loss histories differ");
    o.require(first.norb_losses == second.norb_losses, "NORB-style loss histories differ");
    o.require(!first.tiny_losses.empty() && !first.norb_losses.empty(), "empty history");
    if (o.pass)
        o.detail = std::to_string(first.tiny_losses.size() + first.norb_losses.size()) + " losses bitwise equal";
    return o;
}

// ------------------------------------------------------------ 10

double unseen_lighting_error(bool drop_dc, std::uint64_t seed) {
    const std::string arch = std::string("input 1x32x32\nclasses 4\nharm 16,4x4/4 bn") + (drop_dc ? " drop_dc" : "") +
                             "\nbn\nrelu\nharm 32,3x3/2\nbn\nrelu\npool avg 4x4/4\nfc 4\n";
    auto net = models::build(models::parse_arch(arch), seed);
    data::SynthOptions d;
    d.kind = data::SynthKind::lit_shapes;
    d.size = 32;
    d.classes = 4;
    d.count = 400;
    d.seed = 100 + seed;
    const auto train_set = data::synth_dataset(d);
    train::TrainConfig c;
    c.epochs = 15;
    c.batch_size = 20;
    c.base_lr = 0.02;
    c.decay_every_epochs = 10;
    c.seed = seed;
    const auto h = train::train(net, train_set, nullptr, c);
    double err = 0.0;
    for (const char* light : {"bright", "dark"}) {
        d.count = 200;
        d.seed = 200 + seed;
        d.lighting = data::parse_lighting(light);
        err += train::evaluate(net, data::synth_dataset(d), h.normalizer) / 2.0;
    }
    return err;
}

Outcome dc_omission() {
    Outcome o;
    double with_dc = 0.0, without_dc = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        without_dc += unseen_lighting_error(true, seed) / 5.0;
        with_dc += unseen_lighting_error(false, seed) / 5.0;
    }
    o.require(without_dc < with_dc, "drop_dc " + fmt(without_dc) + " vs DC kept " + fmt(with_dc));
    if (o.pass) o.detail = "mean unseen-lighting error: drop_dc " + fmt(without_dc) + ", DC kept " + fmt(with_dc);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    LearningRun learning;
    bool learned = false;
    auto need_learning = [&]() -> const LearningRun& {
        if (!learned) learning = learning_run();
        learned = true;
        return learning;
    };

    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "DCT basis orthonormality and K=2 factors", 1, basis_correctness},
        {2, "lambda truncation counts", 1, truncation_counts},
        {3, "DC transform equals scaled average pooling", 5, dc_pooling_identity},
        {4, "full-spectrum block equals composed-kernel conv", 30, conv_equivalence},
        {5, "finite-difference gradient checks", 120, gradient_checks},
        {6, "parameter-count regression", 5, parameter_counts},
        {7, "cost-ratio identities", 1, cost_ratios},
        {8, "spectrum BN statistics", 5, spectrum_bn},
        {9, "learning sanity", 300, [&] { return learning_sanity(need_learning()); }},
        {10, "DC omission improves unseen-lighting error", 600, dc_omission},
        {11, "seeded runs are bitwise reproducible", 300, [&] { return determinism(need_learning()); }},
    };

    bool all = true;
    for (const auto& c : criteria) {
        if (!only.empty() && only.count(c.id) == 0) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) {
            o.pass = false;
            o.detail += " (over the " + fmt(c.budget_s) + " s budget)";
        }
        std::printf("criterion %2d %s  %s: %s [%.2f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
