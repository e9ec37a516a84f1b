// harmonica command-line front end.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "harmonica/cli/config.hpp"
#include "harmonica/costing/cost.hpp"
#include "harmonica/models/builders.hpp"
#include "harmonica/models/importance.hpp"
#include "harmonica/nn/gradcheck.hpp"
#include "harmonica/spectral.hpp"
#include "harmonica/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace harmonica;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

cli::RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    cli::RunConfig c = path.empty() ? cli::RunConfig{} : cli::RunConfig::load(path);
    for (const auto& o : overrides) c.set_override(o);
    return c;
}

void check_input(const models::ArchSpec& arch, const data::Dataset& d, std::size_t crop) {
    const Shape s = d.sample_shape();
    const std::size_t h = crop == 0 ? s.height : crop;
    if (s.channels != arch.channels || h != arch.height) {
        throw ConfigError("data yields " + std::to_string(s.channels) + "x" + std::to_string(h) + "x" +
                          std::to_string(h) + " inputs but the architecture expects " + std::to_string(arch.channels) +
                          "x" + std::to_string(arch.height) + "x" + std::to_string(arch.width));
    }
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    const cli::RunConfig config = load_config(config_path, overrides);
    const models::ArchSpec arch = cli::arch_from_config(config);
    train::TrainConfig tc = cli::train_from_config(config);
    const cli::DataSplits splits = cli::data_from_config(config);
    check_input(arch, splits.train, tc.crop_size);

    const fs::path out = config.get("output.dir");
    fs::create_directories(out);
    write_text(out / "config.resolved.toml", config.to_text());
    write_text(out / "arch.txt", models::to_text(arch));
    tc.checkpoint_dir = out;

    models::Network net = models::build(arch, tc.seed);
    std::cout << "training " << costing::human_count(costing::count_params(*net.net)) << " parameters on "
              << splits.train.size() << " samples\n";
    const train::History h = train::train(net, splits.train, splits.test ? &*splits.test : nullptr, tc);
    train::write_history_csv(out / "history.csv", h);
    for (const auto& r : h.epochs) {
        std::cout << "epoch " << r.epoch << " lr " << fmt(r.lr) << " loss " << fmt(r.train_loss) << " train_err "
                  << fmt(r.train_err);
        if (splits.test) std::cout << " test_err " << fmt(r.test_err);
        std::cout << '\n';
    }
    const double train_err = train::evaluate(net, splits.train, h.normalizer);
    std::ostringstream metrics;
    metrics << "epochs=" << h.epochs.size() << "\nsteps=" << h.steps << "\nfinal_loss=" << fmt(h.step_losses.back())
            << "\ntrain_err=" << fmt(train_err);
    std::ostringstream result;
    result << "RESULT train_err=" << fmt(train_err);
    if (splits.test) {
        const double test_err = train::evaluate(net, *splits.test, h.normalizer);
        metrics << "\ntest_err=" << fmt(test_err);
        result << " test_err=" << fmt(test_err);
    }
    metrics << '\n';
    write_text(out / "metrics.txt", metrics.str());
    result << " epochs=" << h.epochs.size() << " steps=" << h.steps << " out=" << out.string();
    std::cout << result.str() << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& split) {
    if (split != "train" && split != "test") throw ConfigError("--split must be train or test");
    train::LoadedModel m = train::load_model(checkpoint);
    const cli::RunConfig config = load_config(config_path, overrides);
    const cli::DataSplits splits = cli::data_from_config(config);
    const data::Dataset* d = &splits.train;
    if (split == "test") {
        if (!splits.test) throw ConfigError("the data section defines no test split");
        d = &*splits.test;
    }
    if (d->sample_shape().channels != m.net.arch.channels) {
        throw ConfigError("checkpoint expects " + std::to_string(m.net.arch.channels) + " channels, data has " +
                          std::to_string(d->sample_shape().channels));
    }
    const double err = train::evaluate(m.net, *d, m.normalizer);
    std::cout << "RESULT error=" << fmt(err) << " samples=" << d->size() << " split=" << split << '\n';
    return kExitOk;
}

int cmd_gradcheck(const std::string& arch_name, double tolerance, std::uint64_t seed, std::size_t batch) {
    const models::ArchSpec arch = models::resolve_arch(arch_name);
    models::Network net = models::build(arch, seed);
    const std::size_t params = costing::count_params(*net.net);
    if (params > 20000) {
        std::cerr << "warning: " << params << " parameters; a finite-difference check will be slow\n";
    }
    Rng rng = Rng::stream(seed, "gradcheck");
    Tensor x(arch.input_shape(batch));
    for (auto& v : x.vec()) v = rng.normal();
    std::vector<int> labels(batch);
    for (auto& l : labels) l = static_cast<int>(rng.below(arch.classes));
    nn::GradCheckOptions o;
    o.tolerance = tolerance;
    const nn::GradCheckReport r = nn::grad_check(*net.net, x, labels, o);
    if (!r.diagnostics.empty()) std::cout << r.diagnostics << '\n';
    std::cout << "RESULT passed=" << (r.passed ? 1 : 0) << " max_rel_error=" << fmt(r.max_rel_error)
              << " max_input_rel_error=" << fmt(r.max_input_rel_error) << " checked=" << r.checked << '\n';
    return r.passed ? kExitOk : kExitNumeric;
}

models::ArchSpec with_input(models::ArchSpec arch, const std::string& input) {
    if (input.empty()) return arch;
    std::size_t c = 0, h = 0, w = 0;
    char x1 = 0, x2 = 0;
    std::istringstream in(input);
    if (!(in >> c >> x1 >> h >> x2 >> w) || x1 != 'x' || x2 != 'x' || !in.eof()) {
        throw ConfigError("--input expects CxHxW, got '" + input + "'");
    }
    arch.channels = c;
    arch.height = h;
    arch.width = w;
    return arch;
}

int cmd_cost(const std::string& a, const std::string& b, const std::string& input, bool separable,
             const std::string& csv) {
    const auto counting = separable ? costing::TransformCounting::separable : costing::TransformCounting::dense;
    const models::ArchSpec arch_a = with_input(models::resolve_arch(a), input);
    const costing::CostReport ra = costing::cost_report(arch_a, counting);
    std::cout << a << '\n' << costing::format_table(ra);
    if (!csv.empty()) write_text(csv, costing::format_csv(ra));
    std::ostringstream result;
    result << "RESULT params=" << costing::human_count(ra.total_params) << " params_exact=" << ra.total_params
           << " madds=" << ra.total_madds;
    if (!b.empty()) {
        const models::ArchSpec arch_b = with_input(models::resolve_arch(b), input);
        const costing::Comparison cmp = costing::compare(arch_a, arch_b, counting);
        std::cout << '\n' << b << '\n' << costing::format_table(cmp.reference);
        result << " ref_params=" << cmp.reference.total_params << " ref_madds=" << cmp.reference.total_madds
               << " param_ratio=" << fmt(cmp.param_ratio) << " madd_ratio=" << fmt(cmp.madd_ratio);
    }
    std::cout << result.str() << '\n';
    return kExitOk;
}

int cmd_export_basis(std::size_t window, const std::string& out, std::size_t scale) {
    const auto files = export_basis(*shared_dct_basis(window), out, scale);
    std::cout << "RESULT files=" << files.size() << " window=" << window << " dir=" << out << '\n';
    return kExitOk;
}

int cmd_freq_importance(const std::string& checkpoint, const std::string& out) {
    train::LoadedModel m = train::load_model(checkpoint);
    const auto rows = models::frequency_importance(*m.net.net);
    if (rows.empty()) std::cerr << "warning: model has no harmonic blocks; writing an empty table\n";
    models::write_importance_csv(out, rows);
    std::size_t blocks = 0;
    for (const auto& r : rows) blocks = std::max(blocks, r.block + 1);
    std::cout << "RESULT blocks=" << blocks << " rows=" << rows.size() << " csv=" << out << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* t = std::getenv("HARMONICA_THREADS")) {
        const int n = std::atoi(t);
        if (n > 0) omp_set_num_threads(n);
    }

    CLI::App app{"Harmonic networks: DCT-based blocks, training, costing and inspection"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto* train_cmd = app.add_subcommand("train", "train a model described by a config file");
    train_cmd->add_option("-c,--config", config_path, "run config (sections arch, train, data, output)");
    train_cmd->add_option("--set", overrides, "override a config value, section.key=value (repeatable)");

    std::string checkpoint;
    std::string split = "test";
    auto* eval_cmd = app.add_subcommand("eval", "print the error rate of a checkpoint");
    eval_cmd->add_option("-k,--checkpoint", checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("-c,--config", config_path, "config whose data section selects the dataset");
    eval_cmd->add_option("--set", overrides, "override a config value, section.key=value (repeatable)");
    eval_cmd->add_option("--split", split, "train or test")->capture_default_str();

    std::string arch_name;
    double tolerance = 1e-4;
    std::uint64_t seed = 1;
    std::size_t batch = 4;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
    grad_cmd->add_option("-a,--arch", arch_name, "preset name or architecture file")->required();
    grad_cmd->add_option("--tolerance", tolerance, "maximum relative error")->capture_default_str();
    grad_cmd->add_option("--seed", seed, "init and data seed")->capture_default_str();
    grad_cmd->add_option("--batch", batch, "batch size")->capture_default_str();

    std::string ref_name;
    std::string input;
    std::string csv;
    bool separable = false;
    auto* cost_cmd = app.add_subcommand("cost", "parameter and multiply-add report");
    cost_cmd->add_option("-a,--arch", arch_name, "preset name or architecture file")->required();
    cost_cmd->add_option("-r,--ref", ref_name, "reference architecture for ratios");
    cost_cmd->add_option("--input", input, "override input shape, CxHxW");
    cost_cmd->add_flag("--separable", separable, "count the DCT stage as separable (2K per filter)");
    cost_cmd->add_option("--csv", csv, "also write the report as CSV");

    std::size_t window = 3;
    std::string out_dir;
    std::size_t scale = 16;
    auto* basis_cmd = app.add_subcommand("export-basis", "write the DCT filter bank as PGM images");
    basis_cmd->add_option("-k,--window", window, "filter size K")->capture_default_str();
    basis_cmd->add_option("-o,--out", out_dir, "output directory")->required();
    basis_cmd->add_option("--scale", scale, "pixel magnification")->capture_default_str();

    std::string out_csv;
    auto* freq_cmd = app.add_subcommand("freq-importance", "per-frequency weight distribution of a checkpoint");
    freq_cmd->add_option("-k,--checkpoint", checkpoint, "checkpoint file")->required();
    freq_cmd->add_option("-o,--out", out_csv, "CSV output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*train_cmd) return cmd_train(config_path, overrides);
        if (*eval_cmd) return cmd_eval(checkpoint, config_path, overrides, split);
        if (*grad_cmd) return cmd_gradcheck(arch_name, tolerance, seed, batch);
        if (*cost_cmd) return cmd_cost(arch_name, ref_name, input, separable, csv);
        if (*basis_cmd) return cmd_export_basis(window, out_dir, scale);
        if (*freq_cmd) return cmd_freq_importance(checkpoint, out_csv);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
