#include "harmonica/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "harmonica/nn/checkpoint.hpp"
#include "harmonica/nn/optim.hpp"
#include "harmonica/ops.hpp"

namespace harmonica::train {

void TrainConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) { throw ConfigError("train." + key + " " + why); };
    if (epochs == 0) fail("epochs", "must be >= 1");
    if (batch_size == 0) fail("batch_size", "must be >= 1");
    if (!(base_lr > 0.0) || !std::isfinite(base_lr)) fail("base_lr", "must be positive");
    if (!(lr_decay_factor > 0.0)) fail("lr_decay_factor", "must be positive");
    if (decay_every_epochs == 0) fail("decay_every_epochs", "must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must be in [0, 1)");
    if (!(weight_decay >= 0.0)) fail("weight_decay", "must be >= 0");
    if (!(brightness_delta >= 0.0)) fail("brightness_delta", "must be >= 0");
    if (!(contrast_delta >= 0.0 && contrast_delta < 1.0)) fail("contrast_delta", "must be in [0, 1)");
}

double learning_rate(const TrainConfig& c, std::size_t epoch) {
    return c.base_lr / std::pow(c.lr_decay_factor, static_cast<double>(epoch / c.decay_every_epochs));
}

CropOrigin draw_crop(std::size_t size, std::size_t pad, std::size_t crop, Rng& rng) {
    const std::size_t padded = size + 2 * pad;
    if (crop > padded) {
        throw ConfigError("crop " + std::to_string(crop) + " exceeds padded size " + std::to_string(padded));
    }
    const std::size_t span = padded - crop + 1;
    CropOrigin o;
    o.y = rng.below(span);
    o.x = rng.below(span);
    return o;
}

Tensor augment(const Tensor& batch, const TrainConfig& config, Rng& rng, double lo, double hi) {
    const Shape s = batch.shape();
    const std::size_t crop_h = config.crop_size == 0 ? s.height : config.crop_size;
    const std::size_t crop_w = config.crop_size == 0 ? s.width : config.crop_size;
    if (s.height != s.width && config.crop_size != 0) throw ConfigError("random crops need square inputs");
    Tensor out(s.batch, s.channels, crop_h, crop_w);
    const auto pad = static_cast<std::ptrdiff_t>(config.pad_pixels);
    for (std::size_t b = 0; b < s.batch; ++b) {
        CropOrigin o;
        if (config.pad_pixels != 0 || crop_h != s.height) o = draw_crop(s.height, config.pad_pixels, crop_h, rng);
        double gain = 1.0;
        double shift = 0.0;
        if (config.brightness_contrast_aug) {
            shift = rng.uniform(-config.brightness_delta, config.brightness_delta);
            gain = rng.uniform(1.0 - config.contrast_delta, 1.0 + config.contrast_delta);
        }
        for (std::size_t c = 0; c < s.channels; ++c) {
            const auto src = batch.plane(b, c);
            auto dst = out.plane(b, c);
            for (std::size_t y = 0; y < crop_h; ++y) {
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(o.y + y) - pad;
                for (std::size_t x = 0; x < crop_w; ++x) {
                    const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(o.x + x) - pad;
                    const bool in = sy >= 0 && sx >= 0 && sy < static_cast<std::ptrdiff_t>(s.height) &&
                                    sx < static_cast<std::ptrdiff_t>(s.width);
                    double v = in ? src[static_cast<std::size_t>(sy) * s.width + static_cast<std::size_t>(sx)] : 0.0;
                    if (config.brightness_contrast_aug) v = std::clamp(gain * v + shift, lo, hi);
                    dst[y * crop_w + x] = v;
                }
            }
        }
    }
    return out;
}

Normalizer Normalizer::identity(std::size_t channels) {
    return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

Normalizer Normalizer::fit(const Tensor& samples) {
    const Shape s = samples.shape();
    Normalizer n = identity(s.channels);
    const double count = static_cast<double>(s.batch * s.plane());
    if (count == 0) return n;
    for (std::size_t c = 0; c < s.channels; ++c) {
        double sum = 0.0;
        for (std::size_t b = 0; b < s.batch; ++b)
            for (const Scalar v : samples.plane(b, c)) sum += v;
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t b = 0; b < s.batch; ++b)
            for (const Scalar v : samples.plane(b, c)) sq += (v - mean) * (v - mean);
        n.mean[c] = mean;
        n.stddev[c] = std::max(std::sqrt(sq / count), 1e-8);
    }
    return n;
}

Tensor Normalizer::apply(const Tensor& batch) const {
    const Shape s = batch.shape();
    if (s.channels != mean.size()) {
        throw DimensionError("normalizer has " + std::to_string(mean.size()) + " channels, input has " +
                             std::to_string(s.channels));
    }
    Tensor out = batch;
    for (std::size_t b = 0; b < s.batch; ++b)
        for (std::size_t c = 0; c < s.channels; ++c)
            for (auto& v : out.plane(b, c)) v = (v - mean[c]) / stddev[c];
    return out;
}

std::string Normalizer::to_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "norm_mean=";
    for (std::size_t i = 0; i < mean.size(); ++i) os << (i ? "," : "") << mean[i];
    os << "\nnorm_std=";
    for (std::size_t i = 0; i < stddev.size(); ++i) os << (i ? "," : "") << stddev[i];
    os << '\n';
    return os.str();
}

Normalizer Normalizer::from_text(const std::string& text) {
    Normalizer n;
    std::istringstream in(text);
    auto parse_list = [](const std::string& s) {
        std::vector<double> out;
        std::istringstream ls(s);
        for (std::string item; std::getline(ls, item, ',');) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw FormatError("bad normalizer value '" + item + "'");
            }
        }
        return out;
    };
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("norm_mean=", 0) == 0) n.mean = parse_list(line.substr(10));
        if (line.rfind("norm_std=", 0) == 0) n.stddev = parse_list(line.substr(9));
    }
    if (n.mean.empty() || n.mean.size() != n.stddev.size()) throw FormatError("checkpoint meta lacks a normalizer");
    return n;
}

namespace {

std::vector<nn::Parameter*> gather_parameters(models::Network& net) { return net.net->parameters(); }

}  // namespace

History train(models::Network& net, const data::Dataset& train_set, const data::Dataset* test_set,
              const TrainConfig& config) {
    config.validate();
    train_set.validate();
    if (train_set.size() == 0) throw InputError("training set is empty");
    const Shape expected = net.arch.input_shape(1);
    const std::size_t crop = config.crop_size == 0 ? train_set.sample_shape().height : config.crop_size;
    const Shape produced{1, train_set.sample_shape().channels, crop, config.crop_size == 0 ? train_set.sample_shape().width : crop};
    if (produced != expected) {
        throw ConfigError("dataset yields inputs " + produced.str() + " but the network expects " + expected.str());
    }
    if (train_set.classes > net.arch.classes) {
        throw ConfigError("dataset has " + std::to_string(train_set.classes) + " classes, network " +
                          std::to_string(net.arch.classes));
    }

    History h;
    h.normalizer = config.standardize ? Normalizer::fit(train_set.samples)
                                      : Normalizer::identity(train_set.sample_shape().channels);
    Rng shuffle = Rng::stream(config.seed, "shuffle");
    Rng aug = Rng::stream(config.seed, "augment");
    data::BatchIterator batches(train_set.size(), config.batch_size, &shuffle);
    const auto params = gather_parameters(net);
    const bool augmenting = config.pad_pixels != 0 || config.crop_size != 0 || config.brightness_contrast_aug;

    std::vector<std::size_t> idx;
    bool stop = false;
    for (std::size_t epoch = 0; epoch < config.epochs && !stop; ++epoch) {
        const double lr = learning_rate(config, epoch);
        const nn::SgdOptions sgd{lr, config.momentum, config.weight_decay};
        double loss_sum = 0.0;
        std::size_t wrong = 0;
        std::size_t seen = 0;
        std::size_t batch_index = 0;
        if (epoch > 0) batches.reset();
        while (batches.next(idx)) {
            Tensor x = train_set.gather(idx);
            const auto labels = train_set.gather_labels(idx);
            if (augmenting) x = augment(x, config, aug);
            x = h.normalizer.apply(x);

            net.net->zero_grad();
            const Tensor logits = net.forward(x, true);
            const LossResult loss = softmax_cross_entropy(logits, labels);
            if (!std::isfinite(loss.loss)) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + ", lr " + std::to_string(lr));
            }
            net.backward(softmax_cross_entropy_grad(loss, labels));
            nn::sgd_step(params, sgd);

            const auto pred = argmax_rows(logits);
            for (std::size_t i = 0; i < labels.size(); ++i) wrong += pred[i] != labels[i] ? 1 : 0;
            seen += labels.size();
            loss_sum += loss.loss;
            h.step_losses.push_back(loss.loss);
            ++batch_index;
            ++h.steps;
            if (config.max_steps != 0 && h.steps >= config.max_steps) {
                stop = true;
                break;
            }
        }
        EpochRecord r;
        r.epoch = epoch;
        r.lr = lr;
        r.train_loss = loss_sum / static_cast<double>(batch_index);
        r.train_err = static_cast<double>(wrong) / static_cast<double>(seen);
        if (test_set != nullptr) r.test_err = evaluate(net, *test_set, h.normalizer);
        h.epochs.push_back(r);

        if (!config.checkpoint_dir.empty() && config.checkpoint_every != 0 && (epoch + 1) % config.checkpoint_every == 0) {
            save_checkpoint(config.checkpoint_dir / ("epoch_" + std::to_string(epoch + 1) + ".ckpt"), net,
                            checkpoint_meta(h.normalizer, epoch + 1, config.seed));
        }
    }
    if (!config.checkpoint_dir.empty()) {
        save_checkpoint(config.checkpoint_dir / "final.ckpt", net,
                        checkpoint_meta(h.normalizer, h.epochs.size(), config.seed));
    }
    return h;
}

double evaluate(models::Network& net, const data::Dataset& dataset, const Normalizer& normalizer,
                std::size_t batch_size) {
    if (dataset.size() == 0) throw InputError("cannot evaluate on an empty dataset");
    dataset.validate();
    const Shape expected = net.arch.input_shape(1);
    const Shape s = dataset.sample_shape();
    if (s.channels != expected.channels || s.height < expected.height || s.width < expected.width) {
        throw ConfigError("dataset samples " + s.str() + " do not fit network input " + expected.str());
    }
    // larger samples are center-cropped to the network input
    const std::size_t oy = (s.height - expected.height) / 2;
    const std::size_t ox = (s.width - expected.width) / 2;
    data::BatchIterator batches(dataset.size(), batch_size);
    std::vector<std::size_t> idx;
    std::size_t wrong = 0;
    while (batches.next(idx)) {
        Tensor x = dataset.gather(idx);
        if (oy != 0 || ox != 0 || s.height != expected.height || s.width != expected.width) {
            Tensor c(x.shape().batch, s.channels, expected.height, expected.width);
            for (std::size_t b = 0; b < x.shape().batch; ++b)
                for (std::size_t ch = 0; ch < s.channels; ++ch)
                    for (std::size_t y = 0; y < expected.height; ++y)
                        for (std::size_t xx = 0; xx < expected.width; ++xx)
                            c.at(b, ch, y, xx) = x.at(b, ch, y + oy, xx + ox);
            x = std::move(c);
        }
        const Tensor logits = net.forward(normalizer.apply(x), false);
        const auto pred = argmax_rows(logits);
        for (std::size_t i = 0; i < idx.size(); ++i) wrong += pred[i] != dataset.labels[idx[i]] ? 1 : 0;
    }
    return static_cast<double>(wrong) / static_cast<double>(dataset.size());
}

void write_history_csv(const std::filesystem::path& path, const History& history) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << "epoch,lr,train_loss,train_err,test_err\n" << std::setprecision(10);
    for (const auto& r : history.epochs) {
        out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.train_err << ',';
        if (!std::isnan(r.test_err)) out << r.test_err;
        out << '\n';
    }
    if (!out) throw InputError("failed writing " + path.string());
}

std::string checkpoint_meta(const Normalizer& normalizer, std::size_t epoch, std::uint64_t seed) {
    return normalizer.to_text() + "epoch=" + std::to_string(epoch) + "\nseed=" + std::to_string(seed) + "\n";
}

void save_checkpoint(const std::filesystem::path& path, models::Network& net, const std::string& meta) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    nn::write_checkpoint(path, nn::capture_checkpoint(*net.net, models::to_text(net.arch), meta));
}

LoadedModel load_model(const std::filesystem::path& path) {
    const nn::Checkpoint c = nn::read_checkpoint(path);
    models::ArchSpec arch;
    try {
        arch = models::parse_arch(c.arch_text);
    } catch (const ConfigError& e) {
        throw FormatError(path.string() + ": stored architecture does not parse: " + e.what());
    }
    LoadedModel m{models::build(arch, 0), Normalizer::from_text(c.meta_text)};
    nn::restore_checkpoint(*m.net.net, c);
    return m;
}

}  // namespace harmonica::train
