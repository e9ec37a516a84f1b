#include "harmonica/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "harmonica/ops.hpp"

namespace harmonica::nn {

namespace {

Scalar loss_at(Layer& model, const Tensor& input, std::span<const int> labels, bool training) {
    const Tensor logits = model.forward(input, training);
    return softmax_cross_entropy(logits, labels).loss;
}

Scalar rel_error(Scalar analytic, Scalar numeric, Scalar floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace

GradCheckReport grad_check(Layer& model, const Tensor& input, std::span<const int> labels,
                           const GradCheckOptions& options) {
    GradCheckReport report;

    std::vector<Tensor> saved_buffers;
    for (auto& b : model.buffers()) saved_buffers.push_back(*b.tensor);
    auto restore_buffers = [&] {
        auto bufs = model.buffers();
        for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i].tensor = saved_buffers[i];
    };

    // draw noise once, then keep it fixed for every evaluation
    model.freeze_noise(false);
    model.forward(input, options.training);
    model.freeze_noise(true);

    model.zero_grad();
    const Tensor logits = model.forward(input, options.training);
    const LossResult base = softmax_cross_entropy(logits, labels);
    if (!std::isfinite(base.loss)) {
        model.freeze_noise(false);
        restore_buffers();
        report.diagnostics = "non-finite loss at the unperturbed point";
        return report;
    }
    const Tensor analytic_input = model.backward(softmax_cross_entropy_grad(base, labels));

    const Scalar h = options.step;
    auto params = model.parameters();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        const Tensor analytic = p.grad;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const Scalar original = p.value[i];
            p.value[i] = original + h;
            const Scalar plus = loss_at(model, input, labels, options.training);
            p.value[i] = original - h;
            const Scalar minus = loss_at(model, input, labels, options.training);
            p.value[i] = original;
            if (!std::isfinite(plus) || !std::isfinite(minus)) {
                report.diagnostics = "non-finite loss while perturbing parameter " + std::to_string(pi) + " (" +
                                     p.name + ") entry " + std::to_string(i);
                model.freeze_noise(false);
                restore_buffers();
                return report;
            }
            const Scalar numeric = (plus - minus) / (2.0 * h);
            const Scalar err = rel_error(analytic[i], numeric, options.floor);
            ++report.checked;
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                std::ostringstream os;
                os << "param " << pi << " (" << p.name << ") entry " << i << ": analytic " << analytic[i]
                   << " numeric " << numeric;
                report.worst = os.str();
            }
        }
    }

    if (options.check_input) {
        Tensor probe = input;
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const Scalar original = probe[i];
            probe[i] = original + h;
            const Scalar plus = loss_at(model, probe, labels, options.training);
            probe[i] = original - h;
            const Scalar minus = loss_at(model, probe, labels, options.training);
            probe[i] = original;
            const Scalar numeric = (plus - minus) / (2.0 * h);
            const Scalar err = rel_error(analytic_input[i], numeric, options.floor);
            ++report.checked;
            if (err > report.max_input_rel_error) {
                report.max_input_rel_error = err;
                if (err > report.max_rel_error) {
                    std::ostringstream os;
                    os << "input entry " << i << ": analytic " << analytic_input[i] << " numeric " << numeric;
                    report.worst = os.str();
                }
            }
        }
    }

    model.freeze_noise(false);
    restore_buffers();
    report.passed = report.max_rel_error < options.tolerance && report.max_input_rel_error < options.tolerance;
    std::ostringstream os;
    os << "checked " << report.checked << " entries; max param rel err " << report.max_rel_error
       << "; max input rel err " << report.max_input_rel_error;
    if (!report.worst.empty()) os << "; worst at " << report.worst;
    report.diagnostics = os.str();
    return report;
}

}  // namespace harmonica::nn
