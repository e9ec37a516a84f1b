#include "harmonica/models/importance.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "harmonica/nn/layers.hpp"

namespace harmonica::models {

std::vector<ImportanceRow> frequency_importance(nn::Layer& model) {
    std::vector<ImportanceRow> rows;
    std::size_t block = 0;
    nn::walk(model, [&](nn::Layer& layer) {
        auto* h = dynamic_cast<nn::HarmonicBlock*>(&layer);
        if (h == nullptr) return;
        const auto& sel = h->selection();
        const std::size_t P = sel.count();
        const Tensor& w = h->weight().value;
        const std::size_t M = w.shape().batch;
        const std::size_t N = h->config().in_channels;
        std::vector<double> mean(P, 0.0);
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t p = 0; p < P; ++p) mean[p] += std::abs(w.data()[m * N * P + n * P + p]);
        double total = 0.0;
        for (auto& x : mean) {
            x /= static_cast<double>(M * N);
            total += x;
        }
        for (std::size_t p = 0; p < P; ++p) {
            const Frequency f = sel.indices[p];
            rows.push_back({block, f.u, f.v, total > 0.0 ? mean[p] / total : 0.0});
        }
        ++block;
    });
    return rows;
}

void write_importance_csv(const std::filesystem::path& path, const std::vector<ImportanceRow>& rows) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << "block,u,v,importance\n" << std::setprecision(17);
    for (const auto& r : rows) out << r.block << ',' << r.u << ',' << r.v << ',' << r.importance << '\n';
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace harmonica::models
