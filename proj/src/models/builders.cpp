#include "harmonica/models/builders.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace harmonica::models {

namespace {

LayerDesc conv(std::size_t out, std::size_t k, std::size_t s) {
    LayerDesc l;
    l.kind = LayerKind::conv;
    l.out = out;
    l.kernel = k;
    l.stride = s;
    return l;
}

LayerDesc harm(std::size_t out, std::size_t k, std::size_t s, std::optional<std::size_t> lambda = std::nullopt,
               bool bn = false, bool drop_dc = false) {
    LayerDesc l = conv(out, k, s);
    l.kind = LayerKind::harm;
    l.lambda = lambda;
    l.spectrum_bn = bn;
    l.drop_dc = drop_dc;
    return l;
}

LayerDesc simple(LayerKind kind) {
    LayerDesc l;
    l.kind = kind;
    return l;
}

LayerDesc pool(PoolKind kind, std::size_t k, std::size_t s) {
    LayerDesc l;
    l.kind = LayerKind::pool;
    l.pool = kind;
    l.kernel = k;
    l.stride = s;
    return l;
}

LayerDesc fc(std::size_t out) {
    LayerDesc l;
    l.kind = LayerKind::fc;
    l.out = out;
    return l;
}

LayerDesc dropout(double p) {
    LayerDesc l;
    l.kind = LayerKind::dropout;
    l.p = p;
    return l;
}

void bn_relu(std::vector<LayerDesc>& layers) {
    layers.push_back(simple(LayerKind::bn));
    layers.push_back(simple(LayerKind::relu));
}

bool is_overlap(NorbPooling p) { return p == NorbPooling::overlap_max || p == NorbPooling::overlap_avg; }
PoolKind pool_kind(NorbPooling p) {
    return p == NorbPooling::max || p == NorbPooling::overlap_max ? PoolKind::max : PoolKind::avg;
}

// Variant/pooling/stage combinations evaluated in the NORB study.
void check_norb_combo(const NorbOptions& o, std::size_t stages) {
    using V = NorbVariant;
    using P = NorbPooling;
    auto allowed = [&](std::initializer_list<P> ps) {
        return std::find(ps.begin(), ps.end(), o.pooling) != ps.end();
    };
    bool ok = false;
    switch (o.variant) {
        case V::cnn2: ok = allowed({P::overlap_max}); break;
        case V::cnn3: ok = allowed({P::max, P::overlap_max}); break;
        case V::harm1:
        case V::harm2:
            ok = stages == 2 ? allowed({P::max, P::avg}) : allowed({P::overlap_max, P::overlap_avg});
            break;
        case V::harm3: ok = allowed({P::overlap_max, P::overlap_avg}); break;
        case V::harm4:
        case V::compact131k:
        case V::compact88k: ok = allowed({P::overlap_avg}); break;
        case V::compact45k: ok = allowed({P::max, P::avg}); break;
    }
    if (!ok) {
        throw ConfigError("NORB variant " + to_string(o.variant) + " with " + std::to_string(stages) +
                          " stages is not defined for pooling " + to_string(o.pooling));
    }
}

}  // namespace

NorbVariant parse_norb_variant(const std::string& name) {
    static const std::array<std::pair<const char*, NorbVariant>, 9> table{{{"cnn2", NorbVariant::cnn2},
                                                                             {"cnn3", NorbVariant::cnn3},
                                                                             {"harm1", NorbVariant::harm1},
                                                                             {"harm2", NorbVariant::harm2},
                                                                             {"harm3", NorbVariant::harm3},
                                                                             {"harm4", NorbVariant::harm4},
                                                                             {"compact131k", NorbVariant::compact131k},
                                                                             {"compact88k", NorbVariant::compact88k},
                                                                             {"compact45k", NorbVariant::compact45k}}};
    for (const auto& [n, v] : table)
        if (name == n) return v;
    throw ConfigError("unknown NORB variant '" + name + "'");
}

std::string to_string(NorbVariant v) {
    switch (v) {
        case NorbVariant::cnn2: return "cnn2";
        case NorbVariant::cnn3: return "cnn3";
        case NorbVariant::harm1: return "harm1";
        case NorbVariant::harm2: return "harm2";
        case NorbVariant::harm3: return "harm3";
        case NorbVariant::harm4: return "harm4";
        case NorbVariant::compact131k: return "compact131k";
        case NorbVariant::compact88k: return "compact88k";
        case NorbVariant::compact45k: return "compact45k";
    }
    return "?";
}

NorbPooling parse_norb_pooling(const std::string& name) {
    if (name == "max") return NorbPooling::max;
    if (name == "avg") return NorbPooling::avg;
    if (name == "overlap_max") return NorbPooling::overlap_max;
    if (name == "overlap_avg") return NorbPooling::overlap_avg;
    throw ConfigError("unknown pooling '" + name + "' (max, avg, overlap_max, overlap_avg)");
}

std::string to_string(NorbPooling p) {
    switch (p) {
        case NorbPooling::max: return "max";
        case NorbPooling::avg: return "avg";
        case NorbPooling::overlap_max: return "overlap_max";
        case NorbPooling::overlap_avg: return "overlap_avg";
    }
    return "?";
}

ArchSpec norb_arch(const NorbOptions& o) {
    using V = NorbVariant;
    if (o.width_divisor == 0) throw ConfigError("width_divisor must be >= 1");
    const bool compact = o.variant == V::compact131k || o.variant == V::compact88k || o.variant == V::compact45k;
    std::size_t stages = o.stages;
    if (o.variant == V::cnn2) stages = 2;
    if (o.variant == V::cnn3 || o.variant == V::harm3 || o.variant == V::harm4 || compact) stages = 3;
    if (stages != 2 && stages != 3) throw ConfigError("NORB networks have 2 or 3 feature stages");
    check_norb_combo(o, stages);

    std::size_t harmonic_stages = 0;
    switch (o.variant) {
        case V::cnn2:
        case V::cnn3: harmonic_stages = 0; break;
        case V::harm1: harmonic_stages = 1; break;
        case V::harm2: harmonic_stages = 2; break;
        default: harmonic_stages = 3; break;
    }
    if (o.drop_dc && harmonic_stages == 0) throw ConfigError("drop_dc needs a harmonic first block");

    std::optional<std::size_t> hidden_lambda;
    if (o.variant == V::compact88k) hidden_lambda = 3;
    if (o.variant == V::compact45k) hidden_lambda = 2;

    const std::size_t d = o.width_divisor;
    auto width = [d](std::size_t w) { return std::max<std::size_t>(1, w / d); };
    const PoolKind pk = pool_kind(o.pooling);
    const std::size_t pw = is_overlap(o.pooling) ? 3 : 2;

    ArchSpec arch;
    arch.channels = o.channels;
    arch.height = o.size;
    arch.width = o.size;
    arch.classes = o.classes;
    auto& L = arch.layers;

    if (harmonic_stages == 0) {
        L.push_back(conv(width(32), 5, 2));
        bn_relu(L);
        if (stages == 2) {
            L.push_back(pool(pk, pw, 2));
            L.push_back(conv(width(64), 3, 2));
            bn_relu(L);
            L.push_back(pool(pk, pw, 2));
        } else {
            L.push_back(conv(width(64), 3, 2));
            bn_relu(L);
            L.push_back(pool(pk, pw, 2));
            L.push_back(conv(width(128), 3, 2));
            bn_relu(L);
            L.push_back(pool(pk, pw, 2));
        }
    } else {
        // non-overlapping 4x4 DCT replaces conv 5x5/2 + first subsampling
        L.push_back(harm(width(32), 4, 4, std::nullopt, o.first_block_bn, o.drop_dc));
        bn_relu(L);
        L.push_back(harmonic_stages >= 2 ? harm(width(64), 3, 2, hidden_lambda) : conv(width(64), 3, 2));
        bn_relu(L);
        L.push_back(pool(pk, pw, 2));
        if (stages == 3) {
            L.push_back(harmonic_stages >= 3 ? harm(width(128), 3, 2, hidden_lambda) : conv(width(128), 3, 2));
            bn_relu(L);
        }
    }

    const bool global_head = o.variant == V::harm4 || compact;
    if (global_head) {
        LayerDesc g = harm(compact ? width(32) : width(128), 3, 3, hidden_lambda);
        g.kind = LayerKind::global_harm;
        L.push_back(g);
        bn_relu(L);
        if (!compact) L.push_back(dropout(0.5));
    } else {
        L.push_back(fc(width(1024)));
        bn_relu(L);
        L.push_back(dropout(0.5));
    }
    L.push_back(fc(o.classes));
    infer_shapes(arch);
    return arch;
}

Network build_norb(const NorbOptions& options, std::uint64_t seed) { return build(norb_arch(options), seed); }

WrnMode parse_wrn_mode(const std::string& name) {
    if (name == "baseline") return WrnMode::baseline;
    if (name == "harm0") return WrnMode::harm0;
    if (name == "harm0_bn") return WrnMode::harm0_bn;
    if (name == "fully_harm") return WrnMode::fully_harm;
    throw ConfigError("unknown WRN mode '" + name + "' (baseline, harm0, harm0_bn, fully_harm)");
}

std::string to_string(WrnMode m) {
    switch (m) {
        case WrnMode::baseline: return "baseline";
        case WrnMode::harm0: return "harm0";
        case WrnMode::harm0_bn: return "harm0_bn";
        case WrnMode::fully_harm: return "fully_harm";
    }
    return "?";
}

ArchSpec wrn_arch(const WrnOptions& o) {
    if (o.depth < 10 || (o.depth - 4) % 6 != 0) {
        throw ConfigError("WRN depth " + std::to_string(o.depth) + " is not of the form 6n+4 (n >= 1)");
    }
    if (o.width == 0) throw ConfigError("WRN width must be >= 1");
    if (o.lambda && o.mode != WrnMode::fully_harm) {
        throw ConfigError("lambda applies to hidden harmonic blocks, which only fully_harm has");
    }
    if (o.lambda && (*o.lambda < 1 || *o.lambda > 3)) throw ConfigError("WRN lambda must be in [1, 3]");
    const std::size_t n = (o.depth - 4) / 6;

    ArchSpec arch;
    arch.channels = o.channels;
    arch.height = o.size;
    arch.width = o.size;
    arch.classes = o.classes;
    auto& L = arch.layers;

    if (o.mode == WrnMode::baseline) {
        L.push_back(conv(16, 3, 1));
    } else {
        // stem keeps the full input spectrum; harm0 alone is unnormalized
        L.push_back(harm(16, 3, 1, std::nullopt, o.mode != WrnMode::harm0));
    }
    const std::array<std::size_t, 3> widths{16 * o.width, 32 * o.width, 64 * o.width};
    for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t b = 0; b < n; ++b) {
            LayerDesc r;
            r.kind = LayerKind::res;
            r.out = widths[g];
            r.kernel = 3;
            r.stride = (g > 0 && b == 0) ? 2 : 1;
            r.p = o.dropout;
            if (o.mode == WrnMode::fully_harm) {
                r.body = ResBody::harm;
                r.lambda = o.lambda;
            }
            L.push_back(r);
        }
    }
    bn_relu(L);
    const std::size_t final_size = (o.size + 3) / 4;  // two stride-2 stages with pad 1
    L.push_back(pool(PoolKind::avg, final_size, final_size));
    L.push_back(fc(o.classes));
    infer_shapes(arch);
    return arch;
}

Network build_wrn(const WrnOptions& options, std::uint64_t seed) { return build(wrn_arch(options), seed); }

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::istringstream in(s);
    for (std::string p; std::getline(in, p, sep);) parts.push_back(p);
    return parts;
}

std::size_t to_size(const std::string& s, const std::string& preset) {
    try {
        std::size_t pos = 0;
        const auto v = std::stoul(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad number '" + s + "' in preset '" + preset + "'");
    }
}

ArchSpec toy_arch(const std::string& name) {
    // Small nets used by gradient checks and smoke runs.
    std::string text;
    if (name == "toy-harm-l2") {
        text = "input 2x6x6\nclasses 3\nharm 3,3x3/2 lambda=2\nrelu\nfc 3\n";
    } else if (name == "toy-harm-bn") {
        text = "input 2x6x6\nclasses 3\nharm 3,3x3/1 bn\nbn\nrelu\npool avg 2x2/2\nfc 3\n";
    } else if (name == "toy-harm3") {
        text =
            "input 1x12x12\nclasses 3\nharm 4,4x4/4 bn\nbn\nrelu\nharm 4,3x3/1 lambda=2\nrelu\n"
            "harm 3,3x3/3 lambda=3\n";
        text += "fc 3\n";
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return parse_arch(text);
}

}  // namespace

ArchSpec resolve_arch(const std::string& name) {
    const auto parts = split(name, '-');
    if (!parts.empty() && parts[0] == "wrn" && parts.size() >= 3) {
        WrnOptions o;
        o.depth = to_size(parts[1], name);
        o.width = to_size(parts[2], name);
        for (std::size_t i = 3; i < parts.size(); ++i) {
            const std::string& p = parts[i];
            if (p.size() > 1 && p[0] == 'l' && std::isdigit(static_cast<unsigned char>(p[1]))) {
                o.lambda = to_size(p.substr(1), name);
            } else if (p.rfind("c", 0) == 0 && p.size() > 1 && std::isdigit(static_cast<unsigned char>(p[1]))) {
                o.classes = to_size(p.substr(1), name);
            } else {
                o.mode = parse_wrn_mode(p);
            }
        }
        return wrn_arch(o);
    }
    if (!parts.empty() && parts[0] == "norb" && parts.size() >= 2) {
        NorbOptions o;
        o.variant = parse_norb_variant(parts[1]);
        if (o.variant == NorbVariant::cnn2 || o.variant == NorbVariant::cnn3) o.pooling = NorbPooling::overlap_max;
        if (o.variant == NorbVariant::compact45k) o.pooling = NorbPooling::avg;
        for (std::size_t i = 2; i < parts.size(); ++i) {
            const std::string& p = parts[i];
            if (p == "s2") {
                o.stages = 2;
            } else if (p == "s3") {
                o.stages = 3;
            } else if (p == "nobn") {
                o.first_block_bn = false;
            } else if (p == "dropdc") {
                o.drop_dc = true;
            } else if (p.size() > 1 && p[0] == 'w' && std::isdigit(static_cast<unsigned char>(p[1]))) {
                o.width_divisor = to_size(p.substr(1), name);
            } else {
                o.pooling = parse_norb_pooling(p);
            }
        }
        return norb_arch(o);
    }
    if (name.rfind("toy-", 0) == 0) return toy_arch(name);

    if (!std::filesystem::exists(name)) {
        throw ConfigError("'" + name + "' is neither a known preset nor an existing architecture file");
    }
    std::ifstream in(name);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_arch(ss.str());
}

}  // namespace harmonica::models
