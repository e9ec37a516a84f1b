#include "harmonica/models/arch.hpp"

#include <charconv>
#include <sstream>

#include "harmonica/spectral.hpp"

namespace harmonica::models {

std::size_t LayerDesc::padding() const {
    if (kind == LayerKind::global_harm) return 0;
    return pad.value_or(default_pad(kernel, stride));
}

namespace {

std::string where(std::size_t index) { return "layer " + std::to_string(index) + ": "; }

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

void check_spectrum(const LayerDesc& l, std::size_t index) {
    if (l.lambda && (*l.lambda < 1 || *l.lambda > l.kernel)) {
        throw ConfigError(where(index) + "lambda " + std::to_string(*l.lambda) + " outside [1, " +
                          std::to_string(l.kernel) + "]");
    }
    if (l.drop_dc && l.lambda && *l.lambda == 1) {
        throw ConfigError(where(index) + "drop_dc with lambda=1 leaves an empty spectrum");
    }
}

Shape spatial_out(const Shape& in, std::size_t out_channels, const ConvSpec& spec, std::size_t index) {
    try {
        return {1, out_channels, spec.out_height(in.height), spec.out_width(in.width)};
    } catch (const ConfigError& e) {
        throw ConfigError(where(index) + e.what());
    }
}

}  // namespace

std::vector<Shape> infer_shapes(const ArchSpec& arch) {
    if (arch.channels == 0 || arch.height == 0 || arch.width == 0) throw ConfigError("input shape must be non-empty");
    if (arch.classes == 0) throw ConfigError("class count must be >= 1");
    std::vector<Shape> shapes;
    Shape cur{1, arch.channels, arch.height, arch.width};
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerDesc& l = arch.layers[i];
        switch (l.kind) {
            case LayerKind::conv:
            case LayerKind::harm:
                if (l.out == 0 || l.kernel == 0) throw ConfigError(where(i) + "needs output channels and kernel");
                if (l.kind == LayerKind::harm) check_spectrum(l, i);
                cur = spatial_out(cur, l.out, ConvSpec::square(l.kernel, l.stride, l.padding()), i);
                break;
            case LayerKind::global_harm:
                if (l.out == 0 || l.kernel == 0) throw ConfigError(where(i) + "needs output channels and kernel");
                if (cur.height != l.kernel || cur.width != l.kernel) {
                    throw ConfigError(where(i) + "global harmonic block window " + std::to_string(l.kernel) +
                                      " must cover the whole " + std::to_string(cur.height) + "x" +
                                      std::to_string(cur.width) + " input");
                }
                check_spectrum(l, i);
                cur = {1, l.out, 1, 1};
                break;
            case LayerKind::pool:
                if (l.kernel == 0) throw ConfigError(where(i) + "pool window must be >= 1");
                if (l.padding() >= l.kernel && l.padding() > 0) throw ConfigError(where(i) + "pool pad >= window");
                cur = spatial_out(cur, cur.channels, ConvSpec::square(l.kernel, l.stride, l.padding()), i);
                break;
            case LayerKind::fc:
                if (l.out == 0) throw ConfigError(where(i) + "fc needs >= 1 output");
                cur = {1, l.out, 1, 1};
                break;
            case LayerKind::dropout:
                if (!(l.p >= 0.0 && l.p < 1.0)) throw ConfigError(where(i) + "dropout p outside [0, 1)");
                break;
            case LayerKind::relu:
            case LayerKind::bn:
                break;
            case LayerKind::res:
                if (l.out == 0 || l.kernel == 0) throw ConfigError(where(i) + "res needs output channels and kernel");
                if (!(l.p >= 0.0 && l.p < 1.0)) throw ConfigError(where(i) + "dropout p outside [0, 1)");
                if (l.body == ResBody::harm) check_spectrum(l, i);
                if (l.body == ResBody::conv && (l.lambda || l.spectrum_bn || l.drop_dc)) {
                    throw ConfigError(where(i) + "spectrum options need body=harm");
                }
                cur = spatial_out(cur, l.out, ConvSpec::square(l.kernel, l.stride, l.padding()), i);
                break;
        }
        shapes.push_back(cur);
    }
    if (cur.channels != arch.classes || cur.height != 1 || cur.width != 1) {
        throw ConfigError("network output " + cur.str() + " does not match " + std::to_string(arch.classes) +
                          " classes");
    }
    return shapes;
}

std::string describe(const LayerDesc& l) {
    std::ostringstream os;
    auto geometry = [&](const char* name) {
        os << name << ' ' << l.out << ',' << l.kernel << 'x' << l.kernel << '/' << l.stride;
    };
    auto spectrum = [&] {
        if (l.lambda) os << " lambda=" << *l.lambda;
        if (l.spectrum_bn) os << " bn";
        if (l.drop_dc) os << " drop_dc";
    };
    auto padding = [&] {
        if (l.pad && *l.pad != default_pad(l.kernel, l.stride)) os << " pad=" << *l.pad;
    };
    switch (l.kind) {
        case LayerKind::conv:
            geometry("conv");
            padding();
            break;
        case LayerKind::harm:
            geometry("harm");
            spectrum();
            padding();
            break;
        case LayerKind::global_harm:
            geometry("global_harm");
            spectrum();
            break;
        case LayerKind::pool:
            os << "pool " << (l.pool == PoolKind::max ? "max" : "avg") << ' ' << l.kernel << 'x' << l.kernel << '/'
               << l.stride;
            padding();
            break;
        case LayerKind::fc:
            os << "fc " << l.out;
            break;
        case LayerKind::dropout:
            os << "dropout " << format_double(l.p);
            break;
        case LayerKind::relu:
            os << "relu";
            break;
        case LayerKind::bn:
            os << "bn";
            break;
        case LayerKind::res:
            geometry("res");
            os << " body=" << (l.body == ResBody::harm ? "harm" : "conv");
            spectrum();
            if (l.p > 0.0) os << " dropout=" << format_double(l.p);
            padding();
            break;
    }
    return os.str();
}

std::string to_text(const ArchSpec& arch) {
    std::ostringstream os;
    os << "input " << arch.channels << 'x' << arch.height << 'x' << arch.width << '\n';
    os << "classes " << arch.classes << '\n';
    for (const auto& l : arch.layers) os << describe(l) << '\n';
    return os.str();
}

namespace {

std::size_t parse_size(const std::string& s, std::size_t line, const char* what) {
    std::size_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw ConfigError("arch line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
    }
    return v;
}

double parse_double(const std::string& s, std::size_t line, const char* what) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw ConfigError("arch line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
    }
    return v;
}

// "KxK/S" or "KxK" -> (K, S)
std::pair<std::size_t, std::size_t> parse_window(const std::string& s, std::size_t line) {
    const auto slash = s.find('/');
    const std::string dims = s.substr(0, slash);
    const std::size_t stride = slash == std::string::npos ? 1 : parse_size(s.substr(slash + 1), line, "stride");
    const auto x = dims.find('x');
    if (x == std::string::npos) throw ConfigError("arch line " + std::to_string(line) + ": expected KxK, got " + s);
    const std::size_t kh = parse_size(dims.substr(0, x), line, "kernel");
    const std::size_t kw = parse_size(dims.substr(x + 1), line, "kernel");
    if (kh != kw) throw ConfigError("arch line " + std::to_string(line) + ": only square windows are supported");
    return {kh, stride};
}

// "M,KxK/S"
void parse_geometry(const std::string& s, LayerDesc& l, std::size_t line) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw ConfigError("arch line " + std::to_string(line) + ": expected M,KxK/S");
    l.out = parse_size(s.substr(0, comma), line, "output channels");
    std::tie(l.kernel, l.stride) = parse_window(s.substr(comma + 1), line);
}

void parse_options(const std::vector<std::string>& tokens, std::size_t first, LayerDesc& l, std::size_t line) {
    const bool spectral = l.kind == LayerKind::harm || l.kind == LayerKind::global_harm || l.kind == LayerKind::res;
    for (std::size_t i = first; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        const auto eq = t.find('=');
        const std::string key = t.substr(0, eq);
        const std::string value = eq == std::string::npos ? "" : t.substr(eq + 1);
        if (key == "pad" && eq != std::string::npos && l.kind != LayerKind::global_harm) {
            l.pad = parse_size(value, line, "pad");
        } else if (spectral && key == "lambda" && eq != std::string::npos) {
            if (value != "full") l.lambda = parse_size(value, line, "lambda");
        } else if (spectral && t == "bn") {
            l.spectrum_bn = true;
        } else if (spectral && t == "drop_dc") {
            l.drop_dc = true;
        } else if (l.kind == LayerKind::res && key == "body" && (value == "conv" || value == "harm")) {
            l.body = value == "harm" ? ResBody::harm : ResBody::conv;
        } else if (l.kind == LayerKind::res && key == "dropout" && eq != std::string::npos) {
            l.p = parse_double(value, line, "dropout");
        } else {
            throw ConfigError("arch line " + std::to_string(line) + ": unknown option '" + t + "'");
        }
    }
}

}  // namespace

ArchSpec parse_arch(const std::string& text) {
    ArchSpec arch;
    bool saw_input = false;
    bool saw_classes = false;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::vector<std::string> tokens;
        for (std::string t; ls >> t;) tokens.push_back(t);
        if (tokens.empty()) continue;
        const std::string& head = tokens[0];
        auto need = [&](std::size_t n) {
            if (tokens.size() < n) throw ConfigError("arch line " + std::to_string(line_no) + ": '" + head + "' is incomplete");
        };
        auto exact = [&](std::size_t n) {
            if (tokens.size() != n) throw ConfigError("arch line " + std::to_string(line_no) + ": unexpected tokens after '" + head + "'");
        };
        LayerDesc l;
        if (head == "input") {
            exact(2);
            const std::string& s = tokens[1];
            const auto a = s.find('x');
            const auto b = s.find('x', a == std::string::npos ? a : a + 1);
            if (a == std::string::npos || b == std::string::npos) {
                throw ConfigError("arch line " + std::to_string(line_no) + ": expected input CxHxW");
            }
            arch.channels = parse_size(s.substr(0, a), line_no, "channels");
            arch.height = parse_size(s.substr(a + 1, b - a - 1), line_no, "height");
            arch.width = parse_size(s.substr(b + 1), line_no, "width");
            saw_input = true;
            continue;
        }
        if (head == "classes") {
            exact(2);
            arch.classes = parse_size(tokens[1], line_no, "classes");
            saw_classes = true;
            continue;
        }
        if (head == "conv" || head == "harm" || head == "global_harm" || head == "res") {
            need(2);
            l.kind = head == "conv"   ? LayerKind::conv
                     : head == "harm" ? LayerKind::harm
                     : head == "res"  ? LayerKind::res
                                      : LayerKind::global_harm;
            parse_geometry(tokens[1], l, line_no);
            parse_options(tokens, 2, l, line_no);
        } else if (head == "pool") {
            need(3);
            l.kind = LayerKind::pool;
            if (tokens[1] == "max") {
                l.pool = PoolKind::max;
            } else if (tokens[1] == "avg") {
                l.pool = PoolKind::avg;
            } else {
                throw ConfigError("arch line " + std::to_string(line_no) + ": pool kind must be max or avg");
            }
            std::tie(l.kernel, l.stride) = parse_window(tokens[2], line_no);
            parse_options(tokens, 3, l, line_no);
        } else if (head == "fc") {
            exact(2);
            l.kind = LayerKind::fc;
            l.out = parse_size(tokens[1], line_no, "fc width");
        } else if (head == "dropout") {
            exact(2);
            l.kind = LayerKind::dropout;
            l.p = parse_double(tokens[1], line_no, "dropout");
        } else if (head == "relu" || head == "bn") {
            exact(1);
            l.kind = head == "relu" ? LayerKind::relu : LayerKind::bn;
        } else {
            throw ConfigError("arch line " + std::to_string(line_no) + ": unknown layer '" + head + "'");
        }
        arch.layers.push_back(l);
    }
    if (!saw_input) throw ConfigError("arch text has no 'input CxHxW' line");
    if (!saw_classes) throw ConfigError("arch text has no 'classes N' line");
    return arch;
}

namespace {

std::unique_ptr<nn::Layer> spatial_op(ResBody body, std::size_t in, std::size_t out, std::size_t kernel,
                                      std::size_t stride, std::size_t pad, const LayerDesc& l, Rng& init) {
    if (body == ResBody::conv) return std::make_unique<nn::Conv2d>(in, out, kernel, stride, pad, init);
    nn::HarmonicConfig hc{in, out, kernel, stride, pad, l.lambda, l.spectrum_bn, l.drop_dc};
    return std::make_unique<nn::HarmonicBlock>(hc, init);
}

}  // namespace

Network build(const ArchSpec& arch, std::uint64_t seed) {
    const auto shapes = infer_shapes(arch);
    Rng init = Rng::stream(seed, "init");
    auto net = std::make_unique<nn::Sequential>();
    Shape cur{1, arch.channels, arch.height, arch.width};
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerDesc& l = arch.layers[i];
        switch (l.kind) {
            case LayerKind::conv:
                net->emplace<nn::Conv2d>(cur.channels, l.out, l.kernel, l.stride, l.padding(), init);
                break;
            case LayerKind::harm:
            case LayerKind::global_harm: {
                const bool global = l.kind == LayerKind::global_harm;
                nn::HarmonicConfig hc{cur.channels, l.out,    l.kernel,      global ? l.kernel : l.stride,
                                      l.padding(),  l.lambda, l.spectrum_bn, l.drop_dc};
                net->emplace<nn::HarmonicBlock>(hc, init);
                break;
            }
            case LayerKind::pool:
                net->emplace<nn::Pool>(PoolSpec{l.pool, l.kernel, l.stride, l.padding()});
                break;
            case LayerKind::fc:
                net->emplace<nn::Linear>(cur.sample(), l.out, init);
                break;
            case LayerKind::dropout:
                net->emplace<nn::Dropout>(l.p, Rng::stream(seed, "dropout/" + std::to_string(i)));
                break;
            case LayerKind::relu:
                net->emplace<nn::ReLU>();
                break;
            case LayerKind::bn:
                net->emplace<nn::BatchNorm>(cur.channels);
                break;
            case LayerKind::res: {
                auto pre = std::make_unique<nn::Sequential>();
                pre->emplace<nn::BatchNorm>(cur.channels);
                pre->emplace<nn::ReLU>();
                auto body = std::make_unique<nn::Sequential>();
                body->add(spatial_op(l.body, cur.channels, l.out, l.kernel, l.stride, l.padding(), l, init));
                body->emplace<nn::BatchNorm>(l.out);
                body->emplace<nn::ReLU>();
                if (l.p > 0.0) body->emplace<nn::Dropout>(l.p, Rng::stream(seed, "dropout/" + std::to_string(i)));
                body->add(spatial_op(l.body, l.out, l.out, l.kernel, 1, default_pad(l.kernel, 1), l, init));
                nn::LayerPtr projection;
                if (cur.channels != l.out || l.stride != 1) {
                    projection = std::make_unique<nn::Conv2d>(cur.channels, l.out, 1, l.stride, 0, init);
                }
                net->emplace<nn::ResidualUnit>(std::move(pre), std::move(body), std::move(projection));
                break;
            }
        }
        cur = shapes[i];
    }
    return Network{arch, std::move(net)};
}

}  // namespace harmonica::models
