#include "netspec.hpp"

#include <cmath>

namespace vxr {
namespace {

// FNV-1a, stable across platforms.
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

int scaled_channels(int base, double width_scale) {
    const long v = std::lround(base * width_scale);
    VXR_CHECK_USAGE(v >= 1, "width_scale " << width_scale << " produces zero channels for base width " << base);
    return static_cast<int>(std::max(2L, v));
}

// The schedule walker. Every consumer of the architecture (parameter
// creation, layer counting, the forward pass) runs through this one
// function with a different backend, so they cannot drift apart.
//
// Backend contract:
//   Value input(int channels);
//   Value conv(name, Value, in_ch, out_ch, kernel, stride, pad, bias);
//   Value deconv(name, Value, in_ch, out_ch, stride);   // kernel 2s, pad s/2
//   Value bn_relu(name, Value, channels);
//   Value add(Value, Value);
template <typename B>
void run_schedule(const NetworkSpec& spec, B& backend, std::array<typename B::Value, 4>* heads_out) {
    using Value = typename B::Value;
    Value cur = backend.input(spec.in_channels);
    int cur_ch = spec.in_channels;
    std::vector<Value> taps;
    std::vector<int> tap_ch;
    taps.reserve(spec.backbone.size());

    for (std::size_t i = 0; i < spec.backbone.size(); ++i) {
        const auto& e = spec.backbone[i];
        const std::string p = "b" + std::to_string(i);
        switch (e.kind) {
            case NetworkSpec::Entry::Kind::Conv:
                if (i > 0) cur = backend.bn_relu(p + ".bn", cur, cur_ch);
                cur = backend.conv(p + ".conv", cur, cur_ch, e.channels, 3, 1, 1, false);
                cur_ch = e.channels;
                break;
            case NetworkSpec::Entry::Kind::DownConv:
                cur = backend.bn_relu(p + ".bn", cur, cur_ch);
                cur = backend.conv(p + ".conv", cur, cur_ch, e.channels, 3, 2, 1, false);
                cur_ch = e.channels;
                break;
            case NetworkSpec::Entry::Kind::VoxRes: {
                VXR_CHECK(e.channels == cur_ch, "VoxRes entry channel count must match its input");
                Value t = backend.bn_relu(p + ".bn1", cur, cur_ch);
                t = backend.conv(p + ".conv1", t, cur_ch, cur_ch, 3, 1, 1, false);
                t = backend.bn_relu(p + ".bn2", t, cur_ch);
                t = backend.conv(p + ".conv2", t, cur_ch, cur_ch, 3, 1, 1, false);
                cur = backend.add(cur, t);
                break;
            }
        }
        taps.push_back(cur);
        tap_ch.push_back(cur_ch);
    }

    for (int a = 0; a < 4; ++a) {
        const auto& head = spec.heads[static_cast<std::size_t>(a)];
        const std::string p = "c" + std::to_string(a + 1);
        Value t = taps[static_cast<std::size_t>(head.tap)];
        int ch = tap_ch[static_cast<std::size_t>(head.tap)];
        t = backend.bn_relu(p + ".bn0", t, ch);
        for (std::size_t j = 0; j < head.deconv_strides.size(); ++j) {
            const int s = head.deconv_strides[j];
            t = backend.deconv(p + ".deconv" + std::to_string(j + 1), t, ch, head.mid_channels, s);
            ch = head.mid_channels;
            t = backend.bn_relu(p + ".bn" + std::to_string(j + 1), t, ch);
        }
        t = backend.conv(p + ".conv", t, ch, head.mid_channels, 3, 1, 1, false);
        ch = head.mid_channels;
        t = backend.bn_relu(p + ".bnc", t, ch);
        t = backend.conv(p + ".cls", t, ch, spec.num_classes, 1, 1, 0, true);
        (*heads_out)[static_cast<std::size_t>(a)] = t;
    }
}

struct CountBackend {
    using Value = int;  // carries nothing; channel flow is handled by run_schedule
    int convs = 0, deconvs = 0, stride2 = 0, bns = 0;
    Value input(int) { return 0; }
    Value conv(const std::string&, Value, int, int, int, int stride, int, bool) {
        ++convs;
        if (stride == 2) ++stride2;
        return 0;
    }
    Value deconv(const std::string&, Value, int, int, int) {
        ++deconvs;
        return 0;
    }
    Value bn_relu(const std::string&, Value, int) {
        ++bns;
        return 0;
    }
    Value add(Value, Value) { return 0; }
};

template <typename S>
struct InitBackend {
    using Value = int;
    NetworkParams<S>* params;
    Rng* rng;

    Tensor<S> gaussian(const std::vector<std::int64_t>& shape, double stddev) {
        Tensor<S> t(shape);
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng->normal(0.0, stddev));
        return t;
    }

    Value input(int) { return 0; }
    Value conv(const std::string& name, Value, int in_ch, int out_ch, int k, int, int, bool bias) {
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k * k));
        params->weights.add(name + ".w", gaussian({out_ch, in_ch, k, k, k}, stddev));
        if (bias) params->weights.add(name + ".bias", Tensor<S>({out_ch}));
        return 0;
    }
    Value deconv(const std::string& name, Value, int in_ch, int out_ch, int s) {
        const int k = 2 * s;
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k * k));
        params->weights.add(name + ".w", gaussian({in_ch, out_ch, k, k, k}, stddev));
        return 0;
    }
    Value bn_relu(const std::string& name, Value, int ch) {
        params->weights.add(name + ".gamma", Tensor<S>::full({ch}, S(1)));
        params->weights.add(name + ".beta", Tensor<S>({ch}));
        RunningStats<S> st;
        st.reset(ch);
        params->bn.emplace_back(name, std::move(st));
        return 0;
    }
    Value add(Value, Value) { return 0; }
};

template <typename S>
struct GraphBackend {
    using Value = typename Graph<S>::NodeId;
    Graph<S>* g;
    NetworkParams<S>* params;
    BatchNormMode mode;
    Value input_node;

    Value p(const std::string& name) {
        const Tensor<S>* t = params->weights.find(name);
        VXR_CHECK(t != nullptr, "network parameter missing: " << name);
        return g->param(name, *t);
    }

    Value input(int) { return input_node; }
    Value conv(const std::string& name, Value x, int in_ch, int out_ch, int k, int s, int pad, bool bias) {
        (void)in_ch;
        ConvSpec spec = ConvSpec::cube(out_ch, k, s, pad, bias);
        const Value w = p(name + ".w");
        const Value b = bias ? p(name + ".bias") : Graph<S>::none;
        return g->conv3d(x, w, b, spec);
    }
    Value deconv(const std::string& name, Value x, int in_ch, int out_ch, int s) {
        (void)in_ch;
        ConvSpec spec = ConvSpec::cube(out_ch, 2 * s, s, s / 2, false);
        return g->deconv3d(x, p(name + ".w"), spec);
    }
    Value bn_relu(const std::string& name, Value x, int) {
        const Value gamma = p(name + ".gamma");
        const Value beta = p(name + ".beta");
        return g->relu(g->batchnorm(x, gamma, beta, mode, params->bn_stats(name)));
    }
    Value add(Value a, Value b) { return g->add(a, b); }
};

}  // namespace

NetworkSpec build_voxresnet(int in_channels, int num_classes, double width_scale) {
    VXR_CHECK_USAGE(in_channels >= 1, "network needs at least one input channel");
    VXR_CHECK_USAGE(num_classes >= 2, "network needs at least two classes");
    const int c32 = scaled_channels(32, width_scale);
    const int c64 = scaled_channels(64, width_scale);

    NetworkSpec spec;
    spec.in_channels = in_channels;
    spec.num_classes = num_classes;
    spec.width_scale = width_scale;
    using K = NetworkSpec::Entry::Kind;
    spec.backbone = {
        {K::Conv, c32},    {K::Conv, c32},    {K::DownConv, c64}, {K::VoxRes, c64},
        {K::VoxRes, c64},  {K::DownConv, c64}, {K::VoxRes, c64},  {K::VoxRes, c64},
        {K::DownConv, c64}, {K::VoxRes, c64},  {K::VoxRes, c64},
    };
    spec.heads = {NetworkSpec::Head{1, {}, c32}, NetworkSpec::Head{4, {2}, c32},
                  NetworkSpec::Head{7, {4}, c32}, NetworkSpec::Head{10, {4, 2}, c32}};
    return spec;
}

int NetworkSpec::conv_count() const {
    CountBackend b;
    std::array<int, 4> sink;
    run_schedule(*this, b, &sink);
    return b.convs;
}

int NetworkSpec::deconv_count() const {
    CountBackend b;
    std::array<int, 4> sink;
    run_schedule(*this, b, &sink);
    return b.deconvs;
}

int NetworkSpec::stride2_conv_count() const {
    CountBackend b;
    std::array<int, 4> sink;
    run_schedule(*this, b, &sink);
    return b.stride2;
}

std::string NetworkSpec::schedule_string() const {
    std::string s = "in=" + std::to_string(in_channels) + ";classes=" + std::to_string(num_classes) + ";bb=";
    for (const auto& e : backbone) {
        switch (e.kind) {
            case Entry::Kind::Conv: s += "C"; break;
            case Entry::Kind::DownConv: s += "S"; break;
            case Entry::Kind::VoxRes: s += "R"; break;
        }
        s += std::to_string(e.channels) + ",";
    }
    s += ";heads=";
    for (const auto& h : heads) {
        s += "t" + std::to_string(h.tap) + "m" + std::to_string(h.mid_channels) + "d";
        for (int d : h.deconv_strides) s += std::to_string(d) + ".";
        s += ",";
    }
    return s;
}

std::uint64_t NetworkSpec::schedule_hash() const { return fnv1a(schedule_string()); }

template <typename S>
RunningStats<S>& NetworkParams<S>::bn_stats(const std::string& name) {
    for (auto& e : bn) {
        if (e.first == name) return e.second;
    }
    VXR_CHECK(false, "batchnorm state missing: " << name);
    return bn.front().second;  // unreachable
}

template <typename S>
const RunningStats<S>* NetworkParams<S>::find_bn(const std::string& name) const {
    for (const auto& e : bn) {
        if (e.first == name) return &e.second;
    }
    return nullptr;
}

template <typename S>
bool NetworkParams<S>::bn_ready() const {
    for (const auto& e : bn) {
        if (!e.second.initialized) return false;
    }
    return !bn.empty();
}

template <typename S>
NetworkParams<S> init_params(const NetworkSpec& spec, std::uint64_t seed) {
    NetworkParams<S> params;
    Rng rng(seed);
    InitBackend<S> backend{&params, &rng};
    std::array<int, 4> sink;
    run_schedule(spec, backend, &sink);
    return params;
}

std::int64_t parameter_count_from_store(const ParamStore<float>& weights) {
    std::int64_t n = 0;
    for (const auto& [name, t] : weights) n += t.numel();
    return n;
}

int c1_receptive_radius(const NetworkSpec& spec) {
    // C1 taps a stride-1 prefix of the backbone; each 3^3 conv on the path
    // (including the head's own 3^3 conv) widens the radius by 1.
    int radius = 0;
    for (int i = 0; i <= spec.heads[0].tap; ++i) {
        const auto& e = spec.backbone[static_cast<std::size_t>(i)];
        VXR_CHECK(e.kind == NetworkSpec::Entry::Kind::Conv, "C1 tap path must be stride-1 convs");
        radius += 1;
    }
    VXR_CHECK(spec.heads[0].deconv_strides.empty(), "C1 head is expected to run at full resolution");
    return radius + 1;
}

template <typename S>
AuxOutputs<S> forward(Graph<S>& g, const NetworkSpec& spec, NetworkParams<S>& params, const Tensor<S>& x,
                      BatchNormMode mode) {
    VXR_CHECK(x.rank() == 5, "network input must be [N, C, D, H, W]");
    VXR_CHECK_DATA(x.dim(1) == spec.in_channels, "network expects " << spec.in_channels
                                                                    << " input channels, got " << x.dim(1));
    std::array<std::int64_t, 3> orig = {x.dim(2), x.dim(3), x.dim(4)};
    std::array<std::int64_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
    bool padded = false;
    for (int i = 0; i < 3; ++i) {
        VXR_CHECK_DATA(orig[static_cast<std::size_t>(i)] >= 8,
                       "network input spatial extent must be >= 8, got " << orig[static_cast<std::size_t>(i)]);
        const std::int64_t target = (orig[static_cast<std::size_t>(i)] + 7) / 8 * 8;
        const std::int64_t pad = target - orig[static_cast<std::size_t>(i)];
        lo[static_cast<std::size_t>(i)] = pad / 2;
        hi[static_cast<std::size_t>(i)] = pad - pad / 2;
        if (pad > 0) padded = true;
    }

    typename Graph<S>::NodeId in_node;
    if (padded) {
        in_node = g.input(reflect_pad3d(x, lo, hi));
    } else {
        in_node = g.input(x);
    }

    GraphBackend<S> backend{&g, &params, mode, in_node};
    std::array<typename Graph<S>::NodeId, 4> raw_heads;
    run_schedule(spec, backend, &raw_heads);

    AuxOutputs<S> out;
    for (int a = 0; a < 4; ++a) {
        auto id = raw_heads[static_cast<std::size_t>(a)];
        if (padded) id = g.crop_spatial(id, lo, orig);
        out.aux_logits[static_cast<std::size_t>(a)] = id;
    }
    out.final_logits = g.add(g.add(out.aux_logits[0], out.aux_logits[1]),
                             g.add(out.aux_logits[2], out.aux_logits[3]));
    for (int a = 0; a < 4; ++a) {
        out.aux_probs[static_cast<std::size_t>(a)] =
            vxr::softmax_channels(g.value(out.aux_logits[static_cast<std::size_t>(a)]));
    }
    out.final_probs = vxr::softmax_channels(g.value(out.final_logits));
    return out;
}

template <typename S>
VoxResModule<S> make_voxres_module(int channels, Rng& rng) {
    VoxResModule<S> m;
    m.channels = channels;
    const double stddev = std::sqrt(2.0 / (static_cast<double>(channels) * 27.0));
    auto gaussian = [&](std::vector<std::int64_t> shape) {
        Tensor<S> t(std::move(shape));
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng.normal(0.0, stddev));
        return t;
    };
    m.bn1_gamma = Tensor<S>::full({channels}, S(1));
    m.bn1_beta = Tensor<S>({channels});
    m.conv1_w = gaussian({channels, channels, 3, 3, 3});
    m.bn2_gamma = Tensor<S>::full({channels}, S(1));
    m.bn2_beta = Tensor<S>({channels});
    m.conv2_w = gaussian({channels, channels, 3, 3, 3});
    m.bn1_stats.reset(channels);
    m.bn2_stats.reset(channels);
    return m;
}

template <typename S>
Tensor<S> voxres_branch(const Tensor<S>& x, VoxResModule<S>& m, BatchNormMode mode) {
    VXR_CHECK_DATA(x.dim(1) == m.channels,
                   "VoxRes module expects " << m.channels << " channels, got " << x.dim(1));
    const ConvSpec spec = ConvSpec::cube(m.channels, 3, 1, 1, false);
    Tensor<S> t = vxr::relu(vxr::batchnorm(x, m.bn1_gamma, m.bn1_beta, mode, m.bn1_stats));
    t = vxr::conv3d<S>(t, m.conv1_w, nullptr, spec);
    t = vxr::relu(vxr::batchnorm(t, m.bn2_gamma, m.bn2_beta, mode, m.bn2_stats));
    return vxr::conv3d<S>(t, m.conv2_w, nullptr, spec);
}

template <typename S>
Tensor<S> voxres_forward(const Tensor<S>& x, VoxResModule<S>& m, BatchNormMode mode) {
    return vxr::add(x, voxres_branch(x, m, mode));
}

template struct NetworkParams<float>;
template struct NetworkParams<double>;
template NetworkParams<float> init_params<float>(const NetworkSpec&, std::uint64_t);
template NetworkParams<double> init_params<double>(const NetworkSpec&, std::uint64_t);
template struct AuxOutputs<float>;
template struct AuxOutputs<double>;
template AuxOutputs<float> forward<float>(Graph<float>&, const NetworkSpec&, NetworkParams<float>&,
                                          const Tensor<float>&, BatchNormMode);
template AuxOutputs<double> forward<double>(Graph<double>&, const NetworkSpec&, NetworkParams<double>&,
                                            const Tensor<double>&, BatchNormMode);
template struct VoxResModule<float>;
template struct VoxResModule<double>;
template VoxResModule<float> make_voxres_module<float>(int, Rng&);
template VoxResModule<double> make_voxres_module<double>(int, Rng&);
template Tensor<float> voxres_branch<float>(const Tensor<float>&, VoxResModule<float>&, BatchNormMode);
template Tensor<double> voxres_branch<double>(const Tensor<double>&, VoxResModule<double>&, BatchNormMode);
template Tensor<float> voxres_forward<float>(const Tensor<float>&, VoxResModule<float>&, BatchNormMode);
template Tensor<double> voxres_forward<double>(const Tensor<double>&, VoxResModule<double>&, BatchNormMode);

}  // namespace vxr
