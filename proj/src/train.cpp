#include "train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace vxr {

void TrainConfig::validate() const {
    VXR_CHECK_USAGE(crop_size >= 8, "crop_size must be >= 8, got " << crop_size);
    VXR_CHECK_USAGE(crop_size % 8 == 0, "crop_size must be a multiple of 8 to satisfy the padding policy");
    VXR_CHECK_USAGE(batch_size >= 1, "batch_size must be >= 1");
    VXR_CHECK_USAGE(max_iterations >= 1, "max_iterations must be >= 1");
    VXR_CHECK_USAGE(base_lr > 0, "base_lr must be positive");
    VXR_CHECK_USAGE(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
    VXR_CHECK_USAGE(width_scale > 0, "width_scale must be positive");
    loss.validate();
}

TrainConfig TrainConfig::from_keyvalues(const KeyValues& kv) {
    static const std::set<std::string> known{
        "crop_size",     "batch_size",    "max_iterations", "base_lr",       "lr_decay_factor",
        "lr_decay_at",   "momentum",      "seed",           "width_scale",   "lambda",
        "aux_weight_init", "aux_floor",   "aux_decay",      "aux_decay_interval", "checkpoint_interval",
    };
    for (const auto& key : kv.keys()) {
        VXR_CHECK_USAGE(known.count(key) > 0, "unknown config key '" << key << "'");
    }
    TrainConfig c;
    c.crop_size = static_cast<int>(kv.get_int("crop_size", c.crop_size));
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.max_iterations = kv.get_int("max_iterations", c.max_iterations);
    c.base_lr = kv.get_double("base_lr", c.base_lr);
    c.lr_decay_factor = kv.get_double("lr_decay_factor", c.lr_decay_factor);
    if (kv.has("lr_decay_at")) {
        c.lr_decay_at.clear();
        std::istringstream ls(kv.get("lr_decay_at", ""));
        std::string tok;
        while (std::getline(ls, tok, ',')) {
            if (tok.empty()) continue;
            try {
                std::size_t used = 0;
                const double v = std::stod(tok, &used);
                VXR_CHECK_USAGE(used == tok.size(), "");
                c.lr_decay_at.push_back(v);
            } catch (const std::exception&) {
                throw usage_error("config key 'lr_decay_at' has a malformed value '" + tok + "'");
            }
        }
    }
    c.momentum = kv.get_double("momentum", c.momentum);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
    c.width_scale = kv.get_double("width_scale", c.width_scale);
    c.loss.lambda = kv.get_double("lambda", c.loss.lambda);
    c.loss.aux_weight_init = kv.get_double("aux_weight_init", c.loss.aux_weight_init);
    c.loss.aux_floor = kv.get_double("aux_floor", c.loss.aux_floor);
    c.loss.aux_decay = kv.get_double("aux_decay", c.loss.aux_decay);
    // Default decay interval: an eighth of the run, reaching the floor well
    // before the end.
    c.loss.decay_interval = kv.get_int("aux_decay_interval", std::max<std::int64_t>(1, c.max_iterations / 8));
    c.checkpoint_interval = kv.get_int("checkpoint_interval", c.checkpoint_interval);
    c.validate();
    return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    return from_keyvalues(KeyValues::parse_file(path));
}

KeyValues TrainConfig::to_keyvalues() const {
    KeyValues kv;
    char buf[64];
    auto put_d = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        kv.set(key, buf);
    };
    kv.set("crop_size", std::to_string(crop_size));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("max_iterations", std::to_string(max_iterations));
    put_d("base_lr", base_lr);
    put_d("lr_decay_factor", lr_decay_factor);
    std::string decay;
    for (std::size_t i = 0; i < lr_decay_at.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", lr_decay_at[i]);
        if (i > 0) decay += ",";
        decay += buf;
    }
    kv.set("lr_decay_at", decay);
    put_d("momentum", momentum);
    kv.set("seed", std::to_string(seed));
    put_d("width_scale", width_scale);
    put_d("lambda", loss.lambda);
    put_d("aux_weight_init", loss.aux_weight_init);
    put_d("aux_floor", loss.aux_floor);
    put_d("aux_decay", loss.aux_decay);
    kv.set("aux_decay_interval", std::to_string(loss.decay_interval));
    kv.set("checkpoint_interval", std::to_string(checkpoint_interval));
    return kv;
}

std::uint64_t TrainConfig::hash() const { return to_keyvalues().hash(); }

double learning_rate(const TrainConfig& config, std::int64_t iteration) {
    double lr = config.base_lr;
    for (double frac : config.lr_decay_at) {
        if (static_cast<double>(iteration) >= frac * static_cast<double>(config.max_iterations)) {
            lr *= config.lr_decay_factor;
        }
    }
    return lr;
}

std::array<std::int64_t, 3> sample_corner(const std::array<std::int64_t, 3>& extents, int crop, Rng& rng) {
    std::array<std::int64_t, 3> corner;
    for (int i = 0; i < 3; ++i) {
        const std::int64_t room = extents[static_cast<std::size_t>(i)] - crop;
        VXR_CHECK(room >= 0, "crop " << crop << " exceeds extent " << extents[static_cast<std::size_t>(i)]);
        corner[static_cast<std::size_t>(i)] = rng.uniform_below(room + 1);
    }
    return corner;
}

CropSample sample_subvolume(const Volume& vol, const LabelVolume& labels, int crop, Rng& rng) {
    VXR_CHECK_DATA(vol.d == labels.d && vol.h == labels.h && vol.w == labels.w,
                   "volume and labels must share extents");
    const Volume* v = &vol;
    const LabelVolume* l = &labels;
    Volume padded_v;
    LabelVolume padded_l;
    if (vol.d < crop || vol.h < crop || vol.w < crop) {
        std::array<std::int64_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
        const std::array<std::int64_t, 3> ext{vol.d, vol.h, vol.w};
        for (int i = 0; i < 3; ++i) {
            const std::int64_t pad = std::max<std::int64_t>(0, crop - ext[static_cast<std::size_t>(i)]);
            lo[static_cast<std::size_t>(i)] = pad / 2;
            hi[static_cast<std::size_t>(i)] = pad - pad / 2;
        }
        padded_v = reflect_pad_volume(vol, lo, hi);
        padded_l = reflect_pad_labels(labels, lo, hi);
        v = &padded_v;
        l = &padded_l;
    }
    CropSample out;
    out.corner = sample_corner({v->d, v->h, v->w}, crop, rng);
    const std::array<std::int64_t, 3> size{crop, crop, crop};
    out.x = tensor_from_volume(crop_volume(*v, out.corner, size));
    const LabelVolume cl = crop_labels(*l, out.corner, size);
    out.y.n = 1;
    out.y.d = cl.d;
    out.y.h = cl.h;
    out.y.w = cl.w;
    out.y.ids = cl.data;
    return out;
}

void sgd_step(ParamStore<float>& params, const GradStore<float>& grads, double lr, double momentum,
              ParamStore<float>& velocity) {
    VXR_CHECK(params.size() == grads.grads.size(), "parameter/gradient count mismatch");
    const float lrf = static_cast<float>(lr);
    const float mom = static_cast<float>(momentum);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, w] = params[i];
        const auto& [gname, g] = grads.grads[i];
        VXR_CHECK(name == gname, "parameter order mismatch: " << name << " vs " << gname);
        VXR_CHECK(w.same_shape(g), "gradient shape mismatch for " << name);
        Tensor<float>* v = velocity.find(name);
        if (v == nullptr) v = &velocity.add(name, Tensor<float>(w.shape()));
        float* wp = w.data();
        float* vp = v->data();
        const float* gp = g.data();
        const std::int64_t n = w.numel();
        for (std::int64_t j = 0; j < n; ++j) {
            VXR_CHECK_NUMERIC(std::isfinite(gp[j]),
                              "non-finite gradient for parameter '" << name << "' (training halted)");
            vp[j] = mom * vp[j] - lrf * gp[j];
            wp[j] += vp[j];
        }
    }
}

namespace {

void write_store(std::ostream& os, const char* tag, const ParamStore<float>& store) {
    for (const auto& [name, t] : store) {
        os << tag << " " << name;
        os << " " << t.rank();
        for (int i = 0; i < t.rank(); ++i) os << " " << t.dim(i);
        os << "\n";
    }
}

void write_blob(std::ostream& os, const Tensor<float>& t) {
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(sizeof(float) * t.numel()));
}

Tensor<float> read_blob(std::istream& is, const std::vector<std::int64_t>& shape, const std::string& what) {
    Tensor<float> t(shape);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(float) * t.numel()));
    VXR_CHECK_DATA(is.gcount() == static_cast<std::streamsize>(sizeof(float) * t.numel()),
                   "checkpoint truncated while reading " << what);
    return t;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    VXR_CHECK_DATA(os.good(), "cannot open " << path << " for writing");
    os << "VXRCKPT1\n";
    os << "schedule " << ck.spec.schedule_string() << "\n";
    os << "schedule_hash " << ck.spec.schedule_hash() << "\n";
    os << "in_channels " << ck.spec.in_channels << "\n";
    os << "num_classes " << ck.spec.num_classes << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", ck.spec.width_scale);
    os << "width_scale " << buf << "\n";
    os << "iteration " << ck.iteration << "\n";
    os << "config_hash " << ck.config_hash << "\n";
    os << "rng " << ck.rng_state << "\n";
    write_store(os, "param", ck.params.weights);
    for (const auto& [name, st] : ck.params.bn) {
        std::snprintf(buf, sizeof(buf), "%.17g", st.momentum);
        os << "bn " << name << " " << st.mean.dim(0) << " " << (st.initialized ? 1 : 0) << " " << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", st.epsilon);
        os << " " << buf << "\n";
    }
    write_store(os, "velocity", ck.velocity);
    os << "data\n";
    for (const auto& [name, t] : ck.params.weights) write_blob(os, t);
    for (const auto& [name, st] : ck.params.bn) {
        write_blob(os, st.mean);
        write_blob(os, st.var);
    }
    for (const auto& [name, t] : ck.velocity) write_blob(os, t);
    VXR_CHECK_DATA(os.good(), "write failed for " << path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    VXR_CHECK_DATA(is.good(), "cannot open checkpoint " << path);
    std::string line;
    VXR_CHECK_DATA(std::getline(is, line) && line == "VXRCKPT1", path << ": not a checkpoint file");

    Checkpoint ck;
    std::string schedule;
    std::uint64_t schedule_hash = 0;
    int in_channels = 0, num_classes = 0;
    double width_scale = 0;
    struct TensorDecl {
        std::string name;
        std::vector<std::int64_t> shape;
    };
    std::vector<TensorDecl> params_decl, vel_decl;
    struct BnDecl {
        std::string name;
        std::int64_t channels;
        bool initialized;
        double momentum, epsilon;
    };
    std::vector<BnDecl> bn_decl;

    while (std::getline(is, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "schedule") {
            ls >> schedule;
        } else if (key == "schedule_hash") {
            ls >> schedule_hash;
        } else if (key == "in_channels") {
            ls >> in_channels;
        } else if (key == "num_classes") {
            ls >> num_classes;
        } else if (key == "width_scale") {
            ls >> width_scale;
        } else if (key == "iteration") {
            ls >> ck.iteration;
        } else if (key == "config_hash") {
            ls >> ck.config_hash;
        } else if (key == "rng") {
            std::getline(ls, ck.rng_state);
            if (!ck.rng_state.empty() && ck.rng_state.front() == ' ') ck.rng_state.erase(0, 1);
        } else if (key == "param" || key == "velocity") {
            TensorDecl d;
            int rank = 0;
            ls >> d.name >> rank;
            d.shape.resize(static_cast<std::size_t>(rank));
            for (auto& e : d.shape) ls >> e;
            (key == "param" ? params_decl : vel_decl).push_back(std::move(d));
        } else if (key == "bn") {
            BnDecl d;
            int init = 0;
            ls >> d.name >> d.channels >> init >> d.momentum >> d.epsilon;
            d.initialized = init != 0;
            bn_decl.push_back(std::move(d));
        } else {
            VXR_CHECK_DATA(false, path << ": unknown checkpoint key '" << key << "'");
        }
        VXR_CHECK_DATA(!ls.fail(), path << ": malformed checkpoint line '" << line << "'");
    }
    VXR_CHECK_DATA(in_channels > 0 && num_classes > 0, path << ": incomplete checkpoint header");

    ck.spec = build_voxresnet(in_channels, num_classes, width_scale);
    VXR_CHECK_DATA(ck.spec.schedule_string() == schedule && ck.spec.schedule_hash() == schedule_hash,
                   path << ": checkpoint schedule does not match this build");

    for (const auto& d : params_decl) ck.params.weights.add(d.name, read_blob(is, d.shape, d.name));
    for (const auto& d : bn_decl) {
        RunningStats<float> st;
        st.momentum = d.momentum;
        st.epsilon = d.epsilon;
        st.initialized = d.initialized;
        st.mean = read_blob(is, {d.channels}, d.name + ".mean");
        st.var = read_blob(is, {d.channels}, d.name + ".var");
        ck.params.bn.emplace_back(d.name, std::move(st));
    }
    for (const auto& d : vel_decl) ck.velocity.add(d.name, read_blob(is, d.shape, d.name));
    return ck;
}

TrainResult train(const NetworkSpec& spec, const std::vector<TrainCase>& dataset, const TrainConfig& config,
                  const LogSink& log, const Checkpoint* resume, const std::string& checkpoint_path,
                  std::int64_t halt_after) {
    config.validate();
    VXR_CHECK_DATA(!dataset.empty(), "training needs a non-empty dataset");
    for (const auto& c : dataset) {
        VXR_CHECK_DATA(c.stack.channels == spec.in_channels,
                       "case " << c.id << " has " << c.stack.channels << " channels, network expects "
                               << spec.in_channels);
    }

    TrainResult result;
    Rng rng(config.seed);
    std::int64_t start_iter = 0;
    if (resume != nullptr) {
        VXR_CHECK_DATA(resume->spec.schedule_string() == spec.schedule_string(),
                       "resume checkpoint was built for a different schedule");
        VXR_CHECK_DATA(resume->config_hash == config.hash(),
                       "resume checkpoint was produced under a different config");
        result.checkpoint = *resume;
        rng.restore(resume->rng_state);
        start_iter = resume->iteration;
    } else {
        result.checkpoint.spec = spec;
        result.checkpoint.params = init_params<float>(spec, config.seed);
        result.checkpoint.config_hash = config.hash();
    }
    NetworkParams<float>& params = result.checkpoint.params;
    ParamStore<float>& velocity = result.checkpoint.velocity;

    // Pad each case once up front; sample_subvolume then crops in place.
    std::vector<TrainCase> padded;
    padded.reserve(dataset.size());
    for (const auto& c : dataset) {
        std::array<std::int64_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
        const std::array<std::int64_t, 3> ext{c.stack.d, c.stack.h, c.stack.w};
        bool need = false;
        for (int i = 0; i < 3; ++i) {
            const std::int64_t pad = std::max<std::int64_t>(0, config.crop_size - ext[static_cast<std::size_t>(i)]);
            lo[static_cast<std::size_t>(i)] = pad / 2;
            hi[static_cast<std::size_t>(i)] = pad - pad / 2;
            need = need || pad > 0;
        }
        if (need) {
            padded.push_back({c.id, reflect_pad_volume(c.stack, lo, hi), reflect_pad_labels(c.labels, lo, hi)});
        } else {
            padded.push_back(c);
        }
    }

    const std::int64_t crop3 = static_cast<std::int64_t>(config.crop_size) * config.crop_size * config.crop_size;
    for (std::int64_t iter = start_iter; iter < config.max_iterations; ++iter) {
        Tensor<float> batch({config.batch_size, spec.in_channels, config.crop_size, config.crop_size,
                             config.crop_size});
        LabelBatch labels;
        labels.n = config.batch_size;
        labels.d = labels.h = labels.w = config.crop_size;
        labels.ids.resize(static_cast<std::size_t>(config.batch_size * crop3));
        for (int b = 0; b < config.batch_size; ++b) {
            const std::int64_t ci = rng.uniform_below(static_cast<std::int64_t>(padded.size()));
            CropSample s = sample_subvolume(padded[static_cast<std::size_t>(ci)].stack,
                                            padded[static_cast<std::size_t>(ci)].labels, config.crop_size, rng);
            std::copy(s.x.data(), s.x.data() + s.x.numel(), batch.data() + b * s.x.numel());
            std::copy(s.y.ids.begin(), s.y.ids.end(), labels.ids.begin() + static_cast<std::ptrdiff_t>(b * crop3));
        }

        Graph<float> g;
        AuxOutputs<float> out = forward(g, spec, params, batch, BatchNormMode::train);
        const auto loss_node = total_loss(g, out, labels, config.loss, iter);
        const double loss_value = static_cast<double>(g.value(loss_node)[0]);
        VXR_CHECK_NUMERIC(std::isfinite(loss_value), "non-finite training loss at iteration " << iter);
        GradStore<float> grads = g.backward(loss_node);

        const double lr = learning_rate(config, iter);
        sgd_step(params.weights, grads, lr, config.momentum, velocity);

        result.loss_trace.push_back(loss_value);
        if (log) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "iter %lld loss %.6f w_alpha %.6g lr %.6g",
                          static_cast<long long>(iter), loss_value, aux_weight(config.loss, iter), lr);
            log(buf);
        }

        result.checkpoint.iteration = iter + 1;
        result.checkpoint.rng_state = rng.state();
        if (!checkpoint_path.empty() && config.checkpoint_interval > 0 &&
            (iter + 1) % config.checkpoint_interval == 0 && iter + 1 < config.max_iterations) {
            save_checkpoint(result.checkpoint, checkpoint_path);
        }
        if (halt_after > 0 && iter + 1 - start_iter >= halt_after && iter + 1 < config.max_iterations) {
            break;
        }
    }
    if (!checkpoint_path.empty()) save_checkpoint(result.checkpoint, checkpoint_path);
    return result;
}

}  // namespace vxr
