#include "autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "rng.hpp"

namespace vxr {

template <typename S>
typename Graph<S>::NodeId Graph<S>::push(Tensor<S> value, bool needs_grad,
                                         std::function<void(Graph&, NodeId)> back) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename S>
void Graph<S>::accum(NodeId id, const Tensor<S>& g) {
    Node& n = node(id);
    if (!n.needs_grad) return;
    if (n.grad.numel() == 0) {
        n.grad = g;
        return;
    }
    VXR_CHECK(n.grad.same_shape(g), "gradient shape mismatch during accumulation");
    S* dst = n.grad.data();
    const S* src = g.data();
    const std::int64_t m = g.numel();
    for (std::int64_t i = 0; i < m; ++i) dst[i] += src[i];
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::input(Tensor<S> value) {
    return push(std::move(value), false, nullptr);
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::param(const std::string& name, const Tensor<S>& value) {
    NodeId id = push(value, true, nullptr);
    params_.push_back({name, id});
    return id;
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::conv3d(NodeId x, NodeId w, NodeId b, const ConvSpec& spec) {
    const Tensor<S>* bias = b == none ? nullptr : &value(b);
    Tensor<S> out = vxr::conv3d(value(x), value(w), bias, spec);
    const bool ng = node(x).needs_grad || node(w).needs_grad || (b != none && node(b).needs_grad);
    std::array<std::int64_t, 3> in_ext = {value(x).dim(2), value(x).dim(3), value(x).dim(4)};
    return push(std::move(out), ng, [x, w, b, spec, in_ext](Graph& g, NodeId self) {
        const Tensor<S>& go = g.node(self).grad;
        if (g.node(x).needs_grad) {
            g.accum(x, deconv3d_to(go, g.value(w), spec, in_ext));
        }
        if (g.node(w).needs_grad) {
            g.accum(w, conv3d_weight_grad(go, g.value(x), spec, g.value(w).shape()));
        }
        if (b != none && g.node(b).needs_grad) {
            g.accum(b, conv3d_bias_grad(go));
        }
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::deconv3d(NodeId x, NodeId w, const ConvSpec& spec) {
    Tensor<S> out = vxr::deconv3d(value(x), value(w), spec);
    const bool ng = node(x).needs_grad || node(w).needs_grad;
    return push(std::move(out), ng, [x, w, spec](Graph& g, NodeId self) {
        const Tensor<S>& go = g.node(self).grad;
        if (g.node(x).needs_grad) {
            g.accum(x, vxr::conv3d<S>(go, g.value(w), nullptr, spec));
        }
        if (g.node(w).needs_grad) {
            g.accum(w, conv3d_weight_grad(g.value(x), go, spec, g.value(w).shape()));
        }
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormMode mode,
                                              RunningStats<S>& stats) {
    auto xhat = std::make_shared<Tensor<S>>();
    auto invstd = std::make_shared<Tensor<S>>();
    Tensor<S> out = vxr::batchnorm(value(x), value(gamma), value(beta), mode, stats, xhat.get(), invstd.get());
    const bool ng = node(x).needs_grad || node(gamma).needs_grad || node(beta).needs_grad;
    return push(std::move(out), ng, [x, gamma, beta, mode, xhat, invstd](Graph& g, NodeId self) {
        const Tensor<S>& go = g.node(self).grad;
        const Tensor<S>& xh = *xhat;
        const std::int64_t N = go.dim(0), C = go.dim(1);
        std::int64_t spatial = 1;
        for (int i = 2; i < go.rank(); ++i) spatial *= go.dim(i);
        const std::int64_t m = N * spatial;

        Tensor<S> dgamma({C}), dbeta({C});
        for (std::int64_t c = 0; c < C; ++c) {
            double sg = 0, sb = 0;
            for (std::int64_t n = 0; n < N; ++n) {
                const S* grow = go.data() + (n * C + c) * spatial;
                const S* xrow = xh.data() + (n * C + c) * spatial;
                for (std::int64_t i = 0; i < spatial; ++i) {
                    sg += static_cast<double>(grow[i]) * static_cast<double>(xrow[i]);
                    sb += static_cast<double>(grow[i]);
                }
            }
            dgamma[c] = static_cast<S>(sg);
            dbeta[c] = static_cast<S>(sb);
        }
        if (g.node(gamma).needs_grad) g.accum(gamma, dgamma);
        if (g.node(beta).needs_grad) g.accum(beta, dbeta);
        if (!g.node(x).needs_grad) return;

        Tensor<S> dx(go.shape());
        const Tensor<S>& gam = g.value(gamma);
        for (std::int64_t c = 0; c < C; ++c) {
            const S a = gam[c] * (*invstd)[c];
            if (mode == BatchNormMode::train) {
                // Differentiates through the batch statistics.
                const S mean_dy = static_cast<S>(static_cast<double>(dbeta[c]) / static_cast<double>(m));
                const S mean_dy_xhat = static_cast<S>(static_cast<double>(dgamma[c]) / static_cast<double>(m));
                for (std::int64_t n = 0; n < N; ++n) {
                    const S* grow = go.data() + (n * C + c) * spatial;
                    const S* xrow = xh.data() + (n * C + c) * spatial;
                    S* drow = dx.data() + (n * C + c) * spatial;
                    for (std::int64_t i = 0; i < spatial; ++i) {
                        drow[i] = a * (grow[i] - mean_dy - xrow[i] * mean_dy_xhat);
                    }
                }
            } else {
                for (std::int64_t n = 0; n < N; ++n) {
                    const S* grow = go.data() + (n * C + c) * spatial;
                    S* drow = dx.data() + (n * C + c) * spatial;
                    for (std::int64_t i = 0; i < spatial; ++i) drow[i] = a * grow[i];
                }
            }
        }
        g.accum(x, dx);
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::relu(NodeId x) {
    Tensor<S> out = vxr::relu(value(x));
    return push(std::move(out), node(x).needs_grad, [x](Graph& g, NodeId self) {
        if (!g.node(x).needs_grad) return;
        const Tensor<S>& go = g.node(self).grad;
        const Tensor<S>& xv = g.value(x);
        Tensor<S> dx(go.shape());
        const std::int64_t n = go.numel();
        // Subgradient at 0 is 0.
        for (std::int64_t i = 0; i < n; ++i) dx[i] = xv[i] > S(0) ? go[i] : S(0);
        g.accum(x, dx);
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::add(NodeId a, NodeId b) {
    Tensor<S> out = vxr::add(value(a), value(b));
    const bool ng = node(a).needs_grad || node(b).needs_grad;
    return push(std::move(out), ng, [a, b](Graph& g, NodeId self) {
        const Tensor<S>& go = g.node(self).grad;
        g.accum(a, go);
        g.accum(b, go);
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::scale(NodeId x, S c) {
    Tensor<S> out = vxr::scale(value(x), c);
    return push(std::move(out), node(x).needs_grad, [x, c](Graph& g, NodeId self) {
        if (!g.node(x).needs_grad) return;
        g.accum(x, vxr::scale(g.node(self).grad, c));
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::softmax_channels(NodeId x) {
    Tensor<S> out = vxr::softmax_channels(value(x));
    auto probs = std::make_shared<Tensor<S>>(out);
    return push(std::move(out), node(x).needs_grad, [x, probs](Graph& g, NodeId self) {
        if (!g.node(x).needs_grad) return;
        const Tensor<S>& go = g.node(self).grad;
        const Tensor<S>& p = *probs;
        const std::int64_t N = p.dim(0), C = p.dim(1);
        std::int64_t spatial = 1;
        for (int i = 2; i < p.rank(); ++i) spatial *= p.dim(i);
        Tensor<S> dx(p.shape());
        for (std::int64_t n = 0; n < N; ++n) {
            const std::int64_t base = n * C * spatial;
            for (std::int64_t v = 0; v < spatial; ++v) {
                S dot = 0;
                for (std::int64_t c = 0; c < C; ++c) dot += go[base + c * spatial + v] * p[base + c * spatial + v];
                for (std::int64_t c = 0; c < C; ++c) {
                    const std::int64_t idx = base + c * spatial + v;
                    dx[idx] = p[idx] * (go[idx] - dot);
                }
            }
        }
        g.accum(x, dx);
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::crop_spatial(NodeId x, const std::array<std::int64_t, 3>& offset,
                                                 const std::array<std::int64_t, 3>& extents) {
    Tensor<S> out = crop3d(value(x), offset, extents);
    std::array<std::int64_t, 3> full = {value(x).dim(2), value(x).dim(3), value(x).dim(4)};
    return push(std::move(out), node(x).needs_grad, [x, offset, full](Graph& g, NodeId self) {
        if (!g.node(x).needs_grad) return;
        g.accum(x, zero_embed3d(g.node(self).grad, offset, full));
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::sum(NodeId x) {
    double acc = 0;
    const Tensor<S>& xv = value(x);
    for (std::int64_t i = 0; i < xv.numel(); ++i) acc += static_cast<double>(xv[i]);
    return push(Tensor<S>::scalar(static_cast<S>(acc)), node(x).needs_grad, [x](Graph& g, NodeId self) {
        if (!g.node(x).needs_grad) return;
        const S gs = g.node(self).grad[0];
        g.accum(x, Tensor<S>::full(g.value(x).shape(), gs));
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::sum_squares(NodeId x) {
    double acc = 0;
    const Tensor<S>& xv = value(x);
    for (std::int64_t i = 0; i < xv.numel(); ++i) {
        acc += static_cast<double>(xv[i]) * static_cast<double>(xv[i]);
    }
    return push(Tensor<S>::scalar(static_cast<S>(acc)), node(x).needs_grad, [x](Graph& g, NodeId self) {
        if (!g.node(x).needs_grad) return;
        const S gs = g.node(self).grad[0];
        const Tensor<S>& xv = g.value(x);
        Tensor<S> dx(xv.shape());
        for (std::int64_t i = 0; i < xv.numel(); ++i) dx[i] = S(2) * xv[i] * gs;
        g.accum(x, dx);
    });
}

template <typename S>
typename Graph<S>::NodeId Graph<S>::softmax_xent_mean(NodeId logits, const LabelBatch& labels) {
    const Tensor<S>& lv = value(logits);
    VXR_CHECK(lv.rank() == 5, "cross entropy expects logits of rank 5");
    const std::int64_t N = lv.dim(0), C = lv.dim(1);
    const std::int64_t spatial = lv.dim(2) * lv.dim(3) * lv.dim(4);
    VXR_CHECK(labels.n == N && labels.d == lv.dim(2) && labels.h == lv.dim(3) && labels.w == lv.dim(4),
              "label volume shape does not match logits spatial shape");
    VXR_CHECK(static_cast<std::int64_t>(labels.ids.size()) == N * spatial, "label storage size mismatch");

    auto probs = std::make_shared<Tensor<S>>(vxr::softmax_channels(lv));
    double total = 0;
    for (std::int64_t n = 0; n < N; ++n) {
        const std::int64_t base = n * C * spatial;
        for (std::int64_t v = 0; v < spatial; ++v) {
            const std::uint8_t y = labels.ids[static_cast<std::size_t>(n * spatial + v)];
            VXR_CHECK_DATA(y < C, "label value " << static_cast<int>(y) << " out of range [0, " << C << ")");
            S mx = lv[base + v];
            for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, lv[base + c * spatial + v]);
            double se = 0;
            for (std::int64_t c = 0; c < C; ++c) se += std::exp(static_cast<double>(lv[base + c * spatial + v] - mx));
            const double lse = static_cast<double>(mx) + std::log(se);
            total += lse - static_cast<double>(lv[base + y * spatial + v]);
        }
    }
    const double mean = total / static_cast<double>(N * spatial);
    auto lab = std::make_shared<LabelBatch>(labels);
    return push(Tensor<S>::scalar(static_cast<S>(mean)), node(logits).needs_grad,
                [logits, probs, lab](Graph& g, NodeId self) {
                    if (!g.node(logits).needs_grad) return;
                    const S gs = g.node(self).grad[0];
                    const Tensor<S>& p = *probs;
                    const std::int64_t N = p.dim(0), C = p.dim(1);
                    const std::int64_t spatial = p.dim(2) * p.dim(3) * p.dim(4);
                    const S inv = gs / static_cast<S>(N * spatial);
                    Tensor<S> dx(p.shape());
                    for (std::int64_t n = 0; n < N; ++n) {
                        const std::int64_t base = n * C * spatial;
                        for (std::int64_t v = 0; v < spatial; ++v) {
                            const std::uint8_t y = lab->ids[static_cast<std::size_t>(n * spatial + v)];
                            for (std::int64_t c = 0; c < C; ++c) {
                                const std::int64_t idx = base + c * spatial + v;
                                dx[idx] = (p[idx] - (c == y ? S(1) : S(0))) * inv;
                            }
                        }
                    }
                    g.accum(logits, dx);
                });
}

template <typename S>
GradStore<S> Graph<S>::backward(NodeId loss) {
    VXR_CHECK(loss >= 0 && static_cast<std::size_t>(loss) < nodes_.size(), "invalid loss node");
    VXR_CHECK(node(loss).value.numel() == 1, "backward requires a scalar loss node, got "
                                                 << node(loss).value.numel() << " elements");
    node(loss).grad = Tensor<S>::full(node(loss).value.shape(), S(1));
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = node(id);
        if (n.grad.numel() == 0 || !n.back) continue;
        n.back(*this, id);
    }
    GradStore<S> out;
    out.grads.reserve(params_.size());
    for (const auto& p : params_) {
        Node& n = node(p.node);
        if (n.grad.numel() == 0) {
            out.grads.emplace_back(p.name, Tensor<S>(n.value.shape()));
        } else {
            out.grads.emplace_back(p.name, n.grad);
        }
    }
    return out;
}

template class Graph<float>;
template class Graph<double>;

GradCheckReport grad_check(ParamStore<double>& params,
                           const std::function<Graph<double>::NodeId(Graph<double>&)>& build, double tolerance,
                           double h, std::int64_t max_entries_per_param, std::uint64_t sample_seed,
                           double min_checkable_grad) {
    GradCheckReport report;
    report.tolerance = tolerance;

    Graph<double> g;
    const auto loss = build(g);
    GradStore<double> analytic = g.backward(loss);

    const auto eval = [&]() {
        Graph<double> fg;
        const auto l = build(fg);
        return static_cast<double>(fg.value(l)[0]);
    };

    Rng rng(sample_seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& [name, tensor] = params[pi];
        const Tensor<double>* ga = analytic.find(name);
        VXR_CHECK(ga != nullptr, "grad_check: builder did not register parameter " << name);

        std::vector<std::int64_t> entries;
        const std::int64_t n = tensor.numel();
        if (max_entries_per_param < 0 || n <= max_entries_per_param) {
            entries.resize(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) entries[static_cast<std::size_t>(i)] = i;
        } else {
            std::vector<bool> taken(static_cast<std::size_t>(n), false);
            while (static_cast<std::int64_t>(entries.size()) < max_entries_per_param) {
                const std::int64_t i = rng.uniform_below(n);
                if (!taken[static_cast<std::size_t>(i)]) {
                    taken[static_cast<std::size_t>(i)] = true;
                    entries.push_back(i);
                }
            }
        }

        GradCheckEntry e;
        e.name = name;
        e.entries_checked = static_cast<std::int64_t>(entries.size());
        for (const std::int64_t i : entries) {
            const double old = tensor[i];
            tensor[i] = old + h;
            const double lp = eval();
            tensor[i] = old - h;
            const double lm = eval();
            tensor[i] = old;
            const double gfd = (lp - lm) / (2.0 * h);
            const double gan = (*ga)[i];
            if (std::max(std::abs(gan), std::abs(gfd)) < min_checkable_grad) {
                ++e.entries_below_floor;
                continue;
            }
            const double rel = std::abs(gan - gfd) / std::max({std::abs(gan), std::abs(gfd), 1e-8});
            e.max_rel_err = std::max(e.max_rel_err, rel);
        }
        report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
        report.per_param.push_back(std::move(e));
    }
    report.passed = report.max_rel_err < tolerance;
    return report;
}

}  // namespace vxr
