#ifndef VXR_AUTODIFF_HPP
#define VXR_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kernels.hpp"
#include "tensor.hpp"

namespace vxr {

// Per-voxel class ids for a batch of crops, aligned with logits [N,C,D,H,W].
struct LabelBatch {
    std::int64_t n = 0, d = 0, h = 0, w = 0;
    std::vector<std::uint8_t> ids;

    std::int64_t numel() const { return n * d * h * w; }
};

// Ordered name -> tensor map. Order is creation order, which fixes both the
// checkpoint layout and the update sequence.
template <typename S>
class ParamStore {
public:
    Tensor<S>& add(const std::string& name, Tensor<S> t) {
        VXR_CHECK(index_.find(name) == index_.end(), "duplicate parameter name: " << name);
        index_.emplace(name, items_.size());
        items_.emplace_back(name, std::move(t));
        return items_.back().second;
    }

    Tensor<S>* find(const std::string& name) {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : &items_[it->second].second;
    }

    const Tensor<S>* find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : &items_[it->second].second;
    }

    std::size_t size() const { return items_.size(); }
    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }
    std::pair<std::string, Tensor<S>>& operator[](std::size_t i) { return items_[i]; }
    const std::pair<std::string, Tensor<S>>& operator[](std::size_t i) const { return items_[i]; }

private:
    std::vector<std::pair<std::string, Tensor<S>>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

template <typename S>
struct GradStore {
    std::vector<std::pair<std::string, Tensor<S>>> grads;

    const Tensor<S>* find(const std::string& name) const {
        for (const auto& g : grads) {
            if (g.first == name) return &g.second;
        }
        return nullptr;
    }
};

// Dynamic tape: ops execute eagerly on creation and record a closure that
// routes the output gradient to the inputs. Values stay alive for backward.
template <typename S>
class Graph {
public:
    using NodeId = std::int32_t;
    static constexpr NodeId none = -1;

    NodeId input(Tensor<S> value);
    NodeId param(const std::string& name, const Tensor<S>& value);

    NodeId conv3d(NodeId x, NodeId w, NodeId b, const ConvSpec& spec);  // b may be `none`
    NodeId deconv3d(NodeId x, NodeId w, const ConvSpec& spec);
    NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormMode mode, RunningStats<S>& stats);
    NodeId relu(NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId scale(NodeId x, S c);
    NodeId softmax_channels(NodeId x);
    NodeId crop_spatial(NodeId x, const std::array<std::int64_t, 3>& offset,
                        const std::array<std::int64_t, 3>& extents);
    NodeId sum(NodeId x);
    NodeId sum_squares(NodeId x);
    // Mean over voxels of the per-voxel cross entropy, computed from logits
    // through log-sum-exp.
    NodeId softmax_xent_mean(NodeId logits, const LabelBatch& labels);

    const Tensor<S>& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    std::size_t size() const { return nodes_.size(); }

    struct ParamEntry {
        std::string name;
        NodeId node;
    };
    const std::vector<ParamEntry>& params() const { return params_; }

    GradStore<S> backward(NodeId loss);

private:
    struct Node {
        Tensor<S> value;
        Tensor<S> grad;  // empty until a gradient reaches this node
        bool needs_grad = false;
        std::function<void(Graph&, NodeId)> back;
    };

    NodeId push(Tensor<S> value, bool needs_grad, std::function<void(Graph&, NodeId)> back);
    void accum(NodeId id, const Tensor<S>& g);
    Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
    std::vector<ParamEntry> params_;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0;
    std::int64_t entries_checked = 0;
    std::int64_t entries_below_floor = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double max_rel_err = 0;
    double tolerance = 0;
    bool passed = false;
};

// Central finite differences against the tape gradients, in 64-bit. `build`
// must register every tensor of `params` via Graph::param, reading current
// values from the store, and return a scalar loss node.
// `max_entries_per_param` < 0 checks every entry; otherwise a seeded sample.
// An entry where BOTH the analytic and the FD value fall below
// `min_checkable_grad` is counted but not scored: the difference quotient at
// step h cannot resolve it. A wrongly-zero analytic gradient still fails,
// since the FD side is then above the floor.
GradCheckReport grad_check(ParamStore<double>& params,
                           const std::function<Graph<double>::NodeId(Graph<double>&)>& build, double tolerance,
                           double h = 1e-4, std::int64_t max_entries_per_param = -1,
                           std::uint64_t sample_seed = 12345, double min_checkable_grad = 0.0);

}  // namespace vxr

#endif
