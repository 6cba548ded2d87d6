#include "loss.hpp"

#include <cmath>

namespace vxr {
namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool in_l2_term(const std::string& name, bool include_affine) {
    if (ends_with(name, ".w")) return true;
    if (!include_affine) return false;
    return ends_with(name, ".gamma") || ends_with(name, ".beta") || ends_with(name, ".bias");
}

}  // namespace

void LossConfig::validate() const {
    VXR_CHECK_USAGE(lambda >= 0, "lambda must be >= 0");
    VXR_CHECK_USAGE(aux_floor >= 0 && aux_floor <= aux_weight_init,
                    "aux_floor must satisfy 0 <= aux_floor <= aux_weight_init");
    VXR_CHECK_USAGE(aux_decay >= 0 && aux_decay <= 1, "aux_decay must lie in [0, 1]");
    VXR_CHECK_USAGE(decay_interval >= 1, "decay_interval must be >= 1");
}

double aux_weight(const LossConfig& config, std::int64_t iteration) {
    config.validate();
    VXR_CHECK_USAGE(iteration >= 0, "iteration must be >= 0");
    const double steps = static_cast<double>(iteration / config.decay_interval);
    const double w = config.aux_weight_init * std::pow(config.aux_decay, steps);
    return std::max(config.aux_floor, w);
}

template <typename S>
typename Graph<S>::NodeId total_loss(Graph<S>& g, const AuxOutputs<S>& outputs, const LabelBatch& labels,
                                     const LossConfig& config, std::int64_t iteration) {
    config.validate();
    const double w_alpha = aux_weight(config, iteration);

    typename Graph<S>::NodeId loss = Graph<S>::none;
    auto accumulate = [&](typename Graph<S>::NodeId term) {
        loss = loss == Graph<S>::none ? term : g.add(loss, term);
    };

    if (config.lambda > 0) {
        typename Graph<S>::NodeId reg = Graph<S>::none;
        for (const auto& p : g.params()) {
            if (!in_l2_term(p.name, config.l2_include_affine)) continue;
            const auto sq = g.sum_squares(p.node);
            reg = reg == Graph<S>::none ? sq : g.add(reg, sq);
        }
        if (reg != Graph<S>::none) accumulate(g.scale(reg, static_cast<S>(config.lambda)));
    }

    if (w_alpha > 0) {
        for (const auto aux : outputs.aux_logits) {
            accumulate(g.scale(g.softmax_xent_mean(aux, labels), static_cast<S>(w_alpha)));
        }
    }
    accumulate(g.softmax_xent_mean(outputs.final_logits, labels));
    return loss;
}

template Graph<float>::NodeId total_loss<float>(Graph<float>&, const AuxOutputs<float>&, const LabelBatch&,
                                                const LossConfig&, std::int64_t);
template Graph<double>::NodeId total_loss<double>(Graph<double>&, const AuxOutputs<double>&, const LabelBatch&,
                                                  const LossConfig&, std::int64_t);

}  // namespace vxr
