#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "parallel.hpp"

namespace vxr {

std::int64_t BinaryMask::count() const {
    std::int64_t n = 0;
    for (auto v : m) n += v != 0;
    return n;
}

BinaryMask BinaryMask::from_labels(const LabelVolume& labels, int cls) {
    BinaryMask out;
    out.d = labels.d;
    out.h = labels.h;
    out.w = labels.w;
    out.m.resize(labels.data.size());
    for (std::size_t i = 0; i < labels.data.size(); ++i) out.m[i] = labels.data[i] == cls ? 1 : 0;
    return out;
}

std::vector<std::array<std::int64_t, 3>> boundary_voxels(const BinaryMask& mask) {
    std::vector<std::array<std::int64_t, 3>> out;
    const auto inside = [&](std::int64_t z, std::int64_t y, std::int64_t x) {
        if (z < 0 || z >= mask.d || y < 0 || y >= mask.h || x < 0 || x >= mask.w) return false;
        return mask.m[static_cast<std::size_t>((z * mask.h + y) * mask.w + x)] != 0;
    };
    for (std::int64_t z = 0; z < mask.d; ++z)
        for (std::int64_t y = 0; y < mask.h; ++y)
            for (std::int64_t x = 0; x < mask.w; ++x) {
                if (!inside(z, y, x)) continue;
                if (!inside(z - 1, y, x) || !inside(z + 1, y, x) || !inside(z, y - 1, x) ||
                    !inside(z, y + 1, x) || !inside(z, y, x - 1) || !inside(z, y, x + 1)) {
                    out.push_back({z, y, x});
                }
            }
    return out;
}

double dice_percent(const BinaryMask& seg, const BinaryMask& ref) {
    VXR_CHECK_DATA(seg.d == ref.d && seg.h == ref.h && seg.w == ref.w,
                   "dice requires equal extents, got " << seg.d << "x" << seg.h << "x" << seg.w << " vs " << ref.d
                                                       << "x" << ref.h << "x" << ref.w);
    std::int64_t a = 0, b = 0, inter = 0;
    for (std::size_t i = 0; i < seg.m.size(); ++i) {
        a += seg.m[i] != 0;
        b += ref.m[i] != 0;
        inter += (seg.m[i] != 0 && ref.m[i] != 0);
    }
    if (a + b == 0) return 100.0;
    return 100.0 * 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

double avd_percent(const BinaryMask& seg, const BinaryMask& ref) {
    VXR_CHECK_DATA(seg.d == ref.d && seg.h == ref.h && seg.w == ref.w, "avd requires equal extents");
    const std::int64_t a = seg.count();
    const std::int64_t b = ref.count();
    VXR_CHECK_DATA(b > 0, "avd is undefined for an empty reference mask");
    return 100.0 * static_cast<double>(std::llabs(a - b)) / static_cast<double>(b);
}

namespace {

// Points are stored with spacing already multiplied in; for voxel indices
// below 2^20 and float-derived spacings those products are exact in double,
// so the distances here match a direct (index-difference * spacing) oracle
// bit for bit.
struct KdTree {
    struct Node {
        double split = 0;
        int axis = -1;  // -1 marks a leaf
        std::int32_t begin = 0, end = 0;
        std::int32_t left = -1, right = -1;
    };
    std::vector<std::array<double, 3>> pts;
    std::vector<Node> nodes;

    static KdTree build(std::vector<std::array<double, 3>> points) {
        KdTree t;
        t.pts = std::move(points);
        t.nodes.reserve(t.pts.size() / 8 + 1);
        t.build_node(0, static_cast<std::int32_t>(t.pts.size()));
        return t;
    }

    std::int32_t build_node(std::int32_t begin, std::int32_t end) {
        const std::int32_t id = static_cast<std::int32_t>(nodes.size());
        nodes.push_back({});
        if (end - begin <= 24) {
            nodes[static_cast<std::size_t>(id)].begin = begin;
            nodes[static_cast<std::size_t>(id)].end = end;
            return id;
        }
        std::array<double, 3> lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
        for (std::int32_t i = begin; i < end; ++i) {
            for (int a = 0; a < 3; ++a) {
                lo[static_cast<std::size_t>(a)] = std::min(lo[static_cast<std::size_t>(a)],
                                                           pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]);
                hi[static_cast<std::size_t>(a)] = std::max(hi[static_cast<std::size_t>(a)],
                                                           pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]);
            }
        }
        int axis = 0;
        for (int a = 1; a < 3; ++a) {
            if (hi[static_cast<std::size_t>(a)] - lo[static_cast<std::size_t>(a)] >
                hi[static_cast<std::size_t>(axis)] - lo[static_cast<std::size_t>(axis)])
                axis = a;
        }
        const std::int32_t mid = (begin + end) / 2;
        std::nth_element(pts.begin() + begin, pts.begin() + mid, pts.begin() + end,
                         [axis](const auto& a, const auto& b) {
                             return a[static_cast<std::size_t>(axis)] < b[static_cast<std::size_t>(axis)];
                         });
        const double split = pts[static_cast<std::size_t>(mid)][static_cast<std::size_t>(axis)];
        const std::int32_t left = build_node(begin, mid);
        const std::int32_t right = build_node(mid, end);
        Node& n = nodes[static_cast<std::size_t>(id)];
        n.axis = axis;
        n.split = split;
        n.left = left;
        n.right = right;
        return id;
    }

    double nearest_sq(const std::array<double, 3>& q) const {
        double best = 1e300;
        search(0, q, best);
        return best;
    }

private:
    void search(std::int32_t id, const std::array<double, 3>& q, double& best) const {
        const Node& n = nodes[static_cast<std::size_t>(id)];
        if (n.axis < 0) {
            for (std::int32_t i = n.begin; i < n.end; ++i) {
                const auto& p = pts[static_cast<std::size_t>(i)];
                const double dz = q[0] - p[0];
                const double dy = q[1] - p[1];
                const double dx = q[2] - p[2];
                const double d2 = dz * dz + dy * dy + dx * dx;
                best = std::min(best, d2);
            }
            return;
        }
        const double delta = q[static_cast<std::size_t>(n.axis)] - n.split;
        const std::int32_t near = delta < 0 ? n.left : n.right;
        const std::int32_t far = delta < 0 ? n.right : n.left;
        search(near, q, best);
        // Conservative margin so a float-rounded plane distance can never
        // prune the true nearest point.
        if (delta * delta <= best * (1.0 + 1e-12) + 1e-300) search(far, q, best);
    }
};

std::vector<double> directed_distances(const std::vector<std::array<std::int64_t, 3>>& from,
                                       const std::vector<std::array<std::int64_t, 3>>& to,
                                       const std::array<double, 3>& spacing) {
    std::vector<std::array<double, 3>> pts(to.size());
    for (std::size_t i = 0; i < to.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            pts[i][static_cast<std::size_t>(a)] =
                static_cast<double>(to[i][static_cast<std::size_t>(a)]) * spacing[static_cast<std::size_t>(a)];
        }
    }
    const KdTree tree = KdTree::build(std::move(pts));
    std::vector<double> out(from.size());
    parallel_for(static_cast<std::int64_t>(from.size()), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            std::array<double, 3> q;
            for (int a = 0; a < 3; ++a) {
                q[static_cast<std::size_t>(a)] =
                    static_cast<double>(from[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]) *
                    spacing[static_cast<std::size_t>(a)];
            }
            out[static_cast<std::size_t>(i)] = std::sqrt(tree.nearest_sq(q));
        }
    });
    return out;
}

double percentile95(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double pos = 0.95 * static_cast<double>(n - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= n) return values[n - 1];
    const double frac = pos - static_cast<double>(i);
    return values[i] + frac * (values[i + 1] - values[i]);
}

}  // namespace

double hd95_mm(const BinaryMask& seg, const BinaryMask& ref, const std::array<double, 3>& spacing_mm) {
    VXR_CHECK_DATA(seg.d == ref.d && seg.h == ref.h && seg.w == ref.w, "hd95 requires equal extents");
    VXR_CHECK_DATA(seg.count() > 0 && ref.count() > 0, "hd95 is undefined for an empty mask");
    const auto ba = boundary_voxels(seg);
    const auto bb = boundary_voxels(ref);
    const double fwd = percentile95(directed_distances(ba, bb, spacing_mm));
    const double bwd = percentile95(directed_distances(bb, ba, spacing_mm));
    return std::max(fwd, bwd);
}

MetricsReport evaluate_case(const LabelVolume& pred, const LabelVolume& truth,
                            const std::array<double, 3>& spacing_mm) {
    VXR_CHECK_DATA(pred.d == truth.d && pred.h == truth.h && pred.w == truth.w,
                   "evaluation requires equal extents, got " << pred.d << "x" << pred.h << "x" << pred.w << " vs "
                                                             << truth.d << "x" << truth.h << "x" << truth.w);
    MetricsReport report;
    double dc_sum = 0;
    double hd_sum = 0, avd_sum = 0;
    int hd_n = 0, avd_n = 0;
    for (int cls = 1; cls <= 3; ++cls) {
        ClassMetrics cm;
        const auto a = BinaryMask::from_labels(pred, cls);
        const auto b = BinaryMask::from_labels(truth, cls);
        cm.in_pred = a.count() > 0;
        cm.in_truth = b.count() > 0;
        cm.dc = dice_percent(a, b);
        if (cm.in_pred && cm.in_truth) {
            cm.hd95_mm = hd95_mm(a, b, spacing_mm);
        }
        if (cm.in_truth) {
            cm.avd = avd_percent(a, b);
        }
        dc_sum += cm.dc;
        if (cm.hd95_mm) {
            hd_sum += *cm.hd95_mm;
            ++hd_n;
        }
        if (cm.avd) {
            avd_sum += *cm.avd;
            ++avd_n;
        }
        report.tissue[static_cast<std::size_t>(cls - 1)] = cm;
    }
    report.macro_dc = dc_sum / 3.0;
    if (hd_n > 0) report.macro_hd95 = hd_sum / hd_n;
    if (avd_n > 0) report.macro_avd = avd_sum / avd_n;
    return report;
}

namespace {

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "undef";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

}  // namespace

std::string metrics_table(const MetricsReport& report) {
    std::ostringstream os;
    os << "tissue      DC(%)     HD95(mm)  AVD(%)\n";
    for (int i = 0; i < 3; ++i) {
        const auto& cm = report.tissue[static_cast<std::size_t>(i)];
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-10s %-9.4f %-9s %-9s\n", MetricsReport::kClassNames[i], cm.dc,
                      fmt_opt(cm.hd95_mm).c_str(), fmt_opt(cm.avd).c_str());
        os << buf;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-10s %-9.4f %-9s %-9s\n", "macro", report.macro_dc,
                  fmt_opt(report.macro_hd95).c_str(), fmt_opt(report.macro_avd).c_str());
    os << buf;
    return os.str();
}

std::string metrics_keyvals(const MetricsReport& report) {
    std::ostringstream os;
    for (int i = 0; i < 3; ++i) {
        const auto& cm = report.tissue[static_cast<std::size_t>(i)];
        const std::string cls = MetricsReport::kClassNames[i];
        os << cls << ".dc " << cm.dc << "\n";
        os << cls << ".hd95_mm " << fmt_opt(cm.hd95_mm) << "\n";
        os << cls << ".avd " << fmt_opt(cm.avd) << "\n";
    }
    os << "macro.dc " << report.macro_dc << "\n";
    os << "macro.hd95_mm " << fmt_opt(report.macro_hd95) << "\n";
    os << "macro.avd " << fmt_opt(report.macro_avd) << "\n";
    return os.str();
}

}  // namespace vxr
