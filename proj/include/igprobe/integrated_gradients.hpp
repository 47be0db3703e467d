#pragma once
// Integrated Gradients along the straight line from a baseline to a target,
// with completeness accounting and polarity splitting for display.
//
// Sign convention: IG_i = (target_i - baseline_i) * mean gradient along the
// path, so that sum_i IG_i approaches loss(target) - loss(baseline).

#include <cmath>
#include <string>
#include <vector>

#include "igprobe/model.hpp"
#include "igprobe/tensor.hpp"

namespace igprobe {

inline constexpr int kDefaultSteps = 50;

enum class Quadrature { riemann_right, trapezoid };

inline const char* to_string(Quadrature q) { return q == Quadrature::trapezoid ? "trapezoid" : "riemann_right"; }

inline Quadrature quadrature_from_string(const std::string& s) {
    if (s == "trapezoid") return Quadrature::trapezoid;
    if (s == "riemann_right" || s == "riemann") return Quadrature::riemann_right;
    throw Error("unknown quadrature scheme '" + s + "'");
}

struct PathSpec {
    Tensor baseline;
    Tensor target;
    int steps = kDefaultSteps;
    Quadrature scheme = Quadrature::trapezoid;

    void validate() const {
        require_same_shape(baseline, target, "path endpoints");
        if (steps < 1) throw Error("path needs at least one step, got " + std::to_string(steps));
    }
};

struct PathPoint {
    double t = 0.0;
    double weight = 0.0;  // quadrature weight; weights sum to 1
    Tensor x;
};

struct AttributionMap {
    Tensor values;
    double sum = 0.0;
    double loss_baseline = 0.0;
    double loss_target = 0.0;
    double completeness_gap = 0.0;

    double delta_loss() const { return loss_target - loss_baseline; }
};

struct CompletenessReport {
    double gap = 0.0;
    double rel_gap = 0.0;
};

struct PolarityMaps {
    Tensor negative;  // in [-1, 0]
    Tensor positive;  // in [0, 1]
    double scale = 1.0;  // max |IG| used as the normaliser (1 for an all-zero map)
};

/// Right-Riemann: t = s/N for s = 1..N, weight 1/N.
/// Trapezoid: t = s/N for s = 0..N, weight 1/N with halved endpoints.
/// Points are ((N-s)/N) * baseline + (s/N) * target, so reversing the path
/// reproduces the same points bit for bit.
inline std::vector<PathPoint> interpolate_path(const PathSpec& spec) {
    spec.validate();
    const int n = spec.steps;
    const bool trap = spec.scheme == Quadrature::trapezoid;
    std::vector<PathPoint> pts;
    for (int s = trap ? 0 : 1; s <= n; ++s) {
        PathPoint p;
        p.t = static_cast<double>(s) / n;
        const double u = static_cast<double>(n - s) / n;
        p.weight = (trap && (s == 0 || s == n)) ? 0.5 / n : 1.0 / n;
        p.x = Tensor(spec.baseline.shape());
        for (std::size_t i = 0; i < p.x.size(); ++i) {
            const double a = spec.baseline[i], b = spec.target[i];
            p.x[i] = a == b ? a : u * a + p.t * b;  // u*a + t*a can miss a by an ulp
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

inline CompletenessReport completeness_report(const AttributionMap& att) {
    return {att.completeness_gap, att.completeness_gap / std::max(std::abs(att.delta_loss()), 1e-12)};
}

inline AttributionMap integrated_gradients(const GradFn& gradfn, const PathSpec& spec, std::size_t label) {
    const auto pts = interpolate_path(spec);
    Tensor avg(spec.baseline.shape());
    double loss_at_0 = NAN, loss_at_1 = NAN;
    auto eval = [&](std::size_t s) {
        LossGrad lg;
        try {
            lg = gradfn(pts[s].x, label);
        } catch (const std::exception& e) {
            throw Error("gradient evaluation failed at path step " + std::to_string(s) + " (t=" +
                        std::to_string(pts[s].t) + "): " + e.what());
        }
        require_same_shape(lg.grad, avg, "gradient");
        if (pts[s].t == 0.0) loss_at_0 = lg.loss;
        if (pts[s].t == 1.0) loss_at_1 = lg.loss;
        return lg.grad;
    };
    // Nodes are combined in mirrored pairs (first+k, last-k) so the reduction
    // order is fixed and symmetric under reversing the path.
    for (std::size_t lo = 0, hi = pts.size() - 1; lo <= hi; ++lo, --hi) {
        const Tensor g_lo = eval(lo);
        if (lo == hi) {
            for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += pts[lo].weight * g_lo[i];
            break;
        }
        const Tensor g_hi = eval(hi);
        if (pts[lo].weight == pts[hi].weight) {
            for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += pts[lo].weight * (g_lo[i] + g_hi[i]);
        } else {
            for (std::size_t i = 0; i < avg.size(); ++i)
                avg[i] += pts[lo].weight * g_lo[i] + pts[hi].weight * g_hi[i];
        }
        if (hi == 0) break;
    }
    auto endpoint_loss = [&](const Tensor& x, const char* which) {
        try {
            return gradfn(x, label).loss;
        } catch (const std::exception& e) {
            throw Error(std::string("gradient evaluation failed at ") + which + ": " + e.what());
        }
    };
    if (std::isnan(loss_at_0)) loss_at_0 = endpoint_loss(spec.baseline, "baseline");
    if (std::isnan(loss_at_1)) loss_at_1 = endpoint_loss(spec.target, "target");

    AttributionMap att;
    att.values = Tensor(spec.baseline.shape());
    for (std::size_t i = 0; i < avg.size(); ++i) att.values[i] = (spec.target[i] - spec.baseline[i]) * avg[i];
    att.sum = sum(att.values);
    att.loss_baseline = loss_at_0;
    att.loss_target = loss_at_1;
    att.completeness_gap = std::abs(att.sum - att.delta_loss());
    return att;
}

/// Scales by 1/max|IG| (1 when all zero) and clips into the two polarity ranges.
inline PolarityMaps split_polarity(const AttributionMap& att) {
    const double mx = max_abs(att.values);
    PolarityMaps p;
    p.scale = mx > 0.0 ? mx : 1.0;
    p.negative = Tensor(att.values.shape());
    p.positive = Tensor(att.values.shape());
    for (std::size_t i = 0; i < att.values.size(); ++i) {
        const double v = std::clamp(att.values[i] / p.scale, -1.0, 1.0);
        p.negative[i] = std::min(v, 0.0);
        p.positive[i] = std::max(v, 0.0);
    }
    return p;
}

struct SensitivityResult {
    double delta_loss = 0.0;
    double ig_sum = 0.0;
    double gap = 0.0;
    bool consistent = true;
};

/// Numerical witness of the sensitivity axiom: when the endpoint losses differ
/// by more than the tolerance, the attribution must not vanish. The tolerance
/// is 1e-12 * max(1, |delta|); the attribution is judged nonzero only when it
/// exceeds that tolerance, and any remaining mismatch is reported as gap.
inline SensitivityResult sensitivity_probe(const GradFn& gradfn, const Tensor& x0, const Tensor& x1,
                                           std::size_t label, int steps,
                                           Quadrature scheme = Quadrature::trapezoid) {
    const auto att = integrated_gradients(gradfn, {x0, x1, steps, scheme}, label);
    SensitivityResult r;
    r.delta_loss = att.delta_loss();
    r.ig_sum = att.sum;
    r.gap = att.completeness_gap;
    const double eps = 1e-12 * std::max(1.0, std::abs(r.delta_loss));
    r.consistent = std::abs(r.delta_loss) <= eps || std::abs(r.ig_sum) > eps;
    return r;
}

}  // namespace igprobe
