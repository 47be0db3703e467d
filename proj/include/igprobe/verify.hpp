#pragma once
// Acceptance checks shared by `igprobe verify` and the acceptance test binary.
// Each check is self-contained, seeded, and returns a pass/fail row with a
// short measured detail.

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "igprobe/codec.hpp"
#include "igprobe/harness.hpp"
#include "igprobe/integrated_gradients.hpp"
#include "igprobe/linear_model.hpp"
#include "igprobe/provider.hpp"
#include "igprobe/viz.hpp"

namespace igprobe {

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;  // 0 = unbounded
};

struct VerifyOptions {
    std::uint64_t seed = 1;
    std::string mock_provider_command;  // empty: protocol check fails with a message
    unsigned jobs = 1;
};

struct TrendResult {
    std::vector<QualityLevel> qualities;
    std::vector<double> scores;
    double drop = 0.0;            // score(ORIGINAL) - score(q25)
    int inversions = 0;
    double worst_inversion = 0.0;
};

namespace detail {

inline std::string fmt_sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double mx = 0, my = 0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) mx += std::log(xs[i]) / n, my += std::log(ys[i]) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = std::log(xs[i]) - mx;
        sxy += dx * (std::log(ys[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

inline Tensor random_tensor(SeededRng& rng, const Shape& s, double lo, double hi) {
    Tensor t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

/// Scalar loss sum_i coeff * x_i^p on a one-element tensor.
inline GradFn power_oracle(int p) {
    return [p](const Tensor& x, std::size_t) {
        LossGrad lg;
        lg.loss = std::pow(x[0], p);
        lg.grad = Tensor(x.shape(), std::vector<double>{p * std::pow(x[0], p - 1)});
        return lg;
    };
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1. Linear exactness

inline CheckResult check_linear_exactness(const VerifyOptions& opt) {
    CheckResult r{1, "linear exactness", false, {}, 0, 1.0};
    SeededRng rng(opt.seed * 1000 + 1);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Shape s{1 + rng.below(6), 1 + rng.below(6), 3};
        const Tensor w = detail::random_tensor(rng, s, -2.0, 2.0);
        const double b = rng.uniform(-1, 1);
        const Tensor x0 = detail::random_tensor(rng, s, 0.0, 1.0), x1 = detail::random_tensor(rng, s, 0.0, 1.0);
        GradFn f = [&](const Tensor& x, std::size_t) {
            LossGrad lg;
            lg.loss = b;
            for (std::size_t i = 0; i < x.size(); ++i) lg.loss += w[i] * x[i];
            lg.grad = w;
            return lg;
        };
        for (int n : {1, 5, 50})
            for (auto scheme : {Quadrature::riemann_right, Quadrature::trapezoid}) {
                const auto att = integrated_gradients(f, {x0, x1, n, scheme}, 0);
                for (std::size_t i = 0; i < w.size(); ++i)
                    worst = std::max(worst, std::abs(att.values[i] - w[i] * (x1[i] - x0[i])));
            }
    }
    r.passed = worst < 1e-12;
    r.detail = "max |IG_i - w_i dx_i| = " + detail::fmt_sci(worst) + " over 20 losses x 3 N x 2 schemes";
    return r;
}

// ---------------------------------------------------------------------------
// 2. Completeness convergence on polynomial oracles
//
// Quadratic l = x^2 from 0 to 1: the gradient is linear, so the trapezoid
// gap is exactly zero at every N and its log-slope is undefined. The -2 slope
// is measured on the cubic l = x^3, whose trapezoid gap is 1/(2 N^2).

inline CheckResult check_completeness_oracle(const VerifyOptions&) {
    CheckResult r{2, "completeness convergence", false, {}, 0, 1.0};
    const Tensor x0({1}, 0.0), x1({1}, 1.0);
    const auto quad = detail::power_oracle(2), cubic = detail::power_oracle(3);
    const double rie4 = integrated_gradients(quad, {x0, x1, 4, Quadrature::riemann_right}, 0).sum;
    const double trap4 = integrated_gradients(quad, {x0, x1, 4, Quadrature::trapezoid}, 0).sum;
    std::vector<double> ns, rie_gaps, trap_gaps;
    double quad_trap_gap = 0.0;
    for (int n : {4, 8, 16, 32, 64}) {
        ns.push_back(n);
        rie_gaps.push_back(integrated_gradients(quad, {x0, x1, n, Quadrature::riemann_right}, 0).completeness_gap);
        trap_gaps.push_back(integrated_gradients(cubic, {x0, x1, n, Quadrature::trapezoid}, 0).completeness_gap);
        quad_trap_gap = std::max(quad_trap_gap,
                                 integrated_gradients(quad, {x0, x1, n, Quadrature::trapezoid}, 0).completeness_gap);
    }
    const double s_rie = detail::loglog_slope(ns, rie_gaps), s_trap = detail::loglog_slope(ns, trap_gaps);
    r.passed = std::abs(rie4 - 1.25) < 1e-12 && std::abs(trap4 - 1.0) < 1e-12 && std::abs(s_rie + 1.0) <= 0.3 &&
               std::abs(s_trap + 2.0) <= 0.3 && quad_trap_gap < 1e-12;
    r.detail = "riemann N=4 sum " + fixed(rie4, 12) + ", trapezoid N=4 sum " + fixed(trap4, 12) + ", slopes " +
               fixed(s_rie, 3) + " (riemann, x^2) / " + fixed(s_trap, 3) + " (trapezoid, x^3)";
    return r;
}

// ---------------------------------------------------------------------------
// Reference micro-model shared by the completeness and trend checks

inline constexpr std::uint64_t kReferenceSeed = 11;

inline TrainConfig reference_train_config(std::uint64_t seed) { return {1e-3, 30, 16, seed + 3}; }

struct ReferenceSetup {
    std::shared_ptr<const ScorerModel> model;
    Dataset eval;
    SweepOptions pipeline;
};

/// Default micro-model trained on gen_synthetic(seed, 4 x 200, side 32)
/// after the ORIGINAL pipeline (resize to the model input). The evaluation
/// set is drawn independently with seed + 1. Memoised per seed.
inline const ReferenceSetup& reference_setup(std::uint64_t seed, unsigned jobs) {
    static std::mutex mu;
    static std::map<std::uint64_t, std::unique_ptr<ReferenceSetup>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[seed];
    if (slot) return *slot;
    auto ref = std::make_unique<ReferenceSetup>();
    const auto train_ds = gen_synthetic(seed, 4, 200, 32);
    ref->eval = gen_synthetic(seed + 1, 4, 200, 32);
    const ModelConfig mc;
    ref->pipeline.out_h = mc.input_shape[0];
    ref->pipeline.out_w = mc.input_shape[1];
    ref->pipeline.jobs = jobs;
    ref->pipeline.model_name = "micro";
    ref->model = std::make_shared<const ScorerModel>(
        train_on_pipeline(make_scorer(mc, seed + 2), train_ds, reference_train_config(seed), ref->pipeline));
    slot = std::move(ref);
    return *slot;
}

// ---------------------------------------------------------------------------
// 3. Completeness on the reference micro-model
//
// Pairs are ten evenly spaced held-out images: baseline is the ORIGINAL
// pipeline output, target the q=25 pipeline output.

inline CheckResult check_completeness_model(const VerifyOptions& opt) {
    CheckResult r{3, "micro-model completeness", false, {}, 0, 120.0};
    const auto& ref = reference_setup(kReferenceSeed, opt.jobs);
    const auto gradfn = model_gradfn(ref.model);
    std::vector<double> rel(10), gap50(10), gap300(10), delta(10);
    parallel_for(10, opt.jobs, [&](std::size_t t) {
        const auto& s = ref.eval.items[t * ref.eval.size() / 10 + 7];
        const Tensor x0 = prepare_image(s.image, QualityLevel::original(), ref.pipeline).tensor();
        const Tensor x1 = prepare_image(s.image, QualityLevel::jpeg(25), ref.pipeline).tensor();
        const auto a50 = integrated_gradients(gradfn, {x0, x1, 50, Quadrature::trapezoid}, s.label);
        const auto a300 = integrated_gradients(gradfn, {x0, x1, 300, Quadrature::trapezoid}, s.label);
        rel[t] = completeness_report(a50).rel_gap;
        gap50[t] = a50.completeness_gap;
        gap300[t] = a300.completeness_gap;
        delta[t] = std::abs(a50.delta_loss());
    });
    int improved = 0;
    for (std::size_t t = 0; t < 10; ++t) improved += gap300[t] <= gap50[t];
    const double worst = *std::max_element(rel.begin(), rel.end());
    r.passed = worst < 0.02 && improved >= 9;
    r.detail = "max rel_gap(N=50) = " + detail::fmt_sci(worst) + ", gap(300) <= gap(50) in " +
               std::to_string(improved) + "/10, min |delta loss| = " +
               detail::fmt_sci(*std::min_element(delta.begin(), delta.end()));
    return r;
}

// ---------------------------------------------------------------------------
// 4. Gradient check

inline CheckResult check_gradients(const VerifyOptions& opt) {
    CheckResult r{4, "gradient check", false, {}, 0, 60.0};
    double worst = 0.0;
    std::size_t kinks = 0;
    std::vector<double> errs(10);
    std::vector<std::size_t> kink_counts(10);
    parallel_for(10, opt.jobs, [&](std::size_t t) {
        const std::uint64_t seed = opt.seed * 1000 + 400 + t;
        ModelConfig mc;
        mc.input_shape = {16, 16, 3};
        mc.hidden = {32};
        const auto ds = gen_synthetic(seed, 4, 40, 16);
        const auto m = train(make_scorer(mc, seed), ds, {5e-4, 3, 16, seed});
        SeededRng rng(seed);
        const Tensor x = detail::random_tensor(rng, mc.input_shape, 0.0, 1.0);
        const auto rep = gradient_check(m, x, rng.below(4), 1e-5);
        errs[t] = rep.max_rel_err;
        kink_counts[t] = rep.kink_pixels.size();
    });
    for (std::size_t t = 0; t < 10; ++t) worst = std::max(worst, errs[t]), kinks += kink_counts[t];
    r.passed = worst < 1e-5;
    r.detail = "max rel err = " + detail::fmt_sci(worst) + " over 10 models x 768 inputs (" + std::to_string(kinks) +
               " kink inputs excluded)";
    return r;
}

// ---------------------------------------------------------------------------
// 5. Codec identities

inline CheckResult check_codec(const VerifyOptions& opt) {
    CheckResult r{5, "codec identities", false, {}, 0, 5.0};
    SeededRng rng(opt.seed * 1000 + 5);
    double round_trip = 0.0, parseval = 0.0;
    for (int b = 0; b < 200; ++b) {
        Block8 blk{};
        for (double& v : blk) v = rng.uniform(-1.0, 1.0);
        const auto coef = dct8x8(blk);
        const auto back = idct8x8(coef);
        double e_in = 0, e_out = 0;
        for (int i = 0; i < 64; ++i) {
            round_trip = std::max(round_trip, std::abs(back[i] - blk[i]));
            e_in += blk[i] * blk[i];
            e_out += coef[i] * coef[i];
        }
        parseval = std::max(parseval, std::abs(e_in - e_out) / e_in);
    }
    const auto t50 = quant_table(QualityLevel::jpeg(50)), t100 = quant_table(QualityLevel::jpeg(100));
    const bool base_ok = t50.luma == kBaseLuma && t50.chroma == kBaseChroma;
    bool ones = true;
    for (int i = 0; i < 64; ++i) ones = ones && t100.luma[i] == 1 && t100.chroma[i] == 1;
    const auto img = gen_test_image(opt.seed, 64, 64);
    std::vector<double> ps;
    for (int q : {95, 75, 50, 25}) ps.push_back(psnr(img, degrade_jpeg(img, QualityLevel::jpeg(q))));
    const bool ordered = ps[0] >= ps[1] && ps[1] >= ps[2] && ps[2] >= ps[3];
    r.passed = round_trip < 1e-12 && parseval < 1e-12 && base_ok && ones && ordered;
    r.detail = "round-trip " + detail::fmt_sci(round_trip) + ", Parseval " + detail::fmt_sci(parseval) +
               ", tables " + (base_ok && ones ? "ok" : "MISMATCH") + ", PSNR q95/75/50/25 = " + fixed(ps[0], 2) +
               "/" + fixed(ps[1], 2) + "/" + fixed(ps[2], 2) + "/" + fixed(ps[3], 2) + " dB";
    return r;
}

// ---------------------------------------------------------------------------
// 6. Resize identities

inline CheckResult check_resize(const VerifyOptions& opt) {
    CheckResult r{6, "resize identities", false, {}, 0, 5.0};
    SeededRng rng(opt.seed * 1000 + 6);
    bool constant_ok = true;
    for (int t = 0; t < 20; ++t) {
        const double v = rng.uniform(0.0, 1.0);
        const ImageBuf flat(1 + rng.below(20), 1 + rng.below(20), v);
        const auto out = resize_bicubic(flat, 1 + rng.below(40), 1 + rng.below(40));
        for (double p : out.tensor().data()) constant_ok = constant_ok && p == v;
    }
    double same = 0.0;
    for (int t = 0; t < 5; ++t) {
        const ImageBuf img(detail::random_tensor(rng, {4 + rng.below(20), 4 + rng.below(20), 3}, 0.0, 1.0));
        same = std::max(same, max_abs_diff(resize_bicubic(img, img.height(), img.width()).tensor(), img.tensor()));
    }
    double unity = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const auto w = cubic_weights(static_cast<double>(t) / 1000.0 + 0.5 / 1000.0 * (t % 2));
        unity = std::max(unity, std::abs(w[0] + w[1] + w[2] + w[3] - 1.0));
    }
    r.passed = constant_ok && same < 1e-12 && unity < 1e-12;
    r.detail = std::string("constant ") + (constant_ok ? "exact" : "NOT exact") + ", same-size " +
               detail::fmt_sci(same) + ", partition of unity " + detail::fmt_sci(unity) + " over 1000 offsets";
    return r;
}

// ---------------------------------------------------------------------------
// 7. Degradation trend

inline TrendResult degradation_trend(std::uint64_t seed, unsigned jobs) {
    const auto& ref = reference_setup(seed, jobs);
    const auto table = sweep_precision(model_logitfn(ref.model), ref.eval, ref.pipeline);
    TrendResult t;
    t.qualities = table.qualities;
    t.scores = table.rows[0].scores;
    t.drop = t.scores.front() - t.scores.back();
    for (std::size_t k = 1; k < t.scores.size(); ++k)
        if (t.scores[k] > t.scores[k - 1]) {
            ++t.inversions;
            t.worst_inversion = std::max(t.worst_inversion, t.scores[k] - t.scores[k - 1]);
        }
    return t;
}

inline CheckResult check_degradation_trend(const VerifyOptions& opt) {
    CheckResult r{7, "degradation trend", false, {}, 0, 300.0};
    const auto t = degradation_trend(kReferenceSeed, opt.jobs);
    r.passed = t.drop >= 0.05 && t.inversions <= 1 && t.worst_inversion <= 0.02;
    r.detail = "macro precision";
    for (std::size_t k = 0; k < t.scores.size(); ++k) r.detail += " " + t.qualities[k].token() + "=" + fixed(t.scores[k], 4);
    r.detail += ", drop " + fixed(t.drop, 4) + ", inversions " + std::to_string(t.inversions);
    return r;
}

// ---------------------------------------------------------------------------
// 8. Symmetry and polarity bounds

inline CheckResult check_symmetry_polarity(const VerifyOptions& opt) {
    CheckResult r{8, "symmetry and polarity", false, {}, 0, 30.0};
    SeededRng rng(opt.seed * 1000 + 8);
    ModelConfig mc;
    mc.input_shape = {12, 12, 3};
    mc.hidden = {24};
    std::size_t mismatches = 0, compared = 0;
    for (int t = 0; t < 5; ++t) {
        const auto model = std::make_shared<ScorerModel>(make_scorer(mc, opt.seed * 1000 + 80 + t));
        const auto g = model_gradfn(model);
        const Tensor x0 = detail::random_tensor(rng, mc.input_shape, 0, 1), x1 = detail::random_tensor(rng, mc.input_shape, 0, 1);
        const std::size_t k = rng.below(4);
        for (int n : {1, 7, 50}) {
            const auto fwd = integrated_gradients(g, {x0, x1, n, Quadrature::trapezoid}, k);
            const auto rev = integrated_gradients(g, {x1, x0, n, Quadrature::trapezoid}, k);
            for (std::size_t i = 0; i < fwd.values.size(); ++i, ++compared) mismatches += fwd.values[i] != -rev.values[i];
        }
    }
    std::size_t violations = 0;
    for (int t = 0; t < 1000; ++t) {
        AttributionMap m;
        m.values = Tensor({1 + rng.below(9), 1 + rng.below(9), 1 + rng.below(3)});
        const double mag = std::pow(10.0, rng.uniform(-30, 30));
        const int style = t % 4;
        for (std::size_t i = 0; i < m.values.size(); ++i) {
            if (style == 0) continue;  // all zero
            double v = rng.normal() * mag;
            if (style == 2) v = std::abs(v);
            if (style == 3 && rng.uniform() < 0.5) v = 0.0;
            m.values[i] = v;
        }
        const auto p = split_polarity(m);
        for (std::size_t i = 0; i < m.values.size(); ++i) {
            const bool ok = p.negative[i] >= -1.0 && p.negative[i] <= 0.0 && p.positive[i] >= 0.0 &&
                            p.positive[i] <= 1.0 && (p.negative[i] == 0.0 || p.positive[i] == 0.0);
            violations += !ok;
        }
    }
    r.passed = mismatches == 0 && violations == 0;
    r.detail = "swap negation mismatches " + std::to_string(mismatches) + "/" + std::to_string(compared) +
               " (trapezoid), polarity violations " + std::to_string(violations) + " over 1000 maps";
    return r;
}

// ---------------------------------------------------------------------------
// 9. Visualization contract

/// Small end-to-end sweep + attribution emitting every text artifact; used to
/// compare bytes across independent runs.
inline std::string render_artifacts(std::uint64_t seed, unsigned jobs) {
    const auto ds = gen_synthetic(seed, 3, 4, 16);
    ModelConfig mc;
    mc.input_shape = {16, 16, 3};
    mc.hidden = {16};
    mc.num_classes = 3;
    auto model = std::make_shared<ScorerModel>(make_scorer(mc, seed));
    SweepOptions so;
    so.out_h = so.out_w = 16;
    so.jobs = jobs;
    so.model_name = "micro";
    const auto table = sweep_precision(model_logitfn(model), ds, so);
    AttributeOptions ao;
    ao.out_h = ao.out_w = 16;
    ao.jobs = jobs;
    ao.steps = 10;
    const auto res = attribute_batch(model_gradfn(model), ds, ao);
    return emit_table(table, TableFormat::csv) + emit_table(table, TableFormat::markdown) + emit_table_long(table) +
           emit_chart_svg(table) + attribution_csv(res, ao.qualities) + completeness_csv(res);
}

inline CheckResult check_viz(const VerifyOptions& opt) {
    CheckResult r{9, "visualization contract", false, {}, 0, 30.0};
    SeededRng rng(opt.seed * 1000 + 9);
    bool zero_ok = true;
    for (int t = 0; t < 20; ++t) {
        const ImageBuf img(detail::random_tensor(rng, {1 + rng.below(16), 1 + rng.below(16), 3}, 0, 1));
        AttributionMap zero;
        zero.values = Tensor({img.height(), img.width(), 1});
        const auto out = render_overlay(img, split_polarity(zero), {});
        for (std::size_t i = 0; i < out.tensor().size(); ++i) zero_ok = zero_ok && out.tensor()[i] == 0.7 * img.tensor()[i];
    }
    bool bounded = true;
    for (int t = 0; t < 200; ++t) {
        const ImageBuf img(detail::random_tensor(rng, {1 + rng.below(12), 1 + rng.below(12), 3}, 0, 1));
        AttributionMap m;
        m.values = detail::random_tensor(rng, {img.height(), img.width(), 1}, -1, 1);
        for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] *= std::pow(10.0, rng.uniform(-10, 10));
        OverlaySpec spec{rng.uniform(0, 3), rng.uniform(0, 5), static_cast<Polarity>(rng.below(3))};
        const ImageBuf out = render_overlay(img, split_polarity(m), spec);
        for (double v : out.tensor().data()) bounded = bounded && v >= 0.0 && v <= 1.0;
    }
    const auto a = render_artifacts(opt.seed, 1), b = render_artifacts(opt.seed, 1);
    const auto c = render_artifacts(opt.seed, std::max(2u, opt.jobs));
    r.passed = zero_ok && bounded && a == b && a == c;
    r.detail = std::string("zero overlay ") + (zero_ok ? "= 0.7*image" : "MISMATCH") + ", bounds " +
               (bounded ? "ok" : "VIOLATED") + ", artifacts " + (a == b && a == c ? "byte-identical" : "DIFFER") +
               " across runs and job counts (" + std::to_string(a.size()) + " bytes)";
    return r;
}

// ---------------------------------------------------------------------------
// 10. Provider protocol conformance

inline CheckResult check_protocol(const VerifyOptions& opt) {
    CheckResult r{10, "provider protocol", false, {}, 0, 10.0};
    if (opt.mock_provider_command.empty()) {
        r.detail = "no mock provider command configured";
        return r;
    }
    const std::size_t h = 8, w = 8, classes = 4;
    ProviderSpec spec;
    spec.command = opt.mock_provider_command + " --height " + std::to_string(h) + " --width " + std::to_string(w) +
                   " --classes " + std::to_string(classes);
    spec.input_shape = {h, w, 3};
    auto conn = provider_connect(spec);
    const auto local = std::make_shared<AnalyticLinearModel>(Shape{h, w, 3}, classes);
    GradFn local_fn = [local](const Tensor& x, std::size_t k) { return local->evaluate(x, k); };
    SeededRng rng(opt.seed * 1000 + 10);
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
        const Tensor x0 = detail::random_tensor(rng, {h, w, 3}, 0, 1), x1 = detail::random_tensor(rng, {h, w, 3}, 0, 1);
        const std::size_t k = rng.below(classes);
        const auto remote = integrated_gradients(conn.grad, {x0, x1, 50, Quadrature::trapezoid}, k);
        const auto mine = integrated_gradients(local_fn, {x0, x1, 50, Quadrature::trapezoid}, k);
        worst = std::max(worst, max_abs_diff(remote.values, mine.values));
    }
    r.passed = worst < 1e-6;
    r.detail = "max |IG_remote - IG_local| = " + detail::fmt_sci(worst) + " over 5 paths, N=50";
    return r;
}

// ---------------------------------------------------------------------------

struct AcceptanceCheck {
    int id;
    std::function<CheckResult(const VerifyOptions&)> run;
};

inline std::vector<AcceptanceCheck> acceptance_checks() {
    return {{1, check_linear_exactness}, {2, check_completeness_oracle}, {3, check_completeness_model},
            {4, check_gradients},        {5, check_codec},               {6, check_resize},
            {7, check_degradation_trend}, {8, check_symmetry_polarity}, {9, check_viz},
            {10, check_protocol}};
}

/// Runs one check, timing it and turning exceptions or blown budgets into failures.
inline CheckResult run_check(const AcceptanceCheck& c, const VerifyOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
        r = c.run(opt);
    } catch (const std::exception& e) {
        r.id = c.id;
        r.name = "check " + std::to_string(c.id);
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.budget_seconds > 0 && r.seconds > r.budget_seconds) {
        r.passed = false;
        r.detail += " [over time budget " + fixed(r.budget_seconds, 0) + " s]";
    }
    return r;
}

inline std::string format_check(const CheckResult& r) {
    std::ostringstream os;
    os << (r.passed ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << ": " << r.detail << " ("
       << fixed(r.seconds, 2) << " s)";
    return os.str();
}

}  // namespace igprobe
