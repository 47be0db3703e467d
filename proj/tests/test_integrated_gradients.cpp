#include <gtest/gtest.h>

#include "igprobe/codec.hpp"
#include "igprobe/harness.hpp"
#include "igprobe/integrated_gradients.hpp"

using namespace igprobe;

namespace {

Tensor scalar(double v) { return Tensor({1, 1, 1}, v); }

GradFn square_loss() {
    return [](const Tensor& x, std::size_t) {
        LossGrad lg;
        lg.loss = x[0] * x[0];
        lg.grad = Tensor(x.shape(), 2.0 * x[0]);
        return lg;
    };
}

GradFn smooth_model_fn(std::uint64_t seed, Shape in) {
    SeededRng rng(seed);
    auto m = std::make_shared<ScorerModel>();
    m->input_shape = in;
    m->layers.push_back({rng_normal(rng, {shape_numel(in), 6}), rng_normal(rng, {6}), Activation::identity});
    m->class_embeddings = make_class_embeddings(rng, 3, 6);
    m->temperature = 5.0;
    m->validate();
    return model_gradfn(m);
}

std::shared_ptr<const ScorerModel> trained_micro() {
    static const auto model = [] {
        ModelConfig mc;
        mc.input_shape = {16, 16, 3};
        mc.hidden = {32};
        const auto ds = gen_synthetic(3, 4, 40, 16);
        return std::make_shared<const ScorerModel>(train(make_scorer(mc, 3), ds, {5e-4, 10, 16, 3}));
    }();
    return model;
}

}  // namespace

TEST(InterpolatePath, DegeneratePath) {
    SeededRng rng(1);
    const auto x = rng_uniform(rng, {2, 3, 3});
    for (auto scheme : {Quadrature::riemann_right, Quadrature::trapezoid})
        for (const auto& p : interpolate_path({x, x, 7, scheme})) EXPECT_EQ(p.x, x);
}

TEST(InterpolatePath, RiemannNodes) {
    const auto pts = interpolate_path({scalar(0), scalar(1), 4, Quadrature::riemann_right});
    ASSERT_EQ(pts.size(), 4u);
    const double expect[] = {0.25, 0.5, 0.75, 1.0};
    for (int s = 0; s < 4; ++s) {
        EXPECT_EQ(pts[s].x[0], expect[s]);
        EXPECT_EQ(pts[s].weight, 0.25);
    }
}

TEST(InterpolatePath, TrapezoidNodesAndWeights) {
    const auto pts = interpolate_path({scalar(0), scalar(1), 4, Quadrature::trapezoid});
    ASSERT_EQ(pts.size(), 5u);
    const double xs[] = {0, 0.25, 0.5, 0.75, 1.0}, ws[] = {0.125, 0.25, 0.25, 0.25, 0.125};
    for (int s = 0; s < 5; ++s) {
        EXPECT_EQ(pts[s].x[0], xs[s]);
        EXPECT_EQ(pts[s].weight, ws[s]);
    }
}

TEST(InterpolatePath, Validation) {
    EXPECT_THROW(interpolate_path({scalar(0), scalar(1), 0}), Error);
    EXPECT_THROW(interpolate_path({Tensor({2}), Tensor({3})}), DimensionError);
}

TEST(IntegratedGradients, LinearExactness) {
    SeededRng rng(2);
    for (int t = 0; t < 10; ++t) {
        const auto w = rng_normal(rng, {3, 4, 3});
        const auto x0 = rng_uniform(rng, w.shape()), x1 = rng_uniform(rng, w.shape());
        GradFn f = [&](const Tensor& x, std::size_t) {
            LossGrad lg;
            for (std::size_t i = 0; i < x.size(); ++i) lg.loss += w[i] * x[i];
            lg.grad = w;
            return lg;
        };
        for (int n : {1, 2, 5, 50})
            for (auto scheme : {Quadrature::riemann_right, Quadrature::trapezoid}) {
                const auto att = integrated_gradients(f, {x0, x1, n, scheme}, 0);
                for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(att.values[i], w[i] * (x1[i] - x0[i]), 1e-12);
                EXPECT_LT(completeness_report(att).gap, 1e-12);
            }
    }
}

TEST(IntegratedGradients, QuadraticOracle) {
    const auto rie = integrated_gradients(square_loss(), {scalar(0), scalar(1), 4, Quadrature::riemann_right}, 0);
    EXPECT_NEAR(rie.sum, 1.25, 1e-12);
    EXPECT_NEAR(rie.completeness_gap, 0.25, 1e-12);
    EXPECT_EQ(rie.loss_baseline, 0.0);
    EXPECT_EQ(rie.loss_target, 1.0);
    const auto trap = integrated_gradients(square_loss(), {scalar(0), scalar(1), 4, Quadrature::trapezoid}, 0);
    EXPECT_NEAR(trap.sum, 1.0, 1e-12);
    EXPECT_LT(trap.completeness_gap, 1e-12);
}

TEST(IntegratedGradients, RiemannSingleStepOnQuadratic) {
    // One right-endpoint node: 1 * 2 * 1 = 2, against a true change of 1.
    const auto att = integrated_gradients(square_loss(), {scalar(0), scalar(1), 1, Quadrature::riemann_right}, 0);
    EXPECT_NEAR(att.sum, 2.0, 1e-15);
    EXPECT_NEAR(att.completeness_gap, 1.0, 1e-15);
}

TEST(IntegratedGradients, SumAndGapInvariants) {
    const auto g = smooth_model_fn(4, {3, 3, 3});
    SeededRng rng(4);
    const auto x0 = rng_uniform(rng, {3, 3, 3}), x1 = rng_uniform(rng, {3, 3, 3});
    const auto att = integrated_gradients(g, {x0, x1, 20, Quadrature::trapezoid}, 1);
    EXPECT_NEAR(att.sum, sum(att.values), 1e-12);
    EXPECT_EQ(att.completeness_gap, std::abs(att.sum - (att.loss_target - att.loss_baseline)));
    EXPECT_EQ(att.loss_baseline, g(x0, 1).loss);
    EXPECT_EQ(att.loss_target, g(x1, 1).loss);
}

TEST(IntegratedGradients, EmptyPathIsZero) {
    const auto g = smooth_model_fn(5, {2, 2, 3});
    SeededRng rng(5);
    const auto x = rng_uniform(rng, {2, 2, 3});
    const auto att = integrated_gradients(g, {x, x, 50}, 0);
    for (double v : att.values.data()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(att.completeness_gap, 0.0);
}

TEST(IntegratedGradients, SwapNegatesExactly) {
    const auto micro = model_gradfn(trained_micro());
    SeededRng rng(6);
    for (int t = 0; t < 3; ++t) {
        const auto x0 = rng_uniform(rng, {16, 16, 3}), x1 = rng_uniform(rng, {16, 16, 3});
        for (int n : {1, 2, 9, 50}) {
            const auto a = integrated_gradients(micro, {x0, x1, n}, 2), b = integrated_gradients(micro, {x1, x0, n}, 2);
            for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_EQ(a.values[i], -b.values[i]);
            EXPECT_EQ(a.sum, -b.sum);
        }
    }
}

TEST(IntegratedGradients, ConvergenceSlopes) {
    GradFn cubic = [](const Tensor& x, std::size_t) {
        LossGrad lg;
        lg.loss = x[0] * x[0] * x[0];
        lg.grad = Tensor(x.shape(), 3.0 * x[0] * x[0]);
        return lg;
    };
    for (int n : {4, 8, 16, 32, 64}) {
        const auto rie = integrated_gradients(square_loss(), {scalar(0), scalar(1), n, Quadrature::riemann_right}, 0);
        EXPECT_NEAR(rie.completeness_gap, 1.0 / n, 1e-14);
        const auto trap = integrated_gradients(cubic, {scalar(0), scalar(1), n, Quadrature::trapezoid}, 0);
        EXPECT_NEAR(trap.completeness_gap, 0.5 / (n * n), 1e-14);
    }
}

TEST(IntegratedGradients, PathIndependenceWitness) {
    const auto g = smooth_model_fn(7, {3, 3, 3});
    SeededRng rng(7);
    for (int t = 0; t < 10; ++t) {
        const auto x0 = rng_uniform(rng, {3, 3, 3}), x1 = rng_uniform(rng, {3, 3, 3}), mid = rng_uniform(rng, {3, 3, 3});
        const auto direct = integrated_gradients(g, {x0, x1, 30}, 0);
        const auto a = integrated_gradients(g, {x0, mid, 30}, 0), b = integrated_gradients(g, {mid, x1, 30}, 0);
        EXPECT_LE(std::abs(direct.sum - (a.sum + b.sum)),
                  direct.completeness_gap + a.completeness_gap + b.completeness_gap + 1e-12);
    }
}

TEST(IntegratedGradients, StepFailureNamesIndex) {
    int calls = 0;
    GradFn flaky = [&](const Tensor& x, std::size_t k) {
        if (++calls == 3) throw Error("boom");
        return square_loss()(x, k);
    };
    try {
        integrated_gradients(flaky, {scalar(0), scalar(1), 4, Quadrature::riemann_right}, 0);
        FAIL();
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("path step"), std::string::npos) << msg;
        EXPECT_NE(msg.find("boom"), std::string::npos) << msg;
    }
}

TEST(IntegratedGradients, MicroModelConvergesWithSteps) {
    const auto model = trained_micro();
    const auto g = model_gradfn(model);
    const auto ds = gen_synthetic(99, 4, 5, 16);
    int improved = 0;
    for (const auto& s : ds.items) {
        const auto x0 = s.image.tensor(), x1 = degrade_jpeg(s.image, QualityLevel::jpeg(25)).tensor();
        const auto a = integrated_gradients(g, {x0, x1, 50}, s.label), b = integrated_gradients(g, {x0, x1, 300}, s.label);
        improved += b.completeness_gap <= a.completeness_gap;
    }
    EXPECT_GE(improved, 19) << "of " << ds.size();
}

TEST(CompletenessReport, FloorsDenominator) {
    AttributionMap att;
    att.values = Tensor({2}, std::vector<double>{0.5, -0.5});
    att.completeness_gap = 3e-13;
    const auto rep = completeness_report(att);
    EXPECT_EQ(rep.gap, 3e-13);
    EXPECT_NEAR(rep.rel_gap, 0.3, 1e-15);
}

TEST(SplitPolarity, Examples) {
    AttributionMap zero;
    zero.values = Tensor({4});
    const auto pz = split_polarity(zero);
    EXPECT_EQ(pz.negative, Tensor({4}));
    EXPECT_EQ(pz.positive, Tensor({4}));
    EXPECT_EQ(pz.scale, 1.0);

    AttributionMap two;
    two.values = Tensor({2}, std::vector<double>{-2, 1});
    const auto p2 = split_polarity(two);
    EXPECT_EQ(p2.negative.vec(), (std::vector<double>{-1, 0}));
    EXPECT_EQ(p2.positive.vec(), (std::vector<double>{0, 0.5}));
    EXPECT_EQ(p2.scale, 2.0);

    AttributionMap single;
    single.values = Tensor({5}, std::vector<double>{0, 0, 0, 0, 3});
    const auto ps = split_polarity(single);
    EXPECT_EQ(std::count(ps.positive.vec().begin(), ps.positive.vec().end(), 1.0), 1);
    EXPECT_EQ(ps.positive[4], 1.0);
}

TEST(SplitPolarity, ReconstructionAndBounds) {
    SeededRng rng(8);
    for (int t = 0; t < 200; ++t) {
        AttributionMap m;
        m.values = rng_normal(rng, {1 + rng.below(30)});
        for (double& v : m.values.data()) v *= std::pow(10.0, rng.uniform(-8, 8));
        const auto p = split_polarity(m);
        for (std::size_t i = 0; i < m.values.size(); ++i) {
            ASSERT_GE(p.negative[i], -1.0);
            ASSERT_LE(p.negative[i], 0.0);
            ASSERT_GE(p.positive[i], 0.0);
            ASSERT_LE(p.positive[i], 1.0);
            const double scaled = p.negative[i] + p.positive[i];
            EXPECT_NEAR(scaled * p.scale, m.values[i], 1e-12 * p.scale);
        }
    }
}

TEST(SensitivityProbe, DegenerateAndQuadratic) {
    const auto same = sensitivity_probe(square_loss(), scalar(0.3), scalar(0.3), 0, 10);
    EXPECT_EQ(same.delta_loss, 0.0);
    EXPECT_EQ(same.ig_sum, 0.0);
    EXPECT_TRUE(same.consistent);

    const auto coarse = sensitivity_probe(square_loss(), scalar(0), scalar(1), 0, 1, Quadrature::riemann_right);
    EXPECT_TRUE(coarse.consistent);
    EXPECT_NEAR(coarse.gap, 1.0, 1e-15);
}

TEST(SensitivityProbe, PinnedMicroModelPair) {
    const auto g = model_gradfn(trained_micro());
    const auto ds = gen_synthetic(3, 4, 2, 16);
    const auto& s = ds.items[4];
    const auto r = sensitivity_probe(g, s.image.tensor(), degrade_jpeg(s.image, QualityLevel::jpeg(10)).tensor(),
                                     s.label, 50);
    EXPECT_TRUE(r.consistent);
    EXPECT_GT(std::abs(r.delta_loss), 1e-3);
    EXPECT_LE(std::abs(r.ig_sum - r.delta_loss), r.gap + 1e-15);
    EXPECT_LT(r.gap, 1e-2 * std::abs(r.delta_loss));
}

TEST(Quadrature, StringRoundTrip) {
    EXPECT_EQ(quadrature_from_string(to_string(Quadrature::trapezoid)), Quadrature::trapezoid);
    EXPECT_EQ(quadrature_from_string(to_string(Quadrature::riemann_right)), Quadrature::riemann_right);
    EXPECT_THROW(quadrature_from_string("simpson"), Error);
}
