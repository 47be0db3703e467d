#include <gtest/gtest.h>

#include <regex>

#include "igprobe/viz.hpp"

using namespace igprobe;

namespace {

ImageBuf noise_image(std::uint64_t seed, std::size_t h, std::size_t w) {
    SeededRng rng(seed);
    return ImageBuf(rng_uniform(rng, {h, w, 3}));
}

PolarityMaps zero_maps(std::size_t h, std::size_t w) { return {Tensor({h, w, 1}), Tensor({h, w, 1}), 1.0}; }

PrecisionTable published_table() {
    PrecisionTable t;
    t.qualities = {QualityLevel::original(), QualityLevel::jpeg(75), QualityLevel::jpeg(50), QualityLevel::jpeg(25)};
    t.rows.push_back({"ResNet50", {0.7141, 0.5457, 0.4689, 0.3562}});
    t.rows.push_back({"ViT-B/32", {0.8811, 0.8075, 0.7552, 0.6410}});
    return t;
}

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(Overlay, ZeroAttributionIsDimmedImage) {
    const auto img = noise_image(1, 5, 7);
    for (auto mode : {Polarity::negative, Polarity::positive, Polarity::both}) {
        const auto out = render_overlay(img, zero_maps(5, 7), {0.7, 1.5, mode});
        for (std::size_t i = 0; i < img.tensor().size(); ++i) ASSERT_EQ(out.tensor()[i], 0.7 * img.tensor()[i]);
    }
}

TEST(Overlay, SinglePositivePixelOnBlack) {
    auto pol = zero_maps(3, 3);
    pol.positive[4] = 1.0;
    const auto out = render_overlay(ImageBuf(3, 3), pol, {});
    EXPECT_EQ(out.at(1, 1, 0), 0.0);
    EXPECT_EQ(out.at(1, 1, 1), 1.0);
    EXPECT_EQ(out.at(1, 1, 2), 0.0);
    EXPECT_EQ(out.at(0, 0, 1), 0.0);
}

TEST(Overlay, PolarityMasks) {
    const auto img = noise_image(2, 4, 4);
    auto pol = zero_maps(4, 4);
    for (std::size_t i = 0; i < 16; ++i) pol.positive[i] = i / 16.0;
    const auto neg_only = render_overlay(img, pol, {0.7, 1.5, Polarity::negative});
    for (std::size_t i = 0; i < img.tensor().size(); ++i) ASSERT_EQ(neg_only.tensor()[i], 0.7 * img.tensor()[i]);

    auto neg = zero_maps(4, 4);
    neg.negative[5] = -0.2;
    const auto red = render_overlay(img, neg, {0.7, 1.5, Polarity::both});
    EXPECT_NEAR(red.at(1, 1, 0), std::min(1.0, 0.7 * img.at(1, 1, 0) + 0.3), 1e-15);
    EXPECT_EQ(red.at(1, 1, 2), 0.7 * img.at(1, 1, 2));
}

TEST(Overlay, OutputAlwaysInUnitRange) {
    SeededRng rng(3);
    for (int t = 0; t < 200; ++t) {
        const std::size_t h = 1 + rng.below(6), w = 1 + rng.below(6);
        AttributionMap att;
        att.values = rng_normal(rng, {h, w, 1});
        for (double& v : att.values.data()) v *= rng.uniform(0, 100);
        const auto pol = split_polarity(att);
        const auto out = render_overlay(ImageBuf(rng_uniform(rng, {h, w, 3})), pol,
                                        {rng.uniform(0, 3), rng.uniform(0, 3), static_cast<Polarity>(rng.below(3))});
        for (double v : out.tensor().data()) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
        }
    }
}

TEST(Overlay, Errors) {
    const auto img = noise_image(1, 4, 4);
    EXPECT_THROW(render_overlay(img, zero_maps(4, 5), {}), DimensionError);
    EXPECT_THROW(render_overlay(img, {Tensor({4, 4, 3}), Tensor({4, 4, 3}), 1.0}, {}), DimensionError);
    EXPECT_THROW(render_overlay(img, zero_maps(4, 4), {NAN, 1.5, Polarity::both}), Error);
    EXPECT_THROW(polarity_from_string("left"), Error);
    EXPECT_EQ(polarity_from_string("both"), Polarity::both);
}

TEST(PixelAttribution, ChannelSumKeepsTotal) {
    SeededRng rng(4);
    AttributionMap att;
    att.values = rng_normal(rng, {3, 2, 3});
    att.sum = sum(att.values);
    const auto px = pixel_attribution(att);
    EXPECT_EQ(px.values.shape(), (Shape{3, 2, 1}));
    EXPECT_NEAR(px.sum, att.sum, 1e-12);
    EXPECT_NEAR(px.values[1], att.values[3] + att.values[4] + att.values[5], 1e-15);
}

TEST(EmitTable, CsvMatchesPublishedLayout) {
    const auto csv = emit_table(published_table(), TableFormat::csv);
    EXPECT_EQ(csv,
              "model,Original,Quality 75,Quality 50,Quality 25\n"
              "ResNet50,0.7141,0.5457,0.4689,0.3562\n"
              "ViT-B/32,0.8811,0.8075,0.7552,0.6410\n");
}

TEST(EmitTable, SingleQualityIsTwoLines) {
    PrecisionTable t;
    t.qualities = {QualityLevel::original()};
    t.rows.push_back({"m", {0.5}});
    EXPECT_EQ(emit_table(t, TableFormat::csv), "model,Original\nm,0.5000\n");
}

TEST(EmitTable, MarkdownRoundTrip) {
    const auto t = published_table();
    const auto from_csv = parse_table(emit_table(t, TableFormat::csv));
    const auto md = emit_table(from_csv, TableFormat::markdown);
    EXPECT_EQ(md.substr(0, md.find('\n')), "| model | Original | Quality 75 | Quality 50 | Quality 25 |");
    const auto back = parse_table(md);
    ASSERT_EQ(back.rows.size(), 2u);
    EXPECT_EQ(back.qualities.size(), 4u);
    for (std::size_t r = 0; r < 2; ++r) {
        EXPECT_EQ(back.rows[r].model_name, t.rows[r].model_name);
        EXPECT_EQ(back.rows[r].scores, t.rows[r].scores);
    }
    EXPECT_EQ(emit_table(back, TableFormat::csv), emit_table(t, TableFormat::csv));
}

TEST(EmitTable, DistinctTablesGiveDistinctText) {
    auto a = published_table(), b = published_table();
    b.rows[0].scores[2] += 1e-4;
    EXPECT_NE(emit_table(a, TableFormat::csv), emit_table(b, TableFormat::csv));
    EXPECT_NE(emit_table(a, TableFormat::markdown), emit_table(b, TableFormat::markdown));
}

TEST(EmitTable, LongFormAndErrors) {
    const auto lf = emit_table_long(published_table());
    EXPECT_EQ(lf.substr(0, lf.find('\n', lf.find('\n') + 1)), "model,quality,score\nResNet50,original,0.7141");
    auto bad = published_table();
    bad.rows[1].scores.pop_back();
    EXPECT_THROW(emit_table(bad, TableFormat::csv), Error);
    EXPECT_THROW(parse_table("foo,bar\n"), Error);
    EXPECT_THROW(parse_table("model,Quality 200\n"), Error);
}

TEST(Chart, OnePolylinePerModel) {
    const auto svg = emit_chart_svg(published_table());
    EXPECT_EQ(count(svg, "<polyline"), 2u);
    EXPECT_NE(svg.find("viewBox=\"0 0 800 500\""), std::string::npos);
    EXPECT_NE(svg.find(">ResNet50<"), std::string::npos);
}

TEST(Chart, PerfectScoresSitOnTopGridline) {
    PrecisionTable t;
    t.qualities = {QualityLevel::original(), QualityLevel::jpeg(50)};
    t.rows.push_back({"a", {1.0, 1.0}});
    t.rows.push_back({"b", {1.0, 1.0}});
    const auto svg = emit_chart_svg(t);
    const std::string top = fixed(chart_y(1.0), 2);
    EXPECT_NE(svg.find("y1=\"" + top + "\" x2=\"" + fixed(kPlotRight, 2) + "\" y2=\"" + top + "\""), std::string::npos);
    const std::regex pts("points=\"([^\"]*)\"");
    std::size_t seen = 0;
    for (std::sregex_iterator it(svg.begin(), svg.end(), pts), end; it != end; ++it, ++seen) {
        const std::string p = (*it)[1];
        EXPECT_EQ(count(p, "," + top), 2u) << p;
    }
    EXPECT_EQ(seen, 2u);
}

TEST(Chart, ByteStableAndEscaped) {
    auto t = published_table();
    t.rows[0].model_name = "A<&>B";
    EXPECT_EQ(emit_chart_svg(t), emit_chart_svg(t));
    EXPECT_NE(emit_chart_svg(t).find("A&lt;&amp;&gt;B"), std::string::npos);
}

TEST(Chart, NeedsTwoPoints) {
    PrecisionTable t;
    t.qualities = {QualityLevel::original()};
    t.rows.push_back({"a", {1.0}});
    try {
        emit_chart_svg(t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "chart: need >=2 points");
    }
    EXPECT_THROW(emit_chart_svg(PrecisionTable{{QualityLevel::original(), QualityLevel::jpeg(5)}, {}}), Error);
}
