#pragma once
// Dataset ingestion and generation, the quality-sweep evaluation, and batch
// attribution between original-quality baselines and degraded targets.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "igprobe/codec.hpp"
#include "igprobe/dataset.hpp"
#include "igprobe/integrated_gradients.hpp"
#include "igprobe/model.hpp"
#include "igprobe/parallel.hpp"

namespace igprobe {

// ---------------------------------------------------------------------------
// CSV helpers

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

inline std::string fixed(double v, int decimals) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(decimals);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// Datasets

/// Reads <dir>/labels.csv (header "filename,class_name") and the images it
/// names. Class indices follow first appearance in the CSV. All problems are
/// collected and reported together.
inline Dataset load_dataset(const std::filesystem::path& dir) {
    const auto csv = dir / "labels.csv";
    std::ifstream in(csv);
    if (!in) throw Error("cannot open " + csv.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(csv.string() + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "filename" || header[1] != "class_name")
        throw Error(csv.string() + ": header must be 'filename,class_name'");

    Dataset ds;
    std::map<std::string, std::size_t> class_index;
    std::map<std::string, std::size_t> seen;
    std::vector<std::string> problems;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        const std::string where = "row " + std::to_string(row);
        if (f.size() != 2 || f[0].empty() || f[1].empty()) {
            problems.push_back(where + ": expected 'filename,class_name'");
            continue;
        }
        if (auto [it, fresh] = seen.emplace(f[0], row); !fresh) {
            problems.push_back(where + ": duplicate id '" + f[0] + "' (first at row " + std::to_string(it->second) + ")");
            continue;
        }
        auto [cit, fresh] = class_index.emplace(f[1], ds.class_names.size());
        if (fresh) ds.class_names.push_back(f[1]);
        const auto path = dir / f[0];
        if (!std::filesystem::exists(path)) {
            problems.push_back(where + ": missing file '" + f[0] + "'");
            continue;
        }
        try {
            ds.items.push_back({read_image(path), cit->second, f[0]});
        } catch (const Error& e) {
            problems.push_back(where + ": " + e.what());
            continue;
        }
        if (ds.items.back().image.shape() != ds.items.front().image.shape())
            problems.push_back(where + ": shape " + shape_str(ds.items.back().image.shape()) + " differs from " +
                               shape_str(ds.items.front().image.shape()));
    }
    if (ds.items.empty() && problems.empty()) problems.push_back("no items listed");
    if (!problems.empty()) {
        std::string msg = csv.string() + ": " + std::to_string(problems.size()) + " error(s)";
        for (const auto& p : problems) msg += "\n  " + p;
        throw Error(msg);
    }
    return ds;
}

/// Writes images as PPM plus labels.csv; inverse of load_dataset.
inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "labels.csv");
    if (!out) throw Error("cannot write " + (dir / "labels.csv").string());
    out << "filename,class_name\n";
    for (const auto& s : ds.items) {
        std::string name = s.id;
        if (std::filesystem::path(name).extension() != ".ppm") name += ".ppm";
        write_ppm(dir / name, s.image);
        out << csv_field(name) << ',' << csv_field(ds.class_names[s.label]) << '\n';
    }
}

/// Parametric classes at desk scale. Class c belongs to family c % 4:
///   0: fine oriented stripes, 1: bright disk, 2: linear ramp, 3: fine stripes
///   at the orthogonal orientation.
/// Variants (c / 4) rotate the orientation and shift the period or radius.
/// Stripe contrast is drawn per image from the style range, so some images
/// sit close to what a coarse JPEG keeps. Ramp direction is variant * pi/5
/// plus a small jitter. Background, phase and position are jittered and
/// i.i.d. noise is added before clamping. Items are class-major.
struct SyntheticStyle {
    double stripe_amp_lo = 0.008, stripe_amp_hi = 0.04;  // per-image stripe amplitude range
    double stripe_period = 2.6;                         // pixels, for variant 0
    double noise_sigma = 0.05;
};

inline Dataset gen_synthetic(std::uint64_t seed, std::size_t classes, std::size_t per_class, std::size_t side,
                             const SyntheticStyle& style = {}) {
    if (classes < 2) throw Error("synthetic data needs at least 2 classes");
    if (side < 8) throw Error("synthetic images need side >= 8");
    static const char* kFamily[] = {"stripes", "disk", "ramp", "crossstripes"};
    Dataset ds;
    for (std::size_t c = 0; c < classes; ++c)
        ds.class_names.push_back(std::string(kFamily[c % 4]) + (c >= 4 ? "_" + std::to_string(c / 4) : ""));

    SeededRng rng(seed);
    const double S = static_cast<double>(side);
    for (std::size_t c = 0; c < classes; ++c) {
        const std::size_t family = c % 4, variant = c / 4;
        for (std::size_t i = 0; i < per_class; ++i) {
            Tensor px({side, side, 3});
            const double bg = rng.uniform(0.35, 0.65);
            double tint[3];
            for (double& t : tint) t = rng.uniform(-0.05, 0.05);
            const double phase = rng.uniform(-0.3, 0.3);
            const double amp = rng.uniform(style.stripe_amp_lo, style.stripe_amp_hi);
            const double direction = static_cast<double>(variant) * std::numbers::pi / 5 + rng.uniform(-0.3, 0.3);
            const double cx = S * rng.uniform(0.35, 0.65), cy = S * rng.uniform(0.35, 0.65);
            const double angle = (family == 3 ? std::numbers::pi / 2 : 0.0) + variant * std::numbers::pi / 7;
            const double period = style.stripe_period + 0.4 * static_cast<double>(variant % 3);
            const double radius = S * (0.22 + 0.04 * static_cast<double>(variant % 3)) * rng.uniform(0.85, 1.15);
            for (std::size_t y = 0; y < side; ++y)
                for (std::size_t x = 0; x < side; ++x) {
                    const double fx = static_cast<double>(x), fy = static_cast<double>(y);
                    double v = bg;
                    switch (family) {
                        case 0:
                        case 3:
                            v += amp * std::sin(2.0 * std::numbers::pi * (fx * std::cos(angle) + fy * std::sin(angle)) / period + phase);
                            break;
                        case 1:
                            if (std::hypot(fx - cx, fy - cy) < radius) v += 0.3;
                            break;
                        default:
                            v += 0.5 * ((fx * std::cos(direction) + fy * std::sin(direction)) / S - 0.5) * 0.8;
                            break;
                    }
                    for (std::size_t ch = 0; ch < 3; ++ch)
                        px[(y * side + x) * 3 + ch] = v + tint[ch] + style.noise_sigma * rng.normal();
                }
            char id[64];
            std::snprintf(id, sizeof id, "syn_c%02zu_%05zu", c, i);
            ds.items.push_back({ImageBuf(std::move(px)), c, id});
        }
    }
    return ds;
}

/// Smooth colour test card with edges and mild texture: a diagonal gradient,
/// a few Gaussian blobs, a hard-edged rectangle and low-amplitude noise.
inline ImageBuf gen_test_image(std::uint64_t seed, std::size_t h, std::size_t w) {
    SeededRng rng(seed);
    struct Blob { double cx, cy, r, col[3]; };
    std::vector<Blob> blobs(5);
    for (auto& b : blobs) {
        b.cx = rng.uniform(0.0, static_cast<double>(w));
        b.cy = rng.uniform(0.0, static_cast<double>(h));
        b.r = rng.uniform(0.08, 0.25) * static_cast<double>(std::min(h, w));
        for (double& c : b.col) c = rng.uniform(-0.4, 0.4);
    }
    const double rx0 = rng.uniform(0.1, 0.4) * w, rx1 = rng.uniform(0.6, 0.9) * w;
    const double ry0 = rng.uniform(0.1, 0.4) * h, ry1 = rng.uniform(0.6, 0.9) * h;
    Tensor px({h, w, 3});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double fx = static_cast<double>(x), fy = static_cast<double>(y);
            const double base = 0.25 + 0.5 * (fx / w + fy / h) / 2.0;
            const bool in_rect = fx >= rx0 && fx < rx1 && fy >= ry0 && fy < ry1;
            for (std::size_t c = 0; c < 3; ++c) {
                double v = base + (c == 0 ? 0.1 : c == 1 ? 0.0 : -0.1) * (fx / w);
                for (const auto& b : blobs)
                    v += b.col[c] * std::exp(-((fx - b.cx) * (fx - b.cx) + (fy - b.cy) * (fy - b.cy)) / (2 * b.r * b.r));
                if (in_rect) v += c == 2 ? 0.2 : -0.15;
                v += 0.02 * rng.normal();
                px[(y * w + x) * 3 + c] = v;
            }
        }
    return ImageBuf(std::move(px));
}

// ---------------------------------------------------------------------------
// Metrics

enum class Metric { macro_precision, accuracy };

inline const char* to_string(Metric m) { return m == Metric::accuracy ? "accuracy" : "macro_precision"; }

inline Metric metric_from_string(const std::string& s) {
    if (s == "macro_precision") return Metric::macro_precision;
    if (s == "accuracy") return Metric::accuracy;
    throw Error("unknown metric '" + s + "'");
}

/// Unweighted mean over all C classes of TP/(TP+FP); a class never predicted scores 0.
inline double macro_precision(std::span<const std::size_t> predictions, std::span<const std::size_t> truths,
                              std::size_t classes) {
    if (predictions.size() != truths.size())
        throw Error("macro_precision: " + std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(truths.size()) + " truths");
    if (predictions.empty()) throw Error("macro_precision: no predictions");
    if (classes == 0) throw Error("macro_precision: zero classes");
    std::vector<double> tp(classes), predicted(classes);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] >= classes || truths[i] >= classes) throw Error("macro_precision: label out of range");
        predicted[predictions[i]] += 1;
        if (predictions[i] == truths[i]) tp[predictions[i]] += 1;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += predicted[c] > 0 ? tp[c] / predicted[c] : 0.0;
    return total / static_cast<double>(classes);
}

inline double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> truths) {
    if (predictions.size() != truths.size() || predictions.empty()) throw Error("accuracy: bad input lengths");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) hit += predictions[i] == truths[i];
    return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------
// Precision tables

struct PrecisionRow {
    std::string model_name;
    std::vector<double> scores;  // aligned with PrecisionTable::qualities
};

struct PrecisionTable {
    std::vector<QualityLevel> qualities;
    std::vector<PrecisionRow> rows;

    void validate() const {
        if (qualities.empty()) throw Error("precision table has no qualities");
        for (const auto& r : rows)
            if (r.scores.size() != qualities.size())
                throw Error("row '" + r.model_name + "' has " + std::to_string(r.scores.size()) + " scores for " +
                            std::to_string(qualities.size()) + " qualities");
    }
};

struct PipelineOptions {
    std::vector<QualityLevel> qualities{QualityLevel::original(), QualityLevel::jpeg(75), QualityLevel::jpeg(50),
                                        QualityLevel::jpeg(25)};
    std::size_t out_h = 32, out_w = 32;  // model input size
    JpegOptions jpeg;
    unsigned jobs = 1;
};

inline bool has_original(const std::vector<QualityLevel>& qs) {
    for (const auto& q : qs)
        if (q.is_original()) return true;
    return false;
}

/// Degrade at native resolution, then resize to the model input.
inline ImageBuf prepare_image(const ImageBuf& img, const QualityLevel& q, const PipelineOptions& opt) {
    ImageBuf d = degrade_jpeg(img, q, opt.jpeg);
    if (d.height() == opt.out_h && d.width() == opt.out_w) return d;
    return resize_bicubic(d, opt.out_h, opt.out_w);
}

struct SweepOptions : PipelineOptions {
    Metric metric = Metric::macro_precision;
    std::string model_name = "model";
};

/// One row of the precision table: for each quality, classify every prepared
/// image by argmax of the logits and score with the chosen metric.
inline PrecisionTable sweep_precision(const LogitFn& classify, const Dataset& ds, const SweepOptions& opt) {
    if (!has_original(opt.qualities)) throw Error("sweep qualities must include ORIGINAL");
    if (ds.items.empty()) throw Error("sweep needs a nonempty dataset");
    std::vector<std::size_t> truths;
    for (const auto& s : ds.items) truths.push_back(s.label);

    PrecisionTable table;
    table.qualities = opt.qualities;
    PrecisionRow row{opt.model_name, {}};
    for (const auto& q : opt.qualities) {
        std::vector<std::size_t> preds(ds.size());
        parallel_for(ds.size(), opt.jobs, [&](std::size_t i) {
            const auto& s = ds.items[i];
            try {
                preds[i] = argmax(classify(prepare_image(s.image, q, opt).tensor()));
            } catch (const std::exception& e) {
                throw Error("image '" + s.id + "' at " + q.label() + ": " + e.what());
            }
        });
        row.scores.push_back(opt.metric == Metric::accuracy ? accuracy(preds, truths)
                                                            : macro_precision(preds, truths, ds.num_classes()));
    }
    table.rows.push_back(std::move(row));
    return table;
}

/// Trains on images passed through the ORIGINAL pipeline (resized to the
/// model input), the same preparation the sweep applies at evaluation.
inline ScorerModel train_on_pipeline(ScorerModel model, const Dataset& train_ds, const TrainConfig& tc,
                                     const PipelineOptions& pipeline, std::vector<double>* epoch_losses = nullptr) {
    Dataset prepared = train_ds;
    parallel_for(prepared.size(), pipeline.jobs, [&](std::size_t i) {
        prepared.items[i].image = prepare_image(train_ds.items[i].image, QualityLevel::original(), pipeline);
    });
    return train(std::move(model), prepared, tc, epoch_losses);
}

// ---------------------------------------------------------------------------
// Attribution

struct AttributionRecord {
    std::string id;
    std::string true_label;
    std::vector<std::string> predicted_labels;  // one per quality, incl. the baseline
    std::vector<double> predicted_scores;       // softmax at the true label, one per quality
    std::vector<double> ig_values;              // sum of IG, one per degraded quality
};

struct AttributionDetail {
    QualityLevel quality = QualityLevel::original();
    AttributionMap map;
    ImageBuf target;
};

struct AttributionResult {
    AttributionRecord record;
    ImageBuf baseline;
    std::vector<AttributionDetail> details;  // one per degraded quality
};

struct AttributeOptions : PipelineOptions {
    int steps = kDefaultSteps;
    Quadrature scheme = Quadrature::trapezoid;
};

/// Index of the baseline entry (first ORIGINAL) in the quality list.
inline std::size_t baseline_index(const std::vector<QualityLevel>& qs) {
    for (std::size_t i = 0; i < qs.size(); ++i)
        if (qs[i].is_original()) return i;
    throw Error("qualities must include ORIGINAL");
}

/// Baseline = original-quality prepared image; one IG per remaining quality
/// entry, with the prepared degraded image as target.
inline std::vector<AttributionResult> attribute_batch(const GradFn& gradfn, const Dataset& ds,
                                                      const AttributeOptions& opt) {
    const std::size_t base = baseline_index(opt.qualities);
    if (opt.steps < 1) throw Error("steps must be >= 1");
    std::vector<AttributionResult> results(ds.size());
    parallel_for(ds.size(), opt.jobs, [&](std::size_t i) {
        const auto& s = ds.items[i];
        try {
            AttributionResult r;
            r.record.id = s.id;
            r.record.true_label = ds.class_names.at(s.label);
            std::vector<ImageBuf> prepared;
            for (const auto& q : opt.qualities) prepared.push_back(prepare_image(s.image, q, opt));
            for (const auto& img : prepared) {
                const auto lg = gradfn(img.tensor(), s.label);
                r.record.predicted_labels.push_back(ds.class_names.at(argmax(lg.logits)));
                r.record.predicted_scores.push_back(softmax(lg.logits)[s.label]);
            }
            r.baseline = prepared[base];
            for (std::size_t k = 0; k < opt.qualities.size(); ++k) {
                if (k == base) continue;
                AttributionDetail d;
                d.quality = opt.qualities[k];
                d.target = prepared[k];
                d.map = integrated_gradients(gradfn, {r.baseline.tensor(), d.target.tensor(), opt.steps, opt.scheme}, s.label);
                r.record.ig_values.push_back(d.map.sum);
                r.details.push_back(std::move(d));
            }
            results[i] = std::move(r);
        } catch (const std::exception& e) {
            throw Error("image '" + s.id + "': " + e.what());
        }
    });
    return results;
}

/// id,true,predicted_<q>...,score_<q>...,ig_<q>... (IG columns skip the baseline).
inline std::string attribution_csv(const std::vector<AttributionResult>& results,
                                   const std::vector<QualityLevel>& qualities) {
    const std::size_t base = baseline_index(qualities);
    std::ostringstream os;
    os << "id,true";
    for (const auto& q : qualities) os << ",predicted_" << q.token();
    for (const auto& q : qualities) os << ",score_" << q.token();
    for (std::size_t k = 0; k < qualities.size(); ++k)
        if (k != base) os << ",ig_" << qualities[k].token();
    os << '\n';
    for (const auto& r : results) {
        const auto& rec = r.record;
        os << csv_field(rec.id) << ',' << csv_field(rec.true_label);
        for (const auto& p : rec.predicted_labels) os << ',' << csv_field(p);
        for (double v : rec.predicted_scores) os << ',' << fixed(v, 6);
        for (double v : rec.ig_values) os << ',' << fixed(v, 6);
        os << '\n';
    }
    return os.str();
}

/// Per (image, degraded quality) completeness accounting and the polarity
/// normaliser used for overlays.
inline std::string completeness_csv(const std::vector<AttributionResult>& results) {
    std::ostringstream os;
    os << "id,quality,ig_sum,loss_baseline,loss_target,delta_loss,gap,rel_gap,polarity_scale\n";
    for (const auto& r : results)
        for (const auto& d : r.details) {
            const auto rep = completeness_report(d.map);
            os << csv_field(r.record.id) << ',' << d.quality.token() << ',' << fixed(d.map.sum, 9) << ','
               << fixed(d.map.loss_baseline, 9) << ',' << fixed(d.map.loss_target, 9) << ','
               << fixed(d.map.delta_loss(), 9) << ',' << fixed(rep.gap, 9) << ',' << fixed(rep.rel_gap, 9) << ','
               << fixed(max_abs(d.map.values) > 0 ? max_abs(d.map.values) : 1.0, 9) << '\n';
        }
    return os.str();
}

}  // namespace igprobe
