// igprobe: command-line front end for the degradation / attribution pipeline.
//
// Exit status: 0 success, 1 domain error (bad data, failed check, provider
// failure), 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "igprobe/provider.hpp"
#include "igprobe/verify.hpp"
#include "igprobe/viz.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace igprobe;

namespace {

// ---------------------------------------------------------------------------
// JSON config files. Top-level keys apply to the subcommand being run; an
// object keyed by a subcommand name applies only to that subcommand.

class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            input >> j;
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> out;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.value().is_object()) {
                for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) out.push_back(item({it.key()}, jt.key(), jt.value()));
                continue;
            }
            // A flat key another subcommand understands is skipped here, so one
            // file can drive several subcommands. Keys nobody knows are errors.
            bool known = false;
            for (const auto* sub : root_->get_subcommands({})) {
                const bool has = sub->get_option_no_throw("--" + it.key()) != nullptr;
                known = known || has;
                if (has && sub->parsed()) out.push_back(item({sub->get_name()}, it.key(), it.value()));
            }
            if (!known) out.push_back(item({}, it.key(), it.value()));
        }
        return out;
    }

private:
    static std::string scalar(const json& v, const std::string& key) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConversionError("config key '" + key + "' must be a scalar or a list of scalars");
    }

    static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& key, const json& v) {
        CLI::ConfigItem c;
        c.parents = std::move(parents);
        c.name = key;
        if (v.is_array()) {
            for (const auto& e : v) c.inputs.push_back(scalar(e, key));
        } else {
            c.inputs.push_back(scalar(v, key));
        }
        return c;
    }

    const CLI::App* root_;
};

/// Every option of a subcommand with its effective value, for the manifest.
json options_json(const CLI::App* app) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help") continue;
        if (opt->get_type_size() == 0) {
            j[name] = opt->count() > 0 ? opt->as<bool>() : opt->get_default_str() == "true";
            continue;
        }
        const std::vector<std::string> vals = opt->count() > 0 ? opt->results() : std::vector{opt->get_default_str()};
        auto typed = [](const std::string& s) -> json {
            if (s.empty()) return s;
            try {
                auto v = json::parse(s);
                if (v.is_number() || v.is_boolean()) return v;
            } catch (const json::exception&) {
            }
            return s;
        };
        if (opt->get_expected_max() > 1) {
            std::vector<std::string> parts;
            for (const auto& v : vals) {
                // defaults of vector options print as "[a,b]"
                if (!v.empty() && v.front() == '[') {
                    std::stringstream ss(v.substr(1, v.size() - 2));
                    for (std::string part; std::getline(ss, part, ',');) parts.push_back(part);
                } else if (!v.empty()) {
                    parts.push_back(v);
                }
            }
            bool numeric = true;
            for (const auto& v : parts) numeric = numeric && typed(v).is_number();
            json arr = json::array();
            for (const auto& v : parts) arr.push_back(numeric ? typed(v) : json(v));
            j[name] = arr;
        } else {
            j[name] = vals.empty() ? json(nullptr) : typed(vals.back());
        }
    }
    return j;
}

// ---------------------------------------------------------------------------
// Shared settings

struct Common {
    std::string out_dir = "igprobe_out";
    std::uint64_t seed = 1;
    unsigned jobs = default_jobs();
};

struct DataArgs {
    std::string data_dir;
    std::size_t classes = 4, per_class = 200, side = 32;
    std::size_t limit = 0;
};

struct ModelArgs {
    std::string checkpoint;
    std::string provider;
    double provider_timeout = 30.0;
    std::string train_data;
    std::size_t input_size = 48;
    std::vector<std::size_t> hidden{64};
    std::size_t embed_dim = 16;
    double temperature = kDefaultTemperature;
    int epochs = 30;
    double lr = 1e-3;
    std::size_t batch = 16;
    bool cosine_decay = true;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--out", c.out_dir, "Output directory")->envname("IGPROBE_OUT_DIR");
    sub->add_option("--seed", c.seed, "Seed for data generation, initialisation and training");
    sub->add_option("--jobs", c.jobs, "Worker threads for per-image work")->check(CLI::PositiveNumber);
}

void add_data(CLI::App* sub, DataArgs& d) {
    sub->add_option("--data", d.data_dir, "Dataset directory with labels.csv (default: synthetic)");
    sub->add_option("--classes", d.classes, "Synthetic classes")->check(CLI::Range(2, 1000));
    sub->add_option("--per-class", d.per_class, "Synthetic images per class")->check(CLI::PositiveNumber);
    sub->add_option("--side", d.side, "Synthetic image side")->check(CLI::Range(8, 4096));
    sub->add_option("--limit", d.limit, "Use at most this many images, evenly spaced (0 = all)");
}

void add_model_shape(CLI::App* sub, ModelArgs& m) {
    sub->add_option("--input-size", m.input_size, "Model input side (images are resized to it)")->check(CLI::Range(1, 4096));
    sub->add_option("--hidden", m.hidden, "Hidden layer widths")->expected(0, 16);
    sub->add_option("--embed-dim", m.embed_dim, "Embedding width")->check(CLI::PositiveNumber);
    sub->add_option("--temperature", m.temperature, "Logit temperature");
    sub->add_option("--epochs", m.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    sub->add_option("--lr", m.lr, "Learning rate")->check(CLI::NonNegativeNumber);
    sub->add_option("--batch", m.batch, "Minibatch size")->check(CLI::PositiveNumber);
    sub->add_flag("--cosine-decay,!--no-cosine-decay", m.cosine_decay, "Cosine learning-rate decay")->default_str("true");
}

void add_model_source(CLI::App* sub, ModelArgs& m) {
    auto* ck = sub->add_option("--checkpoint", m.checkpoint, "Scorer checkpoint (model.json from `train`)");
    auto* pv = sub->add_option("--provider", m.provider, "Gradient provider command (run via /bin/sh -c)");
    ck->excludes(pv);
    sub->add_option("--provider-timeout", m.provider_timeout, "Seconds to wait for each provider reply");
    sub->add_option("--train-data", m.train_data, "Training directory when training a fresh model (default: synthetic)");
    add_model_shape(sub, m);
}

std::vector<QualityLevel> parse_qualities(const std::vector<std::string>& raw) {
    std::vector<QualityLevel> out;
    for (const auto& s : raw) out.push_back(QualityLevel::parse(s));
    if (out.empty()) throw Error("no qualities given");
    return out;
}

Dataset subset(const Dataset& ds, std::size_t limit) {
    if (limit == 0 || limit >= ds.size()) return ds;
    Dataset out;
    out.class_names = ds.class_names;
    for (std::size_t i = 0; i < limit; ++i) out.items.push_back(ds.items[i * ds.size() / limit]);
    return out;
}

/// Evaluation data: a directory, or synthetic images drawn with seed + 1 so
/// they are disjoint from the default training draw.
Dataset load_eval(const DataArgs& d, const Common& c) {
    Dataset ds = d.data_dir.empty() ? gen_synthetic(c.seed + 1, d.classes, d.per_class, d.side) : load_dataset(d.data_dir);
    return subset(ds, d.limit);
}

Dataset load_train(const ModelArgs& m, const DataArgs& d, const Common& c) {
    return m.train_data.empty() ? gen_synthetic(c.seed, d.classes, d.per_class, d.side) : load_dataset(m.train_data);
}

/// Renumbers dataset labels into the model's class order, matching by name.
void align_classes(Dataset& ds, const std::vector<std::string>& model_classes) {
    if (model_classes.empty() || ds.class_names == model_classes) return;
    std::vector<std::size_t> remap(ds.class_names.size());
    for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
        auto it = std::find(model_classes.begin(), model_classes.end(), ds.class_names[c]);
        if (it == model_classes.end()) throw Error("dataset class '" + ds.class_names[c] + "' is unknown to the model");
        remap[c] = static_cast<std::size_t>(it - model_classes.begin());
    }
    for (auto& s : ds.items) s.label = remap[s.label];
    ds.class_names = model_classes;
}

struct ModelHandle {
    std::string name;
    Shape input_shape;
    GradFn grad;
    LogitFn logits;
    std::shared_ptr<void> keepalive;
};

ModelConfig model_config(const ModelArgs& m, std::size_t classes) {
    ModelConfig mc;
    mc.input_shape = {m.input_size, m.input_size, 3};
    mc.hidden = m.hidden;
    mc.embed_dim = m.embed_dim;
    mc.num_classes = classes;
    mc.temperature = m.temperature;
    return mc;
}

TrainConfig train_config(const ModelArgs& m, std::uint64_t seed) { return {m.lr, m.epochs, m.batch, seed + 3, m.cosine_decay}; }

/// Checkpoint, provider, or a model trained here. Also aligns the dataset's
/// labels with the model's classes.
ModelHandle obtain_model(const ModelArgs& m, const DataArgs& d, const Common& c, Dataset& eval) {
    ModelHandle h;
    if (!m.provider.empty()) {
        ProviderSpec spec;
        spec.command = m.provider;
        spec.timeout_seconds = m.provider_timeout;
        auto conn = provider_connect(spec);
        align_classes(eval, conn.process->classes());
        h.name = "provider";
        h.input_shape = conn.process->input_shape();
        h.grad = conn.grad;
        h.logits = conn.logits;
        h.keepalive = conn.process;
        return h;
    }
    std::shared_ptr<const ScorerModel> model;
    if (!m.checkpoint.empty()) {
        std::vector<std::string> names;
        model = std::make_shared<const ScorerModel>(load_checkpoint(m.checkpoint, &names));
        if (!names.empty()) {
            align_classes(eval, names);
        } else if (eval.num_classes() != model->num_classes()) {
            throw Error("checkpoint has " + std::to_string(model->num_classes()) + " classes, dataset has " +
                        std::to_string(eval.num_classes()));
        }
        h.name = fs::path(m.checkpoint).stem().string();
    } else {
        Dataset tr = load_train(m, d, c);
        align_classes(eval, tr.class_names);
        const auto mc = model_config(m, tr.num_classes());
        PipelineOptions p;
        p.out_h = p.out_w = m.input_size;
        p.jobs = c.jobs;
        std::cerr << "training micro-model on " << tr.size() << " images" << std::endl;
        model = std::make_shared<const ScorerModel>(train_on_pipeline(make_scorer(mc, c.seed + 2), tr, train_config(m, c.seed), p));
        h.name = "micro";
    }
    h.input_shape = model->input_shape;
    h.grad = model_gradfn(model);
    h.logits = model_logitfn(model);
    h.keepalive = std::const_pointer_cast<ScorerModel>(model);
    return h;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_manifest(const fs::path& out, const CLI::App* sub, const std::vector<std::string>& outputs) {
    json j;
    j["tool"] = "igprobe";
    j["subcommand"] = sub->get_name();
    j["config"] = options_json(sub);
    j["outputs"] = outputs;
    write_file(out / "manifest.json", j.dump(2) + "\n");
}

std::string file_stem_for(const std::string& id) {
    std::string s = fs::path(id).replace_extension().string();
    for (char& ch : s)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
    return s.empty() ? "image" : s;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_degrade(const CLI::App* sub, const Common& c, const std::string& input, const std::vector<std::string>& qraw,
                const std::string& format, int subsample_below) {
    const auto qs = parse_qualities(qraw);
    const ImageBuf img = read_image(input);
    fs::create_directories(c.out_dir);
    JpegOptions jo;
    jo.subsample_below = subsample_below;
    std::ostringstream csv;
    csv << "quality,psnr_db,file\n";
    std::vector<std::string> outputs;
    const std::string stem = fs::path(input).stem().string();
    for (const auto& q : qs) {
        const ImageBuf out = degrade_jpeg(img, q, jo);
        const std::string name = stem + "_" + q.token() + "." + format;
        write_image(fs::path(c.out_dir) / name, out);
        const double p = psnr(img, out);
        csv << q.token() << ',' << (std::isinf(p) ? std::string("inf") : fixed(p, 4)) << ',' << name << '\n';
        std::cout << q.label() << ": " << (std::isinf(p) ? std::string("inf") : fixed(p, 2)) << " dB -> " << name << '\n';
        outputs.push_back(name);
    }
    write_file(fs::path(c.out_dir) / "degrade.csv", csv.str());
    outputs.push_back("degrade.csv");
    write_manifest(c.out_dir, sub, outputs);
    return 0;
}

int cmd_train(const CLI::App* sub, const Common& c, const DataArgs& d, const ModelArgs& m) {
    const Dataset tr = d.data_dir.empty() ? gen_synthetic(c.seed, d.classes, d.per_class, d.side) : load_dataset(d.data_dir);
    const Dataset data = subset(tr, d.limit);
    const auto mc = model_config(m, data.num_classes());
    PipelineOptions p;
    p.out_h = p.out_w = m.input_size;
    p.jobs = c.jobs;
    std::vector<double> losses;
    const auto model = train_on_pipeline(make_scorer(mc, c.seed + 2), data, train_config(m, c.seed), p, &losses);
    fs::create_directories(c.out_dir);
    save_checkpoint(fs::path(c.out_dir) / "model.json", model, data.class_names);
    std::ostringstream log;
    log << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e) log << e + 1 << ',' << fixed(losses[e], 6) << '\n';
    write_file(fs::path(c.out_dir) / "train_log.csv", log.str());
    write_manifest(c.out_dir, sub, {"model.json", "train_log.csv"});
    std::cout << "trained on " << data.size() << " images; final mean loss "
              << (losses.empty() ? std::string("n/a") : fixed(losses.back(), 4)) << '\n';
    return 0;
}

int cmd_sweep(const CLI::App* sub, const Common& c, const DataArgs& d, const ModelArgs& m,
              const std::vector<std::string>& qraw, const std::string& metric, const std::string& model_name) {
    SweepOptions so;
    so.qualities = parse_qualities(qraw);
    so.metric = metric_from_string(metric);
    so.jobs = c.jobs;
    Dataset eval = load_eval(d, c);
    const auto model = obtain_model(m, d, c, eval);
    so.out_h = model.input_shape.at(0);
    so.out_w = model.input_shape.at(1);
    so.model_name = model_name.empty() ? model.name : model_name;
    const auto table = sweep_precision(model.logits, eval, so);
    fs::create_directories(c.out_dir);
    const fs::path out = c.out_dir;
    write_file(out / "precision.csv", emit_table(table, TableFormat::csv));
    write_file(out / "precision_long.csv", emit_table_long(table));
    write_file(out / "precision.md", emit_table(table, TableFormat::markdown));
    write_file(out / "precision.svg", emit_chart_svg(table));
    write_manifest(out, sub, {"precision.csv", "precision_long.csv", "precision.md", "precision.svg"});
    std::cout << emit_table(table, TableFormat::markdown);
    return 0;
}

json map_json(const AttributionResult& r, const AttributionDetail& det, const PolarityMaps& pol, const std::string& image_file) {
    const auto px = pixel_attribution(det.map);
    const auto rep = completeness_report(det.map);
    return {{"id", r.record.id},
            {"quality", det.quality.token()},
            {"shape", det.map.values.shape()},
            {"ig", det.map.values.vec()},
            {"pixel_ig", px.values.vec()},
            {"polarity_scale", pol.scale},
            {"sum", det.map.sum},
            {"loss_baseline", det.map.loss_baseline},
            {"loss_target", det.map.loss_target},
            {"gap", rep.gap},
            {"rel_gap", rep.rel_gap},
            {"image", image_file}};
}

int cmd_attribute(const CLI::App* sub, const Common& c, const DataArgs& d, const ModelArgs& m,
                  const std::vector<std::string>& qraw, int steps, const std::string& scheme, const OverlaySpec& ospec) {
    AttributeOptions ao;
    ao.qualities = parse_qualities(qraw);
    ao.steps = steps;
    ao.scheme = quadrature_from_string(scheme);
    ao.jobs = c.jobs;
    Dataset eval = load_eval(d, c);
    const auto model = obtain_model(m, d, c, eval);
    ao.out_h = model.input_shape.at(0);
    ao.out_w = model.input_shape.at(1);
    const auto results = attribute_batch(model.grad, eval, ao);

    const fs::path out = c.out_dir;
    fs::create_directories(out / "maps");
    fs::create_directories(out / "overlays");
    write_file(out / "attribution.csv", attribution_csv(results, ao.qualities));
    write_file(out / "completeness.csv", completeness_csv(results));
    std::size_t overlays = 0;
    for (const auto& r : results) {
        const std::string stem = file_stem_for(r.record.id);
        const std::string image_file = stem + "_original.ppm";
        write_ppm(out / "maps" / image_file, r.baseline);
        for (const auto& det : r.details) {
            const auto pol = split_polarity(pixel_attribution(det.map));
            const std::string base = stem + "_" + det.quality.token();
            write_file(out / "maps" / (base + ".json"), map_json(r, det, pol, image_file).dump() + "\n");
            for (auto mode : {Polarity::negative, Polarity::positive, Polarity::both}) {
                OverlaySpec s = ospec;
                s.polarity = mode;
                write_ppm(out / "overlays" / (base + "_" + to_string(mode) + ".ppm"), render_overlay(r.baseline, pol, s));
                ++overlays;
            }
        }
    }
    write_manifest(out, sub, {"attribution.csv", "completeness.csv", "maps/", "overlays/"});
    std::cout << "attributed " << results.size() << " images, wrote " << overlays << " overlays\n";
    return 0;
}

int cmd_overlay(const CLI::App* sub, const Common& c, std::string maps_dir, const std::string& polarity, const OverlaySpec& base) {
    if (maps_dir.empty()) maps_dir = (fs::path(c.out_dir) / "maps").string();
    if (!fs::is_directory(maps_dir)) throw Error("no attribution maps directory at " + maps_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(maps_dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no attribution maps in " + maps_dir);
    const fs::path out = fs::path(c.out_dir) / "overlays";
    fs::create_directories(out);
    std::vector<Polarity> modes;
    if (polarity == "all") modes = {Polarity::negative, Polarity::positive, Polarity::both};
    else modes = {polarity_from_string(polarity)};
    std::size_t n = 0;
    for (const auto& f : files) {
        json j;
        try {
            j = json::parse(read_file(f));
            AttributionMap px;
            const auto shape = j.at("shape").get<Shape>();
            if (shape.size() != 3) throw Error("map shape must be HxWxC");
            px.values = Tensor({shape[0], shape[1], 1}, j.at("pixel_ig").get<std::vector<double>>());
            const ImageBuf img = read_image(fs::path(maps_dir) / j.at("image").get<std::string>());
            const auto pol = split_polarity(px);
            for (auto mode : modes) {
                OverlaySpec s = base;
                s.polarity = mode;
                write_ppm(out / (f.stem().string() + "_" + to_string(mode) + ".ppm"), render_overlay(img, pol, s));
                ++n;
            }
        } catch (const json::exception& e) {
            throw Error(f.string() + ": " + e.what());
        }
    }
    write_manifest(c.out_dir, sub, {"overlays/"});
    std::cout << "rendered " << n << " overlays from " << files.size() << " maps\n";
    return 0;
}

int cmd_verify(const CLI::App* sub, const Common& c, std::vector<int> only, std::string mock, bool write_outputs) {
    if (mock.empty()) {
        std::error_code ec;
        const auto self = fs::read_symlink("/proc/self/exe", ec);
        if (!ec) mock = (self.parent_path() / "igprobe_mock_provider").string();
    }
    VerifyOptions vo;
    vo.seed = c.seed;
    vo.jobs = c.jobs;
    vo.mock_provider_command = mock;
    std::ostringstream csv;
    csv << "id,name,result,seconds,detail\n";
    int failed = 0;
    for (const auto& check : acceptance_checks()) {
        if (!only.empty() && std::find(only.begin(), only.end(), check.id) == only.end()) continue;
        const auto r = run_check(check, vo);
        std::cout << format_check(r) << std::endl;
        csv << r.id << ',' << csv_field(r.name) << ',' << (r.passed ? "pass" : "fail") << ',' << fixed(r.seconds, 2) << ','
            << csv_field(r.detail) << '\n';
        failed += !r.passed;
    }
    std::cout << (failed ? std::to_string(failed) + " check(s) failed" : std::string("all checks passed")) << std::endl;
    if (write_outputs) {
        fs::create_directories(c.out_dir);
        write_file(fs::path(c.out_dir) / "verify.csv", csv.str());
        write_manifest(c.out_dir, sub, {"verify.csv"});
    }
    return failed ? 1 : 0;
}

int cmd_report(const CLI::App* sub, const Common& c, const std::string& input, const ChartSpec& chart) {
    const auto table = parse_table(read_file(input));
    const fs::path out = c.out_dir;
    fs::create_directories(out);
    write_file(out / "precision.csv", emit_table(table, TableFormat::csv));
    write_file(out / "precision_long.csv", emit_table_long(table));
    write_file(out / "precision.md", emit_table(table, TableFormat::markdown));
    write_file(out / "precision.svg", emit_chart_svg(table, chart));
    write_manifest(out, sub, {"precision.csv", "precision_long.csv", "precision.md", "precision.svg"});
    std::cout << emit_table(table, TableFormat::markdown);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"igprobe: JPEG degradation sweeps and integrated-gradients attribution", "igprobe"};
    app.option_defaults()->always_capture_default();
    app.config_formatter(std::make_shared<JsonConfig>(&app));
    app.set_config("--config", "", "JSON file with option values; command-line flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    DataArgs data;
    ModelArgs model;
    std::vector<std::string> qualities{"original", "75", "50", "25"};
    std::string metric = "macro_precision", model_name, scheme = "trapezoid", polarity = "all";
    int steps = kDefaultSteps, subsample_below = JpegOptions{}.subsample_below;
    OverlaySpec ospec;
    ChartSpec chart;

    auto* degrade = app.add_subcommand("degrade", "JPEG-degrade one image at each quality and report PSNR");
    std::string input, format = "ppm";
    add_common(degrade, common);
    degrade->add_option("--input", input, "Image to degrade (PPM or PNG)")->required();
    degrade->add_option("--qualities", qualities, "Quality levels: 'original' or 1..100")->delimiter(',');
    degrade->add_option("--format", format, "Output image format")->check(CLI::IsMember({"ppm", "png"}));
    degrade->add_option("--subsample-below", subsample_below, "Use 4:2:0 chroma below this quality");

    auto* train_cmd = app.add_subcommand("train", "Train the micro-model and write model.json");
    add_common(train_cmd, common);
    add_data(train_cmd, data);
    add_model_shape(train_cmd, model);

    auto* sweep = app.add_subcommand("sweep", "Precision at each quality: precision.{csv,md,svg}");
    add_common(sweep, common);
    add_data(sweep, data);
    add_model_source(sweep, model);
    sweep->add_option("--qualities", qualities, "Quality levels, must include original")->delimiter(',');
    sweep->add_option("--metric", metric, "Score")->check(CLI::IsMember({"macro_precision", "accuracy"}));
    sweep->add_option("--model-name", model_name, "Row label in the table");

    auto* attribute = app.add_subcommand("attribute", "Integrated gradients from original to degraded images");
    add_common(attribute, common);
    add_data(attribute, data);
    add_model_source(attribute, model);
    attribute->add_option("--qualities", qualities, "Quality levels, must include original")->delimiter(',');
    attribute->add_option("--steps", steps, "Path steps N")->check(CLI::PositiveNumber);
    attribute->add_option("--scheme", scheme, "Quadrature")->check(CLI::IsMember({"trapezoid", "riemann_right"}));
    attribute->add_option("--image-weight", ospec.image_weight, "Overlay image weight");
    attribute->add_option("--ig-weight", ospec.ig_weight, "Overlay attribution weight");

    auto* overlay = app.add_subcommand("overlay", "Re-render overlays from stored attribution maps");
    std::string maps_dir;
    add_common(overlay, common);
    overlay->add_option("--maps", maps_dir, "Directory of map JSON files (default: <out>/maps)");
    overlay->add_option("--polarity", polarity, "Polarity to render")->check(CLI::IsMember({"negative", "positive", "both", "all"}));
    overlay->add_option("--image-weight", ospec.image_weight, "Overlay image weight");
    overlay->add_option("--ig-weight", ospec.ig_weight, "Overlay attribution weight");

    auto* verify = app.add_subcommand("verify", "Run the acceptance suite and print one line per check");
    std::vector<int> only;
    std::string mock;
    bool write_outputs = false;
    add_common(verify, common);
    verify->add_option("--only", only, "Run only these check ids")->delimiter(',');
    verify->add_option("--mock-provider", mock, "Mock provider executable (default: next to this binary)");
    verify->add_flag("--write", write_outputs, "Also write verify.csv and a manifest to --out");

    auto* report = app.add_subcommand("report", "Re-render tables and chart from a stored precision table");
    std::string table_in;
    add_common(report, common);
    report->add_option("--input", table_in, "precision.csv or precision.md")->required();
    report->add_option("--title", chart.title, "Chart title");

    if (argc > 1 && argv[1][0] != '-') {
        bool known = false;
        for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == argv[1];
        if (!known) {
            std::cerr << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
            return 2;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::string where = "igprobe";
        for (const auto* sub : app.get_subcommands()) where += " " + sub->get_name();
        std::cerr << "run '" << where << " --help' for usage\n";
        return 2;
    }

    try {
        if (degrade->parsed()) return cmd_degrade(degrade, common, input, qualities, format, subsample_below);
        if (train_cmd->parsed()) return cmd_train(train_cmd, common, data, model);
        if (sweep->parsed()) return cmd_sweep(sweep, common, data, model, qualities, metric, model_name);
        if (attribute->parsed()) return cmd_attribute(attribute, common, data, model, qualities, steps, scheme, ospec);
        if (overlay->parsed()) return cmd_overlay(overlay, common, maps_dir, polarity, ospec);
        if (verify->parsed()) return cmd_verify(verify, common, only, mock, write_outputs);
        if (report->parsed()) return cmd_report(report, common, table_in, chart);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    std::cerr << app.help();
    return 2;
}
