#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string output;  // stdout and stderr together
};

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("igprobe_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Run run(const std::string& args, const std::string& env = "") {
    const fs::path log = fs::temp_directory_path() / ("igprobe_cli_log_" + std::to_string(::getpid()));
    const std::string cmd = env + " " + IGPROBE_CLI + " " + args + " >" + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "<missing " + p.string() + ">";
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string l; std::getline(ss, l);) out.push_back(l);
    return out;
}

// Small enough to run in a couple of seconds.
const std::string kTiny =
    " --classes 2 --per-class 4 --side 16 --input-size 16 --hidden 8 --embed-dim 4 --epochs 1 --batch 4";

bool has(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

}  // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
    const auto r = run("bogus");
    EXPECT_EQ(r.status, 2);
    EXPECT_TRUE(has(r.output, "unknown subcommand 'bogus'")) << r.output;
    EXPECT_TRUE(has(r.output, "sweep")) << r.output;
}

TEST(Cli, BadOptionValueIsUsageError) {
    const auto dir = scratch("badopt");
    const auto r = run("train --epochs abc --out " + dir.string());
    EXPECT_EQ(r.status, 2) << r.output;
    EXPECT_TRUE(has(r.output, "--epochs")) << r.output;
}

TEST(Cli, MissingDataIsRuntimeError) {
    const auto dir = scratch("missing");
    const auto r = run("sweep --data " + (dir / "nope").string() + " --out " + dir.string() + kTiny);
    EXPECT_EQ(r.status, 1) << r.output;
    EXPECT_TRUE(has(r.output, "labels.csv")) << r.output;
}

TEST(Cli, SweepWritesTablesAndManifest) {
    const auto dir = scratch("sweep");
    const auto r = run("sweep --out " + dir.string() + kTiny);
    ASSERT_EQ(r.status, 0) << r.output;
    const auto csv = lines(slurp(dir / "precision.csv"));
    ASSERT_EQ(csv.size(), 2u);
    EXPECT_EQ(csv[0], "model,Original,Quality 75,Quality 50,Quality 25");
    EXPECT_TRUE(has(slurp(dir / "precision.svg"), "<polyline"));
    EXPECT_TRUE(has(slurp(dir / "precision.md"), "| model |"));
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["subcommand"], "sweep");
    EXPECT_EQ(m["config"]["classes"], 2);
    EXPECT_FALSE(m["outputs"].empty());
}

TEST(Cli, OutputsAreByteIdenticalAcrossRunsAndJobs) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    ASSERT_EQ(run("sweep --jobs 1 --out " + a.string() + kTiny).status, 0);
    ASSERT_EQ(run("sweep --jobs 3 --out " + b.string() + kTiny).status, 0);
    for (const char* f : {"precision.csv", "precision.md", "precision.svg", "precision_long.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, AttributeOneImage) {
    const auto dir = scratch("attr");
    const auto r = run("attribute --limit 1 --qualities original,25 --steps 8 --out " + dir.string() + kTiny);
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(lines(slurp(dir / "attribution.csv")).size(), 2u);
    std::size_t overlays = 0;
    for (const auto& e : fs::directory_iterator(dir / "overlays")) overlays += e.path().extension() == ".ppm";
    EXPECT_EQ(overlays, 3u);

    // re-render from the stored maps
    const auto again = run("overlay --polarity positive --out " + dir.string());
    EXPECT_EQ(again.status, 0) << again.output;
}

TEST(Cli, ConfigFileWithFlagOverride) {
    const auto dir = scratch("config");
    {
        nlohmann::json cfg = {{"classes", 3}, {"per-class", 2}, {"side", 16}, {"input-size", 16}, {"hidden", {8}},
                              {"embed-dim", 4}, {"epochs", 1}, {"steps", 4},  // steps belongs to attribute only
                              {"sweep", {{"model-name", "from-config"}}}};
        std::ofstream(dir / "cfg.json") << cfg.dump();
    }
    const auto r = run("sweep --config " + (dir / "cfg.json").string() + " --classes 2 --out " + dir.string());
    ASSERT_EQ(r.status, 0) << r.output;
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["config"]["classes"], 2);
    EXPECT_EQ(m["config"]["per-class"], 2);
    EXPECT_TRUE(has(slurp(dir / "precision.csv"), "\nfrom-config,"));

    std::ofstream(dir / "bad.json") << R"({"no-such-option": 1})";
    const auto bad = run("sweep --config " + (dir / "bad.json").string() + " --out " + dir.string());
    EXPECT_EQ(bad.status, 2) << bad.output;
}

TEST(Cli, OutDirFromEnvironment) {
    const auto dir = scratch("env");
    const auto ok = run("train" + kTiny, "IGPROBE_OUT_DIR=" + dir.string());
    ASSERT_EQ(ok.status, 0) << ok.output;
    EXPECT_TRUE(fs::exists(dir / "model.json"));
    EXPECT_TRUE(fs::exists(dir / "train_log.csv"));
}

TEST(Cli, ReportRoundTrip) {
    const auto dir = scratch("report");
    std::ofstream(dir / "in.csv") << "model,Original,Quality 75,Quality 50,Quality 25\n"
                                     "ResNet50,0.7141,0.5457,0.4689,0.3562\n";
    const auto r = run("report --input " + (dir / "in.csv").string() + " --out " + (dir / "o").string());
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(slurp(dir / "o" / "precision.csv"), slurp(dir / "in.csv"));
    const auto md = run("report --input " + (dir / "o" / "precision.md").string() + " --out " + (dir / "p").string());
    ASSERT_EQ(md.status, 0) << md.output;
    EXPECT_EQ(slurp(dir / "p" / "precision.csv"), slurp(dir / "in.csv"));
    EXPECT_EQ(slurp(dir / "p" / "precision.svg"), slurp(dir / "o" / "precision.svg"));
}

TEST(Cli, DegradeWritesOneImagePerQuality) {
    const auto dir = scratch("degrade");
    // 2x2 binary PPM
    std::ofstream(dir / "in.ppm", std::ios::binary) << "P6\n2 2\n255\n" << std::string("\x10\x20\x30\x40\x50\x60\x70\x80\x90\xa0\xb0\xc0", 12);
    const auto r = run("degrade --input " + (dir / "in.ppm").string() + " --qualities original,50,10 --out " + dir.string());
    ASSERT_EQ(r.status, 0) << r.output;
    for (const char* f : {"in_original.ppm", "in_q50.ppm", "in_q10.ppm"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_EQ(lines(slurp(dir / "degrade.csv")).size(), 4u);
}

TEST(Cli, VerifyFastChecks) {
    const auto r = run("verify --only 1,2,5,6,8,9");
    EXPECT_EQ(r.status, 0) << r.output;
    const auto ls = lines(r.output);
    ASSERT_EQ(ls.size(), 7u) << r.output;
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(ls[i].rfind("PASS", 0), 0u) << ls[i];
    EXPECT_EQ(ls.back(), "all checks passed");
}
