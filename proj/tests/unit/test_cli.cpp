#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "aide/cli.hpp"
#include "helpers.hpp"

using namespace aide;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "aide");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<nlohmann::json> lines(const std::string& text) {
    std::vector<nlohmann::json> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int exit_status(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* tiny_config_json =
    R"({"encoder_dim":4,"semantic_dim":4,"fusion_hidden":6,"patch_resize":8,"semantic_input_size":8,)"
    R"("epochs":2,"batch_size":4,"lr":0.001,"seed":3})";

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"bogus"}).code, 1);
    EXPECT_EQ(run({"score"}).code, 1);
    EXPECT_EQ(run({"perturb", "x.png", "--jpeg", "90", "--blur", "1"}).code, 1);
    EXPECT_EQ(run({"perturb", "x.png", "--jpeg", "0"}).code, 1);
    EXPECT_EQ(run({"perturb", "x.png"}).code, 1);
    EXPECT_EQ(run({"split", "m.jsonl", "--fractions", "a,b"}).code, 1);
}

TEST(Cli, DataErrorsExitTwo) {
    testutil::TempDir dir("cli_data");
    EXPECT_EQ(run({"score", (dir / "missing.aide").string(), (dir / "x.png").string()}).code, 2);
    write_text(dir / "bad.jsonl", "{not json\n");
    const auto r = run({"split", (dir / "bad.jsonl").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
    write_text(dir / "cfg.json", R"({"nope": 1})");
    write_png(dir / "img.png", testutil::random_image(64, 64, 1));
    EXPECT_EQ(run({"inspect-patches", (dir / "img.png").string(), "--config", (dir / "cfg.json").string()}).code, 2);
}

TEST(Cli, BinaryExitCodes) {
    const std::string bin = AIDE_CLI_PATH;
    EXPECT_EQ(exit_status(bin + " --help"), 0);
    EXPECT_EQ(exit_status(bin + " frobnicate"), 1);
    EXPECT_EQ(exit_status(bin + " score /nonexistent/a.aide /nonexistent/b.png"), 2);
}

TEST(Cli, GradcheckPassesWithControl) {
    const auto r = run({"gradcheck"});
    EXPECT_EQ(r.code, 0) << r.out;
    const auto js = lines(r.out);
    ASSERT_GE(js.size(), 3u);
    EXPECT_TRUE(js.back()["pass"].get<bool>());
    const auto& control = js[js.size() - 2];
    EXPECT_TRUE(control["expected_to_fail"].get<bool>());
    EXPECT_TRUE(control["pass"].get<bool>());
    EXPECT_GT(control["max_rel_error"].get<double>(), 1e-6);
}

TEST(Cli, InspectAndPerturb) {
    testutil::TempDir dir("cli_img");
    write_png(dir / "img.png", testutil::random_image(96, 64, 2));
    const auto inspect = run({"inspect-patches", (dir / "img.png").string()});
    ASSERT_EQ(inspect.code, 0) << inspect.err;
    const auto j = lines(inspect.out).at(0);
    EXPECT_EQ(j["image"], (dir / "img.png").string());
    EXPECT_EQ(j["grades"].size(), 6u);

    const auto p = run({"--out-dir", (dir / "o").string(), "perturb", (dir / "img.png").string(), "--jpeg", "75"});
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_EQ(lines(p.out).at(0)["perturbation"], "jpeg_qf75");
    const auto written = read_image(dir / "o/img_jpeg_qf75.png");
    EXPECT_EQ(written.width, 96u);
    EXPECT_EQ(written, apply_perturbation(read_image(dir / "img.png"), PerturbationSpec::jpeg(75)));
    EXPECT_EQ(run({"--out-dir", (dir / "o").string(), "perturb", (dir / "img.png").string(), "--blur", "2"}).code, 0);
    EXPECT_TRUE(fs::exists(dir / "o/img_blur_sigma2.0.png"));
}

TEST(Cli, SynthSplitTrainEvalScore) {
    testutil::TempDir dir("cli_flow");
    write_text(dir / "spec.json", R"({"count_per_class": 6, "image_size": 64, "artifact": "both", "seed": 4})");
    write_text(dir / "cfg.json", tiny_config_json);
    const auto corpus = dir / "corpus";
    ASSERT_EQ(run({"synth", (dir / "spec.json").string(), corpus.string()}).code, 0);

    // Outputs go to --out-dir; keep the split manifest beside the images so relative paths resolve.
    auto r = run({"--out-dir", corpus.string(), "--seed", "1", "split", (corpus / "manifest.jsonl").string(),
                  "--fractions", "0.5,0.25,0.25"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(r.out).size(), 12u);
    const auto split = (corpus / "split.jsonl").string();
    ASSERT_TRUE(fs::exists(split));

    r = run({"--out-dir", (dir / "run").string(), "train", split, "--config", (dir / "cfg.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto js = lines(r.out);
    ASSERT_EQ(js.size(), 3u);
    EXPECT_EQ(js[0]["epoch"], 0);
    EXPECT_EQ(js[2]["epochs"], 2);
    const auto ckpt = (dir / "run/checkpoint.aide").string();
    ASSERT_TRUE(fs::exists(ckpt));

    r = run({"--out-dir", (dir / "rep").string(), "eval", ckpt, split, "--robustness"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = lines(r.out).at(0);
    EXPECT_EQ(rep["evaluated"], load_manifest(split).split(Split::test).size());
    EXPECT_EQ(rep["robustness"].size(), 9u);
    EXPECT_TRUE(fs::exists(dir / "rep/report.json"));
    EXPECT_TRUE(fs::exists(dir / "rep/report.csv"));

    const auto img = resolve_record_path(load_manifest(split).records[0], corpus).string();
    r = run({"score", ckpt, img, "--diagnostics"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = lines(r.out).at(0);
    const double p = s["probability"];
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_TRUE(s.contains("patches"));
    EXPECT_EQ(s["embeddings"]["f_max"].size(), 4u);
    EXPECT_DOUBLE_EQ(p, restore_model(load_checkpoint(ckpt)).probability(read_image(img), img, nullptr));

    // Resuming a finished run with a longer schedule only trains the new epochs.
    std::string longer = tiny_config_json;
    longer.replace(longer.find("\"epochs\":2"), 10, "\"epochs\":3");
    write_text(dir / "cfg3.json", longer);
    r = run({"--out-dir", (dir / "run3").string(), "train", split, "--config", (dir / "cfg3.json").string(),
             "--resume", ckpt});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(r.out).size(), 2u);
}

TEST(Cli, CurateWritesKeptManifest) {
    testutil::TempDir dir("cli_curate");
    fs::create_directories(dir / "real");
    fs::create_directories(dir / "fake");
    write_png(dir / "real/a.png", testutil::solid(40, 40, 1, 2, 3));
    write_png(dir / "real/b.png", testutil::solid(20, 40, 1, 2, 3));
    write_png(dir / "fake/c.png", testutil::solid(40, 40, 1, 2, 3));
    save_manifest(build_manifest(dir.path()), dir / "m.jsonl");
    const auto r = run({"--out-dir", dir.path().string(), "curate", (dir / "m.jsonl").string(), "--min-side", "32"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto js = lines(r.out);
    ASSERT_EQ(js.size(), 3u);
    EXPECT_EQ(js[0]["id"], "fake/c.png");
    EXPECT_EQ(js[1]["reason"], "duplicate");
    EXPECT_EQ(js[2]["reason"], "resolution");
    EXPECT_EQ(load_manifest(dir / "curated.jsonl").records.size(), 1u);
}
