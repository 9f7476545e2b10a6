#pragma once

// Command-line front end. Machine-readable JSON lines go to `out`, human
// summaries and diagnostics to `err`.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 training/runtime error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aide/aide.hpp"
#include "aide/gradient_suite.hpp"

namespace aide::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, runtime = 3 };

struct RunConfig {
    std::string subcommand;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out_dir = ".";
    int verbosity = 0;
};

namespace detail {

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

inline std::vector<double> parse_fractions(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || item.empty()) throw CLI::ValidationError("--fractions", "not a number: " + item);
        out.push_back(v);
    }
    if (out.size() != 3) throw CLI::ValidationError("--fractions", "expected three comma-separated values");
    return out;
}

inline std::filesystem::path output_path(const RunConfig& rc, const std::string& name) {
    std::filesystem::create_directories(rc.out_dir);
    return rc.out_dir / name;
}

inline nlohmann::ordered_json selection_json(const PatchSelection& sel, std::size_t per_row, std::size_t n) {
    auto coords = [&](const std::vector<std::size_t>& idx) {
        auto arr = nlohmann::ordered_json::array();
        for (auto i : idx) {
            const auto row = i / per_row;
            const auto col = i % per_row;
            arr.push_back({{"index", i}, {"row", row}, {"col", col}, {"x", col * n}, {"y", row * n},
                           {"grade", sel.grades[i]}});
        }
        return arr;
    };
    nlohmann::ordered_json j;
    j["patch_n"] = n;
    j["patches_per_row"] = per_row;
    j["grades"] = sel.grades;
    j["max_patches"] = coords(sel.max_indices);
    j["min_patches"] = coords(sel.min_indices);
    return j;
}

inline std::optional<EmbeddingTable> maybe_table(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return load_embedding_table(path);
}

inline std::vector<LabeledImage> load_split_images(const DatasetManifest& m, Split split,
                                                   const std::filesystem::path& base) {
    return load_images(m.split(split), base);
}

}  // namespace detail

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"AIDE: hybrid-feature AI-generated image detector", "aide"};
    app.require_subcommand(1, 1);
    RunConfig rc;
    app.add_option("--out-dir", rc.out_dir, "Directory for every file this command writes")->capture_default_str();
    app.add_option("--seed", rc.seed, "Override the configured seed");
    app.add_flag("-v,--verbose", rc.verbosity, "More progress output on stderr");

    // curate
    std::string curate_manifest_path;
    std::size_t min_side = 448;
    auto* curate = app.add_subcommand("curate", "Drop low-resolution and pixel-duplicate images");
    curate->add_option("manifest", curate_manifest_path)->required();
    curate->add_option("--min-side", min_side)->capture_default_str();

    // synth
    std::string synth_spec_path, synth_out;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic real/fake corpus");
    synth->add_option("spec", synth_spec_path)->required();
    synth->add_option("out", synth_out)->required();

    // split
    std::string split_manifest_path, fractions_text = "0.8,0.1,0.1";
    auto* split = app.add_subcommand("split", "Assign stratified train/val/test splits");
    split->add_option("manifest", split_manifest_path)->required();
    split->add_option("--fractions", fractions_text)->capture_default_str();

    // train
    std::string train_manifest_path, embeddings_path, resume_path;
    auto* train = app.add_subcommand("train", "Train a detector and write checkpoint.aide");
    train->add_option("manifest", train_manifest_path)->required();
    train->add_option("--config", rc.config_path, "Model configuration JSON");
    train->add_option("--embeddings", embeddings_path, "AIDE-EMB1 embedding table");
    train->add_option("--resume", resume_path, "Continue from a checkpoint");

    // eval
    std::string eval_ckpt, eval_manifest, eval_split = "test";
    bool robustness = false, ablation = false, hyper_grid = false;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
    eval->add_option("checkpoint", eval_ckpt)->required();
    eval->add_option("manifest", eval_manifest)->required();
    eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
    eval->add_option("--embeddings", embeddings_path);
    eval->add_flag("--robustness", robustness, "JPEG QF 95/90/75/50 and blur sigma 1-4 sweep");
    eval->add_flag("--ablation", ablation, "Retrain and evaluate the seven branch variants");
    eval->add_flag("--hyper-grid", hyper_grid, "With --ablation: sweep patch size and selection count");

    // score
    std::string score_ckpt, score_image, score_id;
    bool diagnostics = false;
    auto* score = app.add_subcommand("score", "Probability that one image is AI-generated");
    score->add_option("checkpoint", score_ckpt)->required();
    score->add_option("image", score_image)->required();
    score->add_option("--id", score_id, "Embedding-table id (defaults to the image path)");
    score->add_option("--embeddings", embeddings_path);
    score->add_flag("--diagnostics", diagnostics, "Include grades, selected patches and embeddings");

    // perturb
    std::string perturb_image;
    std::optional<int> jpeg_qf;
    std::optional<double> blur_sigma;
    auto* perturb = app.add_subcommand("perturb", "Write a JPEG-recompressed or blurred copy of an image");
    perturb->add_option("image", perturb_image)->required();
    auto* jpeg_opt = perturb->add_option("--jpeg", jpeg_qf, "Quality factor")->check(CLI::Range(1, 100));
    auto* blur_opt = perturb->add_option("--blur", blur_sigma, "Gaussian sigma")->check(CLI::PositiveNumber);
    jpeg_opt->excludes(blur_opt);

    // inspect-patches
    std::string inspect_image;
    auto* inspect = app.add_subcommand("inspect-patches", "Patch grades and selected extreme patches as JSON");
    inspect->add_option("image", inspect_image)->required();
    inspect->add_option("--config", rc.config_path);

    // gradcheck
    double tolerance = 1e-6;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every layer and the model");
    gradcheck->add_option("--tolerance", tolerance)->capture_default_str();

    try {
        std::vector<std::string> args;
        for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return usage;
    }

    auto load_cfg = [&] {
        AideConfig cfg = rc.config_path.empty() ? AideConfig{} : load_config(rc.config_path);
        if (rc.seed) cfg.seed = *rc.seed;
        return cfg;
    };

    try {
        if (*curate) {
            const auto manifest = load_manifest(curate_manifest_path);
            const auto base = std::filesystem::path(curate_manifest_path).parent_path();
            const auto result = curate_manifest(manifest, min_side, base);
            for (const auto& r : result.kept.records) out << nlohmann::json{{"id", r.id}, {"status", "kept"}}.dump() << "\n";
            for (const auto& d : result.dropped) {
                out << nlohmann::json{{"id", d.record.id}, {"status", "dropped"}, {"reason", d.reason}, {"detail", d.detail}}
                           .dump()
                    << "\n";
            }
            save_manifest(result.kept, detail::output_path(rc, "curated.jsonl"));
            err << "kept " << result.kept.records.size() << ", dropped " << result.dropped.size() << "\n";
        } else if (*synth) {
            std::ifstream in(synth_spec_path);
            if (!in) throw ConfigError("cannot open " + synth_spec_path);
            auto spec = synth_spec_from_json(nlohmann::json::parse(in));
            if (rc.seed) spec.seed = *rc.seed;
            const auto m = make_synthetic_dataset(spec, synth_out);
            out << nlohmann::json{{"manifest", (std::filesystem::path(synth_out) / "manifest.jsonl").string()},
                                  {"records", m.records.size()}}
                       .dump()
                << "\n";
        } else if (*split) {
            const auto f = detail::parse_fractions(fractions_text);
            const auto manifest = load_manifest(split_manifest_path);
            const auto result = split_manifest(manifest, {f[0], f[1], f[2]}, rc.seed.value_or(0));
            for (const auto& w : result.warnings) err << "warning: " << w << "\n";
            out << manifest_to_jsonl(result.manifest);
            save_manifest(result.manifest, detail::output_path(rc, "split.jsonl"));
        } else if (*train) {
            const auto cfg = load_cfg();
            const auto table = detail::maybe_table(embeddings_path);
            const auto manifest = load_manifest(train_manifest_path);
            const auto base = std::filesystem::path(train_manifest_path).parent_path();
            std::optional<Checkpoint> resume;
            if (!resume_path.empty()) resume = load_checkpoint(resume_path);
            TrainOptions opts;
            opts.on_epoch = [&](std::size_t epoch, double loss) {
                out << nlohmann::json{{"epoch", epoch}, {"mean_loss", loss}}.dump() << "\n";
                if (rc.verbosity) err << "epoch " << epoch << " loss " << loss << "\n";
            };
            const auto ckpt = train_model(manifest, cfg, table ? &*table : nullptr, base, resume ? &*resume : nullptr, opts);
            const auto path = detail::output_path(rc, "checkpoint.aide");
            save_checkpoint(ckpt, path);
            out << nlohmann::json{{"checkpoint", path.string()}, {"epochs", ckpt.epochs_completed}, {"lr", ckpt.config.lr}}.dump()
                << "\n";
        } else if (*eval) {
            const auto ckpt = load_checkpoint(eval_ckpt);
            const auto model = restore_model(ckpt);
            const auto table = detail::maybe_table(embeddings_path);
            const auto* tp = table ? &*table : nullptr;
            const auto manifest = load_manifest(eval_manifest);
            const auto base = std::filesystem::path(eval_manifest).parent_path();
            const auto images = detail::load_split_images(manifest, split_from_string(eval_split), base);
            auto report = evaluate(model, images, tp);
            if (robustness) robustness_sweep(model, images, tp, report);
            if (ablation) {
                AblationOptions ao;
                ao.hyper_grid = hyper_grid;
                const auto train_images = detail::load_split_images(manifest, Split::train, base);
                AideConfig cfg = ckpt.config;
                if (rc.seed) cfg.seed = *rc.seed;
                report.ablation = ablation_suite(train_images, images, cfg, tp, ao);
            }
            report.timestamp = detail::utc_timestamp();
            out << report_to_json(report).dump() << "\n";
            if (rc.out_dir != ".") {
                std::ofstream(detail::output_path(rc, "report.json")) << report_to_json(report).dump(2) << "\n";
                std::ofstream(detail::output_path(rc, "report.csv")) << report_to_csv(report);
            }
            err << "overall acc " << report.overall_acc << "% over " << report.evaluated << " images\n";
        } else if (*score) {
            const auto model = restore_model(load_checkpoint(score_ckpt));
            const auto table = detail::maybe_table(embeddings_path);
            const auto img = read_image(score_image);
            const std::string id = score_id.empty() ? score_image : score_id;
            const auto d = model.forward(img, id, table ? &*table : nullptr);
            nlohmann::ordered_json j{{"id", id}, {"probability", d.probability}};
            if (diagnostics) {
                j["logit"] = d.logit;
                if (!d.selection.grades.empty()) j["patches"] = detail::selection_json(d.selection, d.patches_per_row, d.patch_n);
                j["embeddings"] = {{"f_max", d.embeddings.f_max.data},
                                   {"f_min", d.embeddings.f_min.data},
                                   {"f_s", d.embeddings.f_s.data}};
            }
            out << j.dump() << "\n";
        } else if (*perturb) {
            if (!jpeg_qf && !blur_sigma) {
                err << "error: perturb needs --jpeg QF or --blur SIGMA\n\n" << perturb->help();
                return usage;
            }
            const auto spec = jpeg_qf ? PerturbationSpec::jpeg(*jpeg_qf) : PerturbationSpec::blur(*blur_sigma);
            const auto result = apply_perturbation(read_image(perturb_image), spec);
            const auto path = detail::output_path(
                rc, std::filesystem::path(perturb_image).stem().string() + "_" + spec.label() + ".png");
            write_png(path, result);
            out << nlohmann::json{{"output", path.string()}, {"perturbation", spec.label()}}.dump() << "\n";
        } else if (*inspect) {
            const auto cfg = load_cfg();
            const auto img = read_image(inspect_image);
            const auto patches = patchify(img, cfg.patch_n);
            const auto sel = select_extreme_patches(patches, build_band_filter_bank(cfg.patch_n, cfg.k_bands), cfg.k_select);
            auto j = detail::selection_json(sel, img.width / cfg.patch_n, cfg.patch_n);
            j["image"] = inspect_image;
            out << j.dump() << "\n";
        } else if (*gradcheck) {
            const auto results = run_gradient_suite(rc.seed.value_or(1), tolerance);
            bool all_ok = true;
            double max_err = 0.0;
            for (const auto& r : results) {
                const bool control = r.name.rfind("negative control", 0) == 0;
                const bool pass = control ? !r.report.passed : r.report.passed;
                all_ok = all_ok && pass;
                if (!control) max_err = std::max(max_err, r.report.max_rel_error);
                out << nlohmann::json{{"check", r.name},
                                      {"max_rel_error", r.report.max_rel_error},
                                      {"entries", r.report.entries_checked},
                                      {"worst_param", r.report.worst_param},
                                      {"worst_analytic", r.report.worst_analytic},
                                      {"worst_numeric", r.report.worst_numeric},
                                      {"expected_to_fail", control},
                                      {"pass", pass}}
                           .dump()
                    << "\n";
            }
            out << nlohmann::json{{"max_rel_error", max_err}, {"tolerance", tolerance}, {"pass", all_ok}}.dump() << "\n";
            return all_ok ? ok : runtime;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == Error::Kind::runtime ? runtime : data;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return data;
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return data;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return runtime;
    }
    return ok;
}

}  // namespace aide::cli
