#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"

using namespace aide;

namespace {

AideConfig small_config(std::uint64_t seed = 3) {
    AideConfig c;
    c.encoder_dim = 8;
    c.semantic_dim = 6;
    c.fusion_hidden = 10;
    c.patch_resize = 16;
    c.semantic_input_size = 16;
    c.seed = seed;
    return c;
}

std::vector<LabeledImage> small_corpus(std::size_t per_class, SynthArtifact artifact, std::uint64_t seed = 5) {
    SynthSpec spec;
    spec.count_per_class = per_class;
    spec.image_size = 64;
    spec.artifact = artifact;
    spec.seed = seed;
    std::vector<LabeledImage> out;
    for (std::size_t i = 0; i < per_class; ++i) {
        out.push_back({"real_" + std::to_string(i), "camera", Label::real, synthesize_base(spec, Label::real, i)});
        out.push_back({"fake_" + std::to_string(i), "gen", Label::fake, synthesize_fake(spec, i).image});
    }
    return out;
}

EmbeddingTable random_table(const std::vector<std::string>& ids, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<float> d;
    EmbeddingTable t(dim);
    for (const auto& id : ids) {
        std::vector<float> v(dim);
        for (auto& x : v) x = d(gen);
        t.insert(id, v);
    }
    return t;
}

// Independent AIDE-EMB1 writer used as the format oracle.
std::vector<std::uint8_t> raw_table(const std::vector<std::pair<std::string, std::vector<float>>>& recs, std::uint32_t dim) {
    std::vector<std::uint8_t> b = {'A', 'I', 'D', 'E', '-', 'E', 'M', 'B', '1'};
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    u32(static_cast<std::uint32_t>(recs.size()));
    u32(dim);
    for (const auto& [id, vec] : recs) {
        b.push_back(static_cast<std::uint8_t>(id.size() & 0xff));
        b.push_back(static_cast<std::uint8_t>(id.size() >> 8));
        b.insert(b.end(), id.begin(), id.end());
        for (float f : vec) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            u32(bits);
        }
    }
    return b;
}

}  // namespace

TEST(Config, DefaultsAndJsonRoundTrip) {
    const AideConfig d;
    EXPECT_EQ(d.patch_n, 32u);
    EXPECT_EQ(d.k_bands, 6u);
    EXPECT_EQ(d.k_select, 2u);
    EXPECT_EQ(d.patch_resize, 64u);
    EXPECT_EQ(d.epochs, 5u);
    EXPECT_EQ(d.batch_size, 32u);
    EXPECT_DOUBLE_EQ(d.lr, 1e-4);
    EXPECT_DOUBLE_EQ(d.augment_prob, 0.1);
    EXPECT_EQ(config_from_json(nlohmann::json::object()).epochs, 5u);

    auto c = small_config();
    c.ablation = Ablation::l_plus_sfe;
    c.srm_normalizers = std::array<double, 3>{2.0, 6.0, 1.0};
    EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(config_from_json({{"patch_size", 32}}), ConfigError);
    EXPECT_THROW(config_from_json({{"k_select", 0}}), ConfigError);
    EXPECT_THROW(config_from_json({{"patch_n", 4}, {"k_bands", 8}}), ConfigError);
    EXPECT_THROW(config_from_json({{"ablation", "pfe_x"}}), ConfigError);
    EXPECT_THROW(config_from_json({{"srm_kernels", std::vector<std::vector<double>>(3, std::vector<double>(25, 1.0))}}),
                 Error);
}

TEST(Model, EmbeddingShapes) {
    const AideModel model(small_config());
    const auto img = testutil::random_image(80, 70, 1);
    const auto d = model.forward(img, "x", nullptr);
    EXPECT_EQ(d.embeddings.f_max.shape, (nn::Shape{8}));
    EXPECT_EQ(d.embeddings.f_min.shape, (nn::Shape{8}));
    EXPECT_EQ(d.embeddings.f_s.shape, (nn::Shape{6}));
    EXPECT_GT(d.probability, 0.0);
    EXPECT_LT(d.probability, 1.0);
    EXPECT_EQ(d.patches_per_row, 2u);
    EXPECT_NEAR(d.probability, nn::sigmoid(d.logit), 1e-15);
}

TEST(Model, InsufficientPatchesPropagates) {
    const AideModel model(small_config());
    EXPECT_THROW(model.forward(testutil::random_image(96, 32, 1), "x", nullptr), InsufficientPatchesError);
}

TEST(Model, ConstantImageSelectsFirstPatchesDeterministically) {
    const auto img = testutil::solid(64, 64, 90, 90, 90);
    const AideModel a(small_config(11)), b(small_config(11));
    const auto da = a.forward(img, "c", nullptr), db = b.forward(img, "c", nullptr);
    EXPECT_EQ(da.selection.max_indices, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(da.selection.min_indices, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(da.embeddings.f_max, db.embeddings.f_max);
    EXPECT_EQ(da.embeddings.f_min, db.embeddings.f_min);
    EXPECT_EQ(da.probability, db.probability);
}

TEST(Model, SingleSelectedPatchNeedsNoAveraging) {
    auto cfg = small_config();
    cfg.k_select = 1;
    const AideModel model(cfg);
    const auto img = testutil::random_image(64, 32, 21);
    const auto in = model.prepare(img, Ablation::full);
    const auto e = model.embed(in, "x", nullptr, Ablation::full, nullptr);

    const auto patches = patchify(img, 32);
    auto direct = [&](const nn::Sequential& enc, std::size_t idx) {
        const auto resized = resize_image(patches[idx].pixels, 16, 16, ResizeMethod::bilinear);
        return enc.forward(model.params(), residual_tensor(resized, model.srm_kernels()));
    };
    EXPECT_EQ(e.f_max, direct(model.f1(), in.selection->max_indices[0]));
    EXPECT_EQ(e.f_min, direct(model.f2(), in.selection->min_indices[0]));
}

TEST(Model, EmbeddedTableIdentityProjection) {
    auto cfg = small_config();
    cfg.semantic_source = SemanticSource::embedded_table;
    cfg.embedding_dim = 6;
    AideModel model(cfg);
    auto& store = model.params();
    auto& w = store[store.index_of("g.weight")].value;
    w.fill(0.0);
    for (std::size_t i = 0; i < 6; ++i) w.data[i * 6 + i] = 1.0;
    EmbeddingTable table(6);
    table.insert("img", {1.5f, -2.0f, 0.25f, 3.0f, 0.0f, -0.5f});
    const auto e = model.embed(model.prepare(testutil::random_image(64, 64, 1), Ablation::full), "img", &table,
                               Ablation::full, nullptr);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(e.f_s[i], static_cast<double>(table.at("img")[i]));

    EXPECT_THROW(model.embed({}, "missing", &table, Ablation::sfe_only, nullptr), UnknownIdError);
    EmbeddingTable wrong(4);
    wrong.insert("img", {1, 2, 3, 4});
    EXPECT_THROW(model.embed({}, "img", &wrong, Ablation::sfe_only, nullptr), ConfigError);
}

TEST(Model, TinyEncoderProjectionCommutesWithPooling) {
    const AideModel model(small_config());
    const auto in = model.prepare(testutil::solid(64, 64, 120, 60, 200), Ablation::sfe_only);
    const auto e = model.embed(in, "", nullptr, Ablation::sfe_only, nullptr);
    ASSERT_TRUE(model.semantic_encoder());
    const auto v = model.semantic_encoder()->forward(model.params(), *in.semantic_input);
    const auto& p = model.params();
    const auto pooled_then_projected =
        nn::linear(nn::avgpool_global(v), p.value(p.index_of("g.weight")), p.value(p.index_of("g.bias")));
    ASSERT_EQ(e.f_s.shape, (nn::Shape{6}));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(e.f_s[i], pooled_then_projected[i], 1e-9);
}

TEST(Fusion, MeanOfIdenticalBranchesAndSymmetry) {
    const AideModel model(small_config());
    std::mt19937_64 gen(4);
    std::normal_distribution<double> d;
    nn::Tensor a({8}), b({8}), s({6});
    for (auto* t : {&a, &b, &s})
        for (auto& v : t->data) v = d(gen);
    const auto x = model.fusion_input({a, a, s}, Ablation::full);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(x[i], a[i]);
    EXPECT_EQ(model.fuse_and_score({a, b, s}, Ablation::full), model.fuse_and_score({b, a, s}, Ablation::full));

    const auto hi = model.fusion_input({a, b, s}, Ablation::pfe_h_only);
    const auto lo = model.fusion_input({a, b, s}, Ablation::pfe_l_only);
    const auto so = model.fusion_input({a, b, s}, Ablation::sfe_only);
    const auto po = model.fusion_input({a, b, s}, Ablation::pfe_only);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(hi[i], a[i]);
        EXPECT_EQ(lo[i], b[i]);
        EXPECT_EQ(so[i], 0.0);
        EXPECT_EQ(po[i], 0.5 * (a[i] + b[i]));
    }
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(hi[8 + i], 0.0);
        EXPECT_EQ(so[8 + i], s[i]);
        EXPECT_EQ(po[8 + i], 0.0);
    }
    EXPECT_THROW(model.fuse_and_score({nn::Tensor({7}), b, s}, Ablation::full), ArgumentError);
}

TEST(Fusion, ZeroWeightsGiveBias) {
    AideModel model(small_config());
    auto& p = model.params();
    for (const char* name : {"fusion.fc1.weight", "fusion.fc1.bias", "fusion.fc2.weight"}) p[p.index_of(name)].value.fill(0.0);
    p[p.index_of("fusion.fc2.bias")].value.data[0] = -0.75;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto d = model.forward(testutil::random_image(64, 64, seed), "", nullptr);
        EXPECT_EQ(d.logit, -0.75);
    }
}

TEST(Fusion, LogitGradientMatchesFiniteDifferences) {
    nn::GradCheckOptions opts;
    opts.max_entries_per_param = 16;
    for (auto a : all_ablations) {
        const auto r = check_model_logit(a, 9, opts);
        EXPECT_TRUE(r.passed) << to_string(a) << " " << r.max_rel_error << " at " << r.worst_param;
    }
}

TEST(Ablation, SfeOnlyIgnoresPatchContent) {
    auto cfg = small_config();
    cfg.semantic_source = SemanticSource::embedded_table;
    cfg.embedding_dim = 3;
    cfg.ablation = Ablation::sfe_only;
    const AideModel model(cfg);
    EmbeddingTable table(3);
    table.insert("x", {0.1f, 0.2f, -0.3f});
    const double p0 = model.probability(testutil::random_image(64, 64, 1), "x", &table);
    const double p1 = model.probability(testutil::solid(96, 64, 3, 3, 3), "x", &table);
    EXPECT_EQ(p0, p1);
}

TEST(Model, EveryParameterReceivesGradient) {
    const AideModel model(small_config());
    const auto img = small_corpus(1, SynthArtifact::both)[1].image;
    ForwardTrace trace;
    model.logit(img, "", nullptr, Ablation::full, &trace);
    nn::Grads g(model.params());
    model.backward(trace, Ablation::full, 1.0, g);
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        double mag = 0.0;
        for (double v : g[i].data) mag += std::abs(v);
        EXPECT_GT(mag, 0.0) << model.params()[i].name;
    }
}

TEST(Train, DeterministicLossCurve) {
    const auto data = small_corpus(4, SynthArtifact::both);
    auto cfg = small_config();
    cfg.epochs = 2;
    cfg.batch_size = 3;
    cfg.augment_prob = 0.5;
    const auto a = train_model(data, cfg, nullptr);
    const auto b = train_model(data, cfg, nullptr, nullptr, TrainOptions{1, {}});
    ASSERT_EQ(a.epoch_losses.size(), 2u);
    EXPECT_EQ(a.epoch_losses, b.epoch_losses);
    EXPECT_EQ(a, b);
    EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
}

TEST(Train, LossDecreasesOnSeparableCorpus) {
    const auto data = small_corpus(12, SynthArtifact::spectral);
    auto cfg = small_config();
    cfg.lr = 1e-3;
    cfg.batch_size = 8;
    cfg.epochs = 4;
    const auto ckpt = train_model(data, cfg, nullptr);
    EXPECT_LT(ckpt.epoch_losses.back(), ckpt.epoch_losses.front());
}

TEST(Train, RejectsSingleClassAndEmpty) {
    auto data = small_corpus(3, SynthArtifact::spectral);
    std::erase_if(data, [](const LabeledImage& e) { return e.label == Label::fake; });
    EXPECT_THROW(train_model(data, small_config(), nullptr), TrainingError);
    EXPECT_THROW(train_model(std::vector<LabeledImage>{}, small_config(), nullptr), TrainingError);
}

TEST(Train, NonFiniteLossNamesBatch) {
    const auto data = small_corpus(2, SynthArtifact::spectral);
    auto cfg = small_config();
    cfg.epochs = 1;
    auto poisoned = snapshot(AideModel(cfg), 0, {});
    for (auto& p : poisoned.params)
        if (p.name == "fusion.fc2.bias") p.value.data[0] = std::nan("");
    cfg.epochs = 2;
    try {
        train_model(data, cfg, nullptr, &poisoned);
        FAIL() << "expected OptimizerError";
    } catch (const OptimizerError& e) {
        EXPECT_NE(std::string(e.what()).find("batch 0"), std::string::npos) << e.what();
    }
}

TEST(Train, EmbeddedTableModeBindsDimension) {
    const auto data = small_corpus(2, SynthArtifact::spectral);
    std::vector<std::string> ids;
    for (const auto& e : data) ids.push_back(e.id);
    const auto table = random_table(ids, 5, 1);
    auto cfg = small_config();
    cfg.semantic_source = SemanticSource::embedded_table;
    cfg.epochs = 1;
    const auto ckpt = train_model(data, cfg, &table);
    EXPECT_EQ(ckpt.config.embedding_dim, 5u);
    EXPECT_THROW(train_model(data, cfg, nullptr), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitwise) {
    testutil::TempDir dir("ckpt");
    auto cfg = small_config();
    cfg.epochs = 1;
    const auto ckpt = train_model(small_corpus(2, SynthArtifact::both), cfg, nullptr);
    save_checkpoint(ckpt, dir / "a.aide");
    const auto back = load_checkpoint(dir / "a.aide");
    EXPECT_EQ(back, ckpt);
    EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ckpt));
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        EXPECT_EQ(std::memcmp(back.params[i].value.data.data(), ckpt.params[i].value.data.data(),
                              ckpt.params[i].value.numel() * 8),
                  0);
        EXPECT_EQ(back.params[i].step_count, ckpt.params[i].step_count);
    }
    const auto img = testutil::random_image(64, 64, 3);
    EXPECT_EQ(restore_model(back).probability(img, "", nullptr), restore_model(ckpt).probability(img, "", nullptr));
}

TEST(Checkpoint, CorruptionIsDetected) {
    const auto bytes = serialize_checkpoint(snapshot(AideModel(small_config()), 0, {}));
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{13}, bytes.size() / 2, bytes.size() - 1}) {
        EXPECT_THROW(parse_checkpoint({bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut)}),
                     CorruptCheckpointError)
            << cut;
    }
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(parse_checkpoint(bad_magic), CorruptCheckpointError);
    auto bad_version = bytes;
    bad_version[8] = 9;
    EXPECT_THROW(parse_checkpoint(bad_version), CorruptCheckpointError);
    auto extra = bytes;
    extra.push_back(0);
    EXPECT_THROW(parse_checkpoint(extra), CorruptCheckpointError);
    testutil::TempDir dir("ckpt_missing");
    EXPECT_THROW(load_checkpoint(dir / "none.aide"), Error);
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
    const auto data = small_corpus(3, SynthArtifact::both);
    auto cfg = small_config(7);
    cfg.batch_size = 4;
    cfg.augment_prob = 0.5;
    cfg.epochs = 3;
    const auto full = train_model(data, cfg, nullptr);

    testutil::TempDir dir("resume");
    auto first = cfg;
    first.epochs = 1;
    save_checkpoint(train_model(data, first, nullptr), dir / "e1.aide");
    const auto partial = load_checkpoint(dir / "e1.aide");
    const auto resumed = train_model(data, cfg, nullptr, &partial);
    EXPECT_EQ(resumed, full);

    auto other = cfg;
    other.lr = 5e-3;
    EXPECT_THROW(train_model(data, other, nullptr, &partial), TrainingError);
}

TEST(EmbeddingFile, TwoRecords) {
    const auto t = parse_embedding_table(raw_table({{"a.png", {1, 2, 3, 4}}, {"b.png", {5, 6, 7, 8}}}, 4));
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.dim(), 4u);
    EXPECT_EQ(t.at("b.png"), (std::vector<float>{5, 6, 7, 8}));
    EXPECT_THROW(t.at("c.png"), UnknownIdError);
}

TEST(EmbeddingFile, DuplicateNamesSecondRecord) {
    try {
        parse_embedding_table(raw_table({{"a", {1}}, {"b", {2}}, {"a", {3}}}, 1));
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("record 2"), std::string::npos) << e.what();
    }
}

TEST(EmbeddingFile, BadMagicAndTruncation) {
    auto bytes = raw_table({{"a", {1, 2}}}, 2);
    auto bad = bytes;
    bad[0] = 'B';
    EXPECT_THROW(parse_embedding_table(bad), FormatError);
    bytes.pop_back();
    EXPECT_THROW(parse_embedding_table(bytes), FormatError);
}

TEST(EmbeddingFile, RandomRoundTripIsExact) {
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("img/" + std::to_string(i) + ".png");
    const auto table = random_table(ids, 16, 99);
    testutil::TempDir dir("emb");
    save_embedding_table(table, dir / "t.emb");
    const auto back = load_embedding_table(dir / "t.emb");
    ASSERT_EQ(back.size(), 100u);
    for (const auto& id : ids) EXPECT_EQ(back.at(id), table.at(id));
    EXPECT_EQ(read_file_bytes(dir / "t.emb"), serialize_embedding_table(table));
}
