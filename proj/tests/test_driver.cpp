#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "unrec/driver.hpp"
#include "unrec/errors.hpp"
#include "unrec/serialize.hpp"
#include "unrec/synthetic.hpp"
#include "unrec/unlearn.hpp"

using namespace unrec;
namespace fs = std::filesystem;

namespace {

struct Pipeline {
    RunConfig cfg;
    SplitDataset split;
    ForgetStream stream;
    fs::path dir;

    static Pipeline make(const std::string& tag, std::uint64_t seed, double fraction = 0.02) {
        Pipeline p;
        p.cfg.model.mf = MfHyper{.d = 4, .reg = 1e-4, .lr = 0.05, .epochs = 4,
                                 .negatives_per_positive = 1};
        p.cfg.scif.bs = 4;
        p.cfg.scif.cg_max_iter = 16;

        const InteractionLog log = make_synthetic_cf(
            {.n_users = 80, .n_items = 50, .n_clusters = 3, .sensitive_fraction = 0.1,
             .sensitive_user_fraction = 0.5, .main_interactions_min = 5,
             .main_interactions_max = 8, .sensitive_min = 2, .sensitive_max = 3},
            seed);
        p.split = temporal_leave_one_out(log);
        const auto category = log.vocab->categories.lookup("sensitive");
        REQUIRE(category.has_value());
        p.stream = sample_sensitive_stream(p.split, *category, fraction, seed + 1);
        p.dir = fs::temp_directory_path() / ("unrec_driver_" + tag);
        fs::remove_all(p.dir);
        fs::create_directories(p.dir);
        return p;
    }

    MfModel base(std::uint64_t seed) const { return train_mf_bpr(split, cfg.model.mf, seed); }
};

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("checkpoints are saved exactly at the stream's quarter marks") {
    Pipeline p = Pipeline::make("quarters", 40);
    const RunState state = run_sequential(p.split, p.stream, "scif-clip", p.cfg, p.base(1),
                                          (p.dir / "scif-clip").string());
    CHECK(state.checkpoints_written == p.stream.checkpoints);
    for (int c : p.stream.checkpoints)
        CHECK(fs::exists(p.dir / "scif-clip" / ("checkpoint_" + std::to_string(c) + ".ck")));
    CHECK(static_cast<int>(state.records.size()) == p.stream.length());
    for (const auto& r : state.records) CHECK(r.wall_time_s > 0.0);
}

TEST_CASE("an empty stream checkpoints the base model once") {
    Pipeline p = Pipeline::make("empty", 41);
    ForgetStream empty;
    empty.seed = 1;
    const RunState state =
        run_sequential(p.split, empty, "scif-clip", p.cfg, p.base(1), (p.dir / "e").string());
    CHECK(state.processed == 0);
    CHECK(state.checkpoints_written == std::vector<int>{0});
    CHECK(fs::exists(p.dir / "e" / "checkpoint_0.ck"));
}

TEST_CASE("re-running with identical config produces bit-identical checkpoints") {
    Pipeline p = Pipeline::make("determinism", 42);
    run_sequential(p.split, p.stream, "scif-clip", p.cfg, p.base(1), (p.dir / "a").string());
    run_sequential(p.split, p.stream, "scif-clip", p.cfg, p.base(1), (p.dir / "b").string());
    for (int c : p.stream.checkpoints) {
        const auto name = "checkpoint_" + std::to_string(c) + ".ck";
        CHECK(file_bytes(p.dir / "a" / name) == file_bytes(p.dir / "b" / name));
    }
}

TEST_CASE("retain hash matches an independent set-difference after every request") {
    Pipeline p = Pipeline::make("protocol", 43);
    const RunState state = run_sequential(p.split, p.stream, "kookmin", p.cfg, p.base(2),
                                          (p.dir / "kookmin").string());
    std::vector<Interaction> remaining = p.split.train.interactions;
    for (int i = 1; i <= p.stream.length(); ++i) {
        for (const auto& gone : p.stream.requests[static_cast<std::size_t>(i - 1)].interactions) {
            auto it = std::find(remaining.begin(), remaining.end(), gone);
            REQUIRE(it != remaining.end());
            remaining.erase(it);
        }
        CHECK(state.records[static_cast<std::size_t>(i - 1)].retain_hash ==
              interactions_hash(remaining));
    }
}

TEST_CASE("a diverging unlearner is logged as failed and the run continues") {
    Pipeline p = Pipeline::make("failure", 44);
    p.cfg.fanchuan.lr = 1e300;  // overflow on the first scoring pass
    p.cfg.fanchuan.forget_epochs = 3;
    const MfModel base = p.base(3);
    const RunState state = run_sequential(p.split, p.stream, "fanchuan", p.cfg, base,
                                          (p.dir / "fanchuan").string());
    CHECK(static_cast<int>(state.records.size()) == p.stream.length());
    for (const auto& r : state.records) CHECK(r.failed);
    // The model never moved: the final checkpoint equals the base parameters.
    const auto last = p.stream.checkpoints.back();
    const AnyModel final_model = load_model_checkpoint(
        (p.dir / "fanchuan" / ("checkpoint_" + std::to_string(last) + ".ck")).string(), "mf-bpr",
        vocab_hash(*p.split.train.vocab));
    CHECK(std::get<MfModel>(final_model).params() == base.params());
}

TEST_CASE("crash-resume from the first checkpoint reproduces the uninterrupted artifacts") {
    Pipeline p = Pipeline::make("resume", 45, 0.05);
    REQUIRE(p.stream.length() >= 4);
    const auto full_dir = p.dir / "full";
    const auto resume_dir = p.dir / "resumed";
    run_sequential(p.split, p.stream, "scif-clip", p.cfg, p.base(4), full_dir.string());

    // Simulate a crash right after the first checkpoint: copy its artifacts.
    fs::create_directories(resume_dir);
    const int c1 = p.stream.checkpoints.front();
    const auto ck = "checkpoint_" + std::to_string(c1) + ".ck";
    fs::copy_file(full_dir / ck, resume_dir / ck);
    auto records = read_diagnostics((full_dir / "diagnostics.jsonl").string());
    records.resize(static_cast<std::size_t>(c1));
    write_diagnostics((resume_dir / "diagnostics.jsonl").string(), records);

    run_sequential(p.split, p.stream, "scif-clip", p.cfg, p.base(4), resume_dir.string(),
                   /*resume=*/true);
    for (int c : p.stream.checkpoints) {
        const auto name = "checkpoint_" + std::to_string(c) + ".ck";
        CHECK(file_bytes(full_dir / name) == file_bytes(resume_dir / name));
    }
    // Diagnostics agree on everything but wall-clock times.
    const auto full_rec = read_diagnostics((full_dir / "diagnostics.jsonl").string());
    const auto resumed_rec = read_diagnostics((resume_dir / "diagnostics.jsonl").string());
    REQUIRE(full_rec.size() == resumed_rec.size());
    for (std::size_t i = 0; i < full_rec.size(); ++i) {
        CHECK(full_rec[i].index == resumed_rec[i].index);
        CHECK(full_rec[i].user == resumed_rec[i].user);
        CHECK(full_rec[i].update_norm == resumed_rec[i].update_norm);
        CHECK(full_rec[i].failed == resumed_rec[i].failed);
        CHECK(full_rec[i].retain_hash == resumed_rec[i].retain_hash);
    }
}

TEST_CASE("retraining with no deletions reproduces the base model bit-exactly") {
    Pipeline p = Pipeline::make("retrain-identity", 46);
    const MfModel a = p.base(5);
    const AnyModel b = train_base_model(p.split, p.cfg, 5);
    CHECK(std::get<MfModel>(b).params() == a.params());
}

TEST_CASE("the final retrain set excludes every forget interaction") {
    Pipeline p = Pipeline::make("retain-final", 47);
    run_retrain_checkpoints(p.split, p.stream, p.cfg, 6, (p.dir / "retrain").string());

    RetainView view(p.split.train);
    for (const auto& req : p.stream.requests) view.remove(req.interactions);
    const auto remaining = view.materialize();
    for (const auto& req : p.stream.requests)
        for (const auto& gone : req.interactions)
            CHECK(std::find(remaining.begin(), remaining.end(), gone) == remaining.end());
    CHECK(remaining.size() + [&] {
        std::size_t n = 0;
        for (const auto& req : p.stream.requests) n += req.interactions.size();
        return n;
    }() == p.split.train.interactions.size());
}

TEST_CASE("evaluation emits one row per checkpoint and algorithm with retrain reference") {
    Pipeline p = Pipeline::make("evaluate", 48, 0.05);
    const std::uint64_t seed = 7;
    const auto sdir = p.dir / ("seed_" + std::to_string(seed));
    run_sequential(p.split, p.stream, "scif-clip", p.cfg, p.base(seed),
                   (sdir / "scif-clip").string());
    run_sequential(p.split, p.stream, "fanchuan", p.cfg, p.base(seed),
                   (sdir / "fanchuan").string());
    run_retrain_checkpoints(p.split, p.stream, p.cfg, seed, (sdir / "retrain").string());

    const auto rows =
        evaluate_run(p.split, p.stream, p.cfg, seed, {"scif-clip", "fanchuan"}, sdir.string());
    const std::size_t n_checkpoints = p.stream.checkpoints.size();
    CHECK(rows.size() == n_checkpoints * 3);  // retrain + two algorithms

    std::vector<std::string> labels;
    for (const auto& r : rows) {
        if (r.algorithm == "retrain") {
            CHECK(r.kl_r_u == 0.0);
            labels.push_back(r.requests_label);
        }
        CHECK(r.recall10 >= 0.0);
        CHECK(r.recall10 <= 1.0);
        CHECK(r.kl_r_u >= 0.0);
    }
    CHECK(labels == std::vector<std::string>{"25%", "50%", "75%", "100%"});

    // A missing checkpoint is reported with its index.
    fs::remove(sdir / "fanchuan" / ("checkpoint_" + std::to_string(p.stream.checkpoints.back()) + ".ck"));
    CHECK_THROWS_AS(
        evaluate_run(p.split, p.stream, p.cfg, seed, {"scif-clip", "fanchuan"}, sdir.string()),
        SchemaError);
}

TEST_CASE("spam unlearning on item-knn equals a rebuild on the clean data") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 60, .n_items = 40, .n_clusters = 3, .sensitive_fraction = 0.0,
         .main_interactions_min = 5, .main_interactions_max = 8},
        60);
    const SplitDataset clean = temporal_leave_one_out(log);
    SpamParams params{.n_spammers = 6, .promoted_items = 2, .clicks_each = 8};
    const auto [poisoned, scenario] = inject_spam(clean, params, 61);
    const ForgetStream stream = spam_stream_from(scenario);
    REQUIRE(stream.length() == 6);

    RunConfig cfg;
    cfg.model.type = "item-knn";
    cfg.model.item_knn_k = 10;

    const fs::path dir = fs::temp_directory_path() / "unrec_driver_spam";
    fs::remove_all(dir);
    AnyModel base = build_item_knn(poisoned, cfg.model.item_knn_k);
    const RunState state = run_sequential(poisoned, stream, "exact-knn", cfg, std::move(base),
                                          (dir / "exact-knn").string());
    for (const auto& r : state.records) CHECK_FALSE(r.failed);

    // After the full stream the index matches a fresh build on the clean
    // data extended with the (empty) spammer rows.
    const AnyModel final_model = load_model_checkpoint(
        (dir / "exact-knn" / ("checkpoint_" + std::to_string(stream.length()) + ".ck")).string(),
        "item-knn", vocab_hash(*poisoned.train.vocab));
    SplitDataset reduced = poisoned;
    RetainView view(poisoned.train);
    for (const auto& req : stream.requests) view.remove(req.interactions);
    reduced.train.interactions = view.materialize();
    const ItemKnnModel rebuilt = build_item_knn(reduced, cfg.model.item_knn_k);
    const auto& unlearned = std::get<ItemKnnModel>(final_model);
    for (std::int32_t i = 0; i < rebuilt.n_items(); ++i) {
        const auto& a = unlearned.knn().neighbors(i);
        const auto& b = rebuilt.knn().neighbors(i);
        REQUIRE(a.size() == b.size());
        for (std::size_t n = 0; n < a.size(); ++n) {
            CHECK(a[n].entity == b[n].entity);
            CHECK(a[n].similarity == doctest::Approx(b[n].similarity).epsilon(1e-12));
        }
    }

    // Retrain + evaluation produce the full table for the spam scenario.
    const auto sdir = dir / "seed_61";
    fs::create_directories(sdir);
    fs::rename(dir / "exact-knn", sdir / "exact-knn");
    run_retrain_checkpoints(poisoned, stream, cfg, 61, (sdir / "retrain").string());
    const auto rows = evaluate_run(poisoned, stream, cfg, 61, {"exact-knn"}, sdir.string());
    CHECK(rows.size() == stream.checkpoints.size() * 2);
    for (const auto& r : rows) CHECK(r.leakage10 == 0.0);  // no category in spam streams
}

TEST_CASE("tifu exact unlearning through the driver equals rebuild at the final checkpoint") {
    const InteractionLog log = make_synthetic_nbr(
        {.n_users = 40, .n_items = 30, .n_clusters = 3, .baskets_per_user = 5}, 62);
    const SplitDataset split = temporal_leave_one_out(log);
    const auto category = log.vocab->categories.lookup("c0");
    REQUIRE(category.has_value());
    const ForgetStream stream = sample_sensitive_stream(split, *category, 0.02, 63);
    REQUIRE(stream.length() > 0);

    RunConfig cfg;
    cfg.model.type = "tifu";
    cfg.model.tifu = TifuHyper{.decay = TifuDecay{}, .k = 8, .alpha = 0.7};

    const fs::path dir = fs::temp_directory_path() / "unrec_driver_tifu";
    fs::remove_all(dir);
    AnyModel base = build_tifu(split, cfg.model.tifu);
    run_sequential(split, stream, "exact-knn", cfg, std::move(base), (dir / "exact-knn").string());

    const AnyModel final_model = load_model_checkpoint(
        (dir / "exact-knn" / ("checkpoint_" + std::to_string(stream.length()) + ".ck")).string(),
        "tifu", vocab_hash(*split.train.vocab));
    SplitDataset reduced = split;
    RetainView view(split.train);
    for (const auto& req : stream.requests) view.remove(req.interactions);
    reduced.train.interactions = view.materialize();
    CHECK(std::get<TifuModel>(final_model).equals(build_tifu(reduced, cfg.model.tifu), 1e-12));
}

TEST_CASE("checkpoint labels collapse duplicates keeping the latest quarter") {
    const auto l1 = checkpoint_labels(1);
    REQUIRE(l1.size() == 1);
    CHECK(l1[0].first == 1);
    CHECK(l1[0].second == "100%");

    const auto l10 = checkpoint_labels(10);
    REQUIRE(l10.size() == 4);
    CHECK(l10[0] == std::pair<int, std::string>{3, "25%"});
    CHECK(l10[3] == std::pair<int, std::string>{10, "100%"});
}
