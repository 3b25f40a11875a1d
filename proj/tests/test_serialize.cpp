#include <filesystem>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "unrec/config.hpp"
#include "unrec/errors.hpp"
#include "unrec/serialize.hpp"
#include "unrec/synthetic.hpp"

using namespace unrec;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("mf checkpoints round-trip bit-exactly and pin the vocab hash") {
    const InteractionLog log = make_synthetic_cf(
        {.n_users = 25, .n_items = 18, .n_clusters = 2, .sensitive_fraction = 0.0,
         .main_interactions_min = 4, .main_interactions_max = 6},
        1);
    const SplitDataset split = temporal_leave_one_out(log);
    MfHyper hyper{.d = 5, .reg = 1e-4, .lr = 0.05, .epochs = 3, .negatives_per_positive = 1};
    const MfModel model = train_mf_bpr(split, hyper, 77);

    const auto h = vocab_hash(*log.vocab);
    const std::string path = temp_path("unrec_mf.ck");
    save_mf_checkpoint(path, model, h);
    const MfModel back = load_mf_checkpoint(path, h);
    CHECK(back.params() == model.params());
    CHECK(back.hyper() == model.hyper());
    CHECK(back.seed() == model.seed());
    CHECK_THROWS_AS(load_mf_checkpoint(path, h + 1), VocabMismatchError);
}

TEST_CASE("tifu checkpoints rebuild an identical model") {
    const InteractionLog log = make_synthetic_nbr({.n_users = 15, .n_items = 20}, 2);
    const SplitDataset split = temporal_leave_one_out(log);
    const TifuModel model = build_tifu(split, TifuHyper{.k = 4});

    const auto h = vocab_hash(*log.vocab);
    const std::string path = temp_path("unrec_tifu.ck");
    save_tifu_checkpoint(path, model, h);
    const TifuModel back = load_tifu_checkpoint(path, h);
    CHECK(back.equals(model, 0.0));
    CHECK_THROWS_AS(load_tifu_checkpoint(path, h + 1), VocabMismatchError);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const std::string path = temp_path("unrec_bad.ck");
    write_text_file(path, "not a checkpoint");
    CHECK_THROWS_AS(load_mf_checkpoint(path, 0), SchemaError);
}

TEST_CASE("run config round-trips through json unchanged") {
    RunConfig cfg;
    cfg.dataset.path = "data.csv";
    cfg.dataset.schema = synthetic_csv_schema(true, true);
    cfg.scenario.category = "sensitive";
    cfg.scenario.seeds = {1, 2, 3};
    cfg.algorithms = {"scif-clip", "kookmin"};
    cfg.scif.bs = 7;
    cfg.scif.clip = 0.5;
    cfg.kookmin.p = 0.02;
    cfg.output_dir = "outdir";

    const auto j = run_config_to_json(cfg);
    const RunConfig back = run_config_from_json(j);
    CHECK(run_config_to_json(back) == j);  // stable fixed point
    CHECK(back.scif.clip.has_value());
    CHECK(*back.scif.clip == 0.5);
    CHECK(back.algorithms == cfg.algorithms);

    // Explicit null clip means the unclipped variant.
    RunConfig noclip = cfg;
    noclip.scif.clip.reset();
    const RunConfig back2 = run_config_from_json(run_config_to_json(noclip));
    CHECK_FALSE(back2.scif.clip.has_value());
}

TEST_CASE("config files persist through disk") {
    RunConfig cfg;
    cfg.dataset.path = "x.csv";
    cfg.dataset.schema = synthetic_csv_schema(false, true);
    const std::string path = temp_path("unrec_cfg.json");
    save_run_config(path, cfg);
    const RunConfig back = load_run_config(path);
    CHECK(run_config_to_json(back) == run_config_to_json(cfg));
}
