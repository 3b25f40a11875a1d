#include "unrec/config.hpp"

#include <cstdlib>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "unrec/errors.hpp"
#include "unrec/serialize.hpp"

namespace unrec {

using nlohmann::json;

namespace {

json subset_to_json(const SubsetPolicy& s) {
    return {{"affected_user_rows", s.affected_user_rows},
            {"all_user_rows", s.all_user_rows},
            {"item_table", s.item_table},
            {"item_bias", s.item_bias}};
}

SubsetPolicy subset_from_json(const json& j) {
    SubsetPolicy s;
    s.affected_user_rows = j.value("affected_user_rows", s.affected_user_rows);
    s.all_user_rows = j.value("all_user_rows", s.all_user_rows);
    s.item_table = j.value("item_table", s.item_table);
    s.item_bias = j.value("item_bias", s.item_bias);
    return s;
}

}  // namespace

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["version"] = cfg.version;
    j["dataset"] = {{"path", cfg.dataset.path},
                    {"schema",
                     {{"user", cfg.dataset.schema.user_col},
                      {"item", cfg.dataset.schema.item_col},
                      {"time", cfg.dataset.schema.time_col},
                      {"basket", cfg.dataset.schema.basket_col},
                      {"category", cfg.dataset.schema.category_col}}}};
    j["model"] = {{"type", cfg.model.type},
                  {"mf",
                   {{"d", cfg.model.mf.d},
                    {"reg", cfg.model.mf.reg},
                    {"lr", cfg.model.mf.lr},
                    {"epochs", cfg.model.mf.epochs},
                    {"negatives_per_positive", cfg.model.mf.negatives_per_positive}}},
                  {"tifu",
                   {{"group_decay", cfg.model.tifu.decay.group_decay},
                    {"within_decay", cfg.model.tifu.decay.within_decay},
                    {"group_size", cfg.model.tifu.decay.group_size},
                    {"k", cfg.model.tifu.k},
                    {"alpha", cfg.model.tifu.alpha}}},
                  {"item_knn_k", cfg.model.item_knn_k}};
    j["scenario"] = {{"kind", cfg.scenario.kind},
                     {"category", cfg.scenario.category},
                     {"fraction", cfg.scenario.fraction},
                     {"spam",
                      {{"n_spammers", cfg.scenario.spam.n_spammers},
                       {"promoted_items", cfg.scenario.spam.promoted_items},
                       {"clicks_each", cfg.scenario.spam.clicks_each},
                       {"promoted_ratio", cfg.scenario.spam.promoted_ratio}}},
                     {"seeds", cfg.scenario.seeds}};
    j["algorithms"] = cfg.algorithms;
    j["scif"] = {{"bs", cfg.scif.bs},
                 {"damping", cfg.scif.damping},
                 {"clip", cfg.scif.clip ? json(*cfg.scif.clip) : json(nullptr)},
                 {"cg_max_iter", cfg.scif.cg_max_iter},
                 {"cg_tol", cfg.scif.cg_tol},
                 {"replacement_mode", cfg.scif.replacement_mode},
                 {"subset", subset_to_json(cfg.scif.subset)}};
    j["kookmin"] = {{"p", cfg.kookmin.p},
                    {"retain_rounds", cfg.kookmin.retain_rounds},
                    {"retain_multiplier", cfg.kookmin.retain_multiplier},
                    {"lr", cfg.kookmin.lr},
                    {"reduced_lr_factor", cfg.kookmin.reduced_lr_factor},
                    {"reinit_std", cfg.kookmin.reinit_std}};
    j["fanchuan"] = {{"forget_epochs", cfg.fanchuan.forget_epochs},
                     {"repair_epochs", cfg.fanchuan.repair_epochs},
                     {"retain_cap_multiplier", cfg.fanchuan.retain_cap_multiplier},
                     {"contrastive_retain_count", cfg.fanchuan.contrastive_retain_count},
                     {"temperature", cfg.fanchuan.temperature},
                     {"lr", cfg.fanchuan.lr},
                     {"candidate_samples", cfg.fanchuan.candidate_samples}};
    j["eval"] = {{"k_primary", cfg.eval.k_primary},
                 {"k_secondary", cfg.eval.k_secondary},
                 {"kl_full_catalog", cfg.eval.kl_full_catalog},
                 {"kl_sample_size", cfg.eval.kl_sample_size}};
    j["min_activity"] = cfg.min_activity;
    j["protocol_checks"] = cfg.protocol_checks;
    j["output_dir"] = cfg.output_dir;
    return j;
}

RunConfig run_config_from_json(const json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != 1)
        throw SchemaError("run config: unsupported or missing version");
    RunConfig cfg;
    cfg.version = 1;
    const auto& jd = j.at("dataset");
    cfg.dataset.path = jd.at("path").get<std::string>();
    const auto& js = jd.at("schema");
    cfg.dataset.schema.user_col = js.at("user").get<std::string>();
    cfg.dataset.schema.item_col = js.at("item").get<std::string>();
    cfg.dataset.schema.time_col = js.at("time").get<std::string>();
    cfg.dataset.schema.basket_col = js.value("basket", std::string{});
    cfg.dataset.schema.category_col = js.value("category", std::string{});

    const auto& jm = j.at("model");
    cfg.model.type = jm.at("type").get<std::string>();
    const auto& jmf = jm.at("mf");
    cfg.model.mf.d = jmf.at("d").get<int>();
    cfg.model.mf.reg = jmf.at("reg").get<double>();
    cfg.model.mf.lr = jmf.at("lr").get<double>();
    cfg.model.mf.epochs = jmf.at("epochs").get<int>();
    cfg.model.mf.negatives_per_positive = jmf.at("negatives_per_positive").get<int>();
    const auto& jt = jm.at("tifu");
    cfg.model.tifu.decay.group_decay = jt.at("group_decay").get<double>();
    cfg.model.tifu.decay.within_decay = jt.at("within_decay").get<double>();
    cfg.model.tifu.decay.group_size = jt.at("group_size").get<int>();
    cfg.model.tifu.k = jt.at("k").get<int>();
    cfg.model.tifu.alpha = jt.at("alpha").get<double>();
    cfg.model.item_knn_k = jm.value("item_knn_k", cfg.model.item_knn_k);

    const auto& jsc = j.at("scenario");
    cfg.scenario.kind = jsc.at("kind").get<std::string>();
    cfg.scenario.category = jsc.value("category", std::string{});
    cfg.scenario.fraction = jsc.value("fraction", cfg.scenario.fraction);
    const auto& jsp = jsc.at("spam");
    cfg.scenario.spam.n_spammers = jsp.at("n_spammers").get<int>();
    cfg.scenario.spam.promoted_items = jsp.at("promoted_items").get<int>();
    cfg.scenario.spam.clicks_each = jsp.at("clicks_each").get<int>();
    cfg.scenario.spam.promoted_ratio = jsp.at("promoted_ratio").get<double>();
    cfg.scenario.seeds = jsc.at("seeds").get<std::vector<std::uint64_t>>();

    cfg.algorithms = j.at("algorithms").get<std::vector<std::string>>();

    const auto& jscif = j.at("scif");
    cfg.scif.bs = jscif.at("bs").get<int>();
    cfg.scif.damping = jscif.at("damping").get<double>();
    cfg.scif.clip = jscif.at("clip").is_null()
                        ? std::nullopt
                        : std::optional<double>(jscif.at("clip").get<double>());
    cfg.scif.cg_max_iter = jscif.at("cg_max_iter").get<int>();
    cfg.scif.cg_tol = jscif.at("cg_tol").get<double>();
    cfg.scif.replacement_mode = jscif.at("replacement_mode").get<bool>();
    cfg.scif.subset = subset_from_json(jscif.at("subset"));

    const auto& jk = j.at("kookmin");
    cfg.kookmin.p = jk.at("p").get<double>();
    cfg.kookmin.retain_rounds = jk.at("retain_rounds").get<int>();
    cfg.kookmin.retain_multiplier = jk.at("retain_multiplier").get<int>();
    cfg.kookmin.lr = jk.at("lr").get<double>();
    cfg.kookmin.reduced_lr_factor = jk.at("reduced_lr_factor").get<double>();
    cfg.kookmin.reinit_std = jk.at("reinit_std").get<double>();

    const auto& jf = j.at("fanchuan");
    cfg.fanchuan.forget_epochs = jf.at("forget_epochs").get<int>();
    cfg.fanchuan.repair_epochs = jf.at("repair_epochs").get<int>();
    cfg.fanchuan.retain_cap_multiplier = jf.at("retain_cap_multiplier").get<int>();
    cfg.fanchuan.contrastive_retain_count = jf.at("contrastive_retain_count").get<int>();
    cfg.fanchuan.temperature = jf.at("temperature").get<double>();
    cfg.fanchuan.lr = jf.at("lr").get<double>();
    cfg.fanchuan.candidate_samples = jf.at("candidate_samples").get<int>();

    const auto& je = j.at("eval");
    cfg.eval.k_primary = je.at("k_primary").get<int>();
    cfg.eval.k_secondary = je.at("k_secondary").get<int>();
    cfg.eval.kl_full_catalog = je.at("kl_full_catalog").get<bool>();
    cfg.eval.kl_sample_size = je.at("kl_sample_size").get<int>();

    cfg.min_activity = j.at("min_activity").get<int>();
    cfg.protocol_checks = j.at("protocol_checks").get<bool>();
    cfg.output_dir = j.at("output_dir").get<std::string>();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(json::parse(read_text_file(path)));
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
    write_text_file(path, run_config_to_json(cfg).dump(2) + "\n");
}

std::string resolve_output_dir(const RunConfig& cfg) {
    if (const char* root = std::getenv("UNREC_OUTPUT_ROOT"); root && *root)
        return (std::filesystem::path(root) / cfg.output_dir).string();
    return cfg.output_dir;
}

}  // namespace unrec
