#include "unrec/serialize.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "unrec/errors.hpp"

namespace unrec {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'U', 'N', 'R', 'E', 'C', 'C', 'K', '1'};
constexpr int kLogVersion = 1;
constexpr int kStreamVersion = 1;
constexpr int kCheckpointVersion = 1;

json interaction_to_json(const Interaction& it) {
    return json::array({it.user, it.item, it.timestamp, it.basket, it.category});
}

Interaction interaction_from_json(const json& j) {
    Interaction it;
    it.user = j.at(0).get<std::int32_t>();
    it.item = j.at(1).get<std::int32_t>();
    it.timestamp = j.at(2).get<std::int64_t>();
    it.basket = j.at(3).get<std::int32_t>();
    it.category = j.at(4).get<std::int32_t>();
    return it;
}

json vocab_to_json(const Vocab& v) { return json(v.ids()); }

Vocab vocab_from_json(const json& j) {
    Vocab v;
    for (const auto& id : j) v.intern(id.get<std::string>());
    return v;
}

void check_version(const json& j, int expected, const char* what) {
    if (!j.contains("version") || j.at("version").get<int>() != expected)
        throw SchemaError(std::string(what) + ": unsupported or missing version");
}

}  // namespace

json log_to_json(const InteractionLog& log) {
    json j;
    j["version"] = kLogVersion;
    j["schema"] = {{"fields", json::array({"user", "item", "timestamp", "basket", "category"})}};
    j["vocab"] = {{"users", vocab_to_json(log.vocab->users)},
                  {"items", vocab_to_json(log.vocab->items)},
                  {"categories", vocab_to_json(log.vocab->categories)},
                  {"baskets", vocab_to_json(log.vocab->baskets)}};
    j["n_users"] = log.n_users();
    j["n_items"] = log.n_items();
    json rows = json::array();
    for (const auto& it : log.interactions) rows.push_back(interaction_to_json(it));
    j["interactions"] = std::move(rows);
    return j;
}

InteractionLog log_from_json(const json& j) {
    check_version(j, kLogVersion, "interaction log");
    auto vocab = std::make_shared<CorpusVocab>();
    vocab->users = vocab_from_json(j.at("vocab").at("users"));
    vocab->items = vocab_from_json(j.at("vocab").at("items"));
    vocab->categories = vocab_from_json(j.at("vocab").at("categories"));
    vocab->baskets = vocab_from_json(j.at("vocab").at("baskets"));
    InteractionLog log;
    log.vocab = std::move(vocab);
    for (const auto& row : j.at("interactions")) log.interactions.push_back(interaction_from_json(row));
    return log;
}

json stream_to_json(const ForgetStream& stream, std::uint64_t vocab_hash_value) {
    json j;
    j["version"] = kStreamVersion;
    j["seed"] = stream.seed;
    j["vocab_hash"] = vocab_hash_value;
    j["checkpoints"] = stream.checkpoints;
    if (stream.category) j["category"] = *stream.category;
    json reqs = json::array();
    for (const auto& r : stream.requests) {
        json jr;
        jr["index"] = r.index;
        jr["user"] = r.user;
        json rows = json::array();
        for (const auto& it : r.interactions) rows.push_back(interaction_to_json(it));
        jr["interactions"] = std::move(rows);
        reqs.push_back(std::move(jr));
    }
    j["requests"] = std::move(reqs);
    return j;
}

ForgetStream stream_from_json(const json& j, std::uint64_t expected_vocab_hash) {
    check_version(j, kStreamVersion, "forget stream");
    if (j.at("vocab_hash").get<std::uint64_t>() != expected_vocab_hash)
        throw VocabMismatchError("forget stream was built against a different corpus");
    ForgetStream stream;
    stream.seed = j.at("seed").get<std::uint64_t>();
    stream.checkpoints = j.at("checkpoints").get<std::vector<int>>();
    if (j.contains("category")) stream.category = j.at("category").get<std::int32_t>();
    for (const auto& jr : j.at("requests")) {
        ForgetRequest r;
        r.index = jr.at("index").get<int>();
        r.user = jr.at("user").get<std::int32_t>();
        for (const auto& row : jr.at("interactions"))
            r.interactions.push_back(interaction_from_json(row));
        stream.requests.push_back(std::move(r));
    }
    return stream;
}

namespace {

void write_checkpoint(const std::string& path, const json& header,
                      const std::vector<double>& payload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::string head = header.dump();
    const std::uint64_t head_len = head.size();
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw SchemaError("short write on checkpoint: " + path);
}

std::pair<json, std::vector<double>> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw SchemaError("bad checkpoint magic: " + path);
    std::uint64_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!in) throw SchemaError("truncated checkpoint header: " + path);
    json header = json::parse(head);

    const std::uint64_t count = header.value("payload_count", std::uint64_t{0});
    std::vector<double> payload(count);
    if (count > 0) {
        in.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw SchemaError("truncated checkpoint payload: " + path);
    }
    return {std::move(header), std::move(payload)};
}

}  // namespace

void save_mf_checkpoint(const std::string& path, const MfModel& model,
                        std::uint64_t vocab_hash_value) {
    json header;
    header["version"] = kCheckpointVersion;
    header["model_type"] = "mf-bpr";
    header["vocab_hash"] = vocab_hash_value;
    header["seed"] = model.seed();
    header["n_users"] = model.n_users();
    header["n_items"] = model.n_items();
    header["hyper"] = {{"d", model.hyper().d},
                       {"reg", model.hyper().reg},
                       {"lr", model.hyper().lr},
                       {"epochs", model.hyper().epochs},
                       {"negatives_per_positive", model.hyper().negatives_per_positive}};
    header["payload_count"] = model.params().size();
    write_checkpoint(path, header, model.params());
}

MfModel load_mf_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash) {
    auto [header, payload] = read_checkpoint(path);
    check_version(header, kCheckpointVersion, "mf checkpoint");
    if (header.at("model_type").get<std::string>() != "mf-bpr")
        throw SchemaError("checkpoint is not an mf-bpr model: " + path);
    if (header.at("vocab_hash").get<std::uint64_t>() != expected_vocab_hash)
        throw VocabMismatchError("checkpoint vocabulary hash mismatch: " + path);
    MfHyper hyper;
    hyper.d = header.at("hyper").at("d").get<int>();
    hyper.reg = header.at("hyper").at("reg").get<double>();
    hyper.lr = header.at("hyper").at("lr").get<double>();
    hyper.epochs = header.at("hyper").at("epochs").get<int>();
    hyper.negatives_per_positive = header.at("hyper").at("negatives_per_positive").get<int>();
    MfModel model(header.at("n_users").get<std::int32_t>(), header.at("n_items").get<std::int32_t>(),
                  hyper, header.at("seed").get<std::uint64_t>());
    if (payload.size() != model.params().size())
        throw SchemaError("checkpoint payload size mismatch: " + path);
    model.params() = std::move(payload);
    return model;
}

void save_tifu_checkpoint(const std::string& path, const TifuModel& model,
                          std::uint64_t vocab_hash_value) {
    json header;
    header["version"] = kCheckpointVersion;
    header["model_type"] = "tifu";
    header["vocab_hash"] = vocab_hash_value;
    header["n_users"] = model.n_users();
    header["n_items"] = model.n_items();
    header["hyper"] = {{"group_decay", model.hyper().decay.group_decay},
                       {"within_decay", model.hyper().decay.within_decay},
                       {"group_size", model.hyper().decay.group_size},
                       {"k", model.hyper().k},
                       {"alpha", model.hyper().alpha}};
    json histories = json::array();
    for (std::int32_t u = 0; u < model.n_users(); ++u) {
        json rows = json::array();
        for (const auto& it : model.user_train(u)) rows.push_back(interaction_to_json(it));
        histories.push_back(std::move(rows));
    }
    header["histories"] = std::move(histories);
    header["payload_count"] = 0;
    write_checkpoint(path, header, {});
}

TifuModel load_tifu_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash) {
    auto [header, payload] = read_checkpoint(path);
    (void)payload;
    check_version(header, kCheckpointVersion, "tifu checkpoint");
    if (header.at("model_type").get<std::string>() != "tifu")
        throw SchemaError("checkpoint is not a tifu model: " + path);
    if (header.at("vocab_hash").get<std::uint64_t>() != expected_vocab_hash)
        throw VocabMismatchError("checkpoint vocabulary hash mismatch: " + path);
    TifuHyper hyper;
    hyper.decay.group_decay = header.at("hyper").at("group_decay").get<double>();
    hyper.decay.within_decay = header.at("hyper").at("within_decay").get<double>();
    hyper.decay.group_size = header.at("hyper").at("group_size").get<int>();
    hyper.k = header.at("hyper").at("k").get<int>();
    hyper.alpha = header.at("hyper").at("alpha").get<double>();

    const auto n_users = header.at("n_users").get<std::int32_t>();
    const auto n_items = header.at("n_items").get<std::int32_t>();
    std::vector<std::vector<Interaction>> histories(static_cast<std::size_t>(n_users));
    const auto& jh = header.at("histories");
    for (std::int32_t u = 0; u < n_users; ++u)
        for (const auto& row : jh.at(static_cast<std::size_t>(u)))
            histories[static_cast<std::size_t>(u)].push_back(interaction_from_json(row));
    return TifuModel::build_from_histories(n_users, n_items, hyper, std::move(histories));
}

void save_item_knn_checkpoint(const std::string& path, const ItemKnnModel& model,
                              std::uint64_t vocab_hash_value) {
    json header;
    header["version"] = kCheckpointVersion;
    header["model_type"] = "item-knn";
    header["vocab_hash"] = vocab_hash_value;
    header["n_users"] = model.n_users();
    header["n_items"] = model.n_items();
    header["k"] = model.k();
    json pairs = json::array();
    for (std::int32_t u = 0; u < model.n_users(); ++u) {
        std::vector<std::int32_t> items(model.user_items(u).begin(), model.user_items(u).end());
        std::sort(items.begin(), items.end());
        for (std::int32_t i : items) pairs.push_back(json::array({u, i}));
    }
    header["pairs"] = std::move(pairs);
    header["payload_count"] = 0;
    write_checkpoint(path, header, {});
}

ItemKnnModel load_item_knn_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash) {
    auto [header, payload] = read_checkpoint(path);
    (void)payload;
    check_version(header, kCheckpointVersion, "item-knn checkpoint");
    if (header.at("model_type").get<std::string>() != "item-knn")
        throw SchemaError("checkpoint is not an item-knn model: " + path);
    if (header.at("vocab_hash").get<std::uint64_t>() != expected_vocab_hash)
        throw VocabMismatchError("checkpoint vocabulary hash mismatch: " + path);
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    for (const auto& row : header.at("pairs"))
        pairs.emplace_back(row.at(0).get<std::int32_t>(), row.at(1).get<std::int32_t>());
    return ItemKnnModel::build_from_pairs(header.at("n_users").get<std::int32_t>(),
                                          header.at("n_items").get<std::int32_t>(),
                                          header.at("k").get<int>(), pairs);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw SchemaError("short write: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace unrec
