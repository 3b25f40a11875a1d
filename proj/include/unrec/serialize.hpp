#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "unrec/corpus.hpp"
#include "unrec/itemknn.hpp"
#include "unrec/mf.hpp"
#include "unrec/tifu.hpp"

namespace unrec {

nlohmann::json log_to_json(const InteractionLog& log);
InteractionLog log_from_json(const nlohmann::json& j);

nlohmann::json stream_to_json(const ForgetStream& stream, std::uint64_t vocab_hash_value);
ForgetStream stream_from_json(const nlohmann::json& j, std::uint64_t expected_vocab_hash);

// Model checkpoints: magic + JSON header (hyperparameters, seed, vocab hash)
// followed by a raw little-endian payload. Loading with a mismatched vocab
// hash throws VocabMismatchError.
void save_mf_checkpoint(const std::string& path, const MfModel& model,
                        std::uint64_t vocab_hash_value);
MfModel load_mf_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash);

void save_tifu_checkpoint(const std::string& path, const TifuModel& model,
                          std::uint64_t vocab_hash_value);
TifuModel load_tifu_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash);

void save_item_knn_checkpoint(const std::string& path, const ItemKnnModel& model,
                              std::uint64_t vocab_hash_value);
ItemKnnModel load_item_knn_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace unrec
