#pragma once

// On-disk formats.
//
// .vset   "VSET1" | u32 LE header length | JSON header
//         {"dim","count","metric","version":1} | count*dim f32 LE, row i = id i
// .jsonl  one {"id":int,"class":string|null, ...scalar fields} object per line

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "simsearch/core.hpp"

namespace simsearch {

inline constexpr char kVsetMagic[5] = {'V', 'S', 'E', 'T', '1'};
inline constexpr int kVsetFormatVersion = 1;

// Writes the vectors and, when `meta_path` is given, the metadata sidecar.
// Item ids must be exactly 0..size-1.
void save_store(const VectorStore& store, const std::filesystem::path& vset_path,
                const std::optional<std::filesystem::path>& meta_path = std::nullopt);

// Throws FormatError with kBadMagic / kTruncated / kCountMismatch / kBadHeader / kIo.
VectorStore load_store(const std::filesystem::path& vset_path,
                       const std::optional<std::filesystem::path>& meta_path = std::nullopt);

// Store directory layout used by the CLI: DIR/store.vset + DIR/store.jsonl.
std::filesystem::path store_vset_path(const std::filesystem::path& dir);
std::filesystem::path store_meta_path(const std::filesystem::path& dir);
void save_store_dir(const VectorStore& store, const std::filesystem::path& dir);
VectorStore load_store_dir(const std::filesystem::path& dir);

nlohmann::json metadata_to_json(const Metadata& md);
// Scalars only; nulls are dropped, nested values raise FormatError(kBadMetadata).
Metadata metadata_from_json(const nlohmann::json& obj);
MetaValue meta_value_from_json(const nlohmann::json& v);
nlohmann::json meta_value_to_json(const MetaValue& v);

}  // namespace simsearch
