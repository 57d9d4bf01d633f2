#include "simsearch/store_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace simsearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrorCode::kIo, "short write to " + path.string());
}

}  // namespace

MetaValue meta_value_from_json(const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  throw FormatError(FormatErrorCode::kBadMetadata, "metadata values must be scalars");
}

json meta_value_to_json(const MetaValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

json metadata_to_json(const Metadata& md) {
  json obj = json::object();
  for (const auto& [key, value] : md) obj[key] = meta_value_to_json(value);
  return obj;
}

Metadata metadata_from_json(const json& obj) {
  if (!obj.is_object()) throw FormatError(FormatErrorCode::kBadMetadata, "expected object");
  Metadata md;
  for (const auto& [key, value] : obj.items()) {
    if (value.is_null()) continue;
    md.emplace(key, meta_value_from_json(value));
  }
  return md;
}

void save_store(const VectorStore& store, const fs::path& vset_path,
                const std::optional<fs::path>& meta_path) {
  const std::size_t n = store.size();
  std::vector<std::size_t> row_of_id(n);
  for (std::size_t row = 0; row < n; ++row) {
    const ItemId id = store.id_at(row);
    if (id >= n)
      throw InvalidArgument("save_store: ids must be 0..count-1, found " + std::to_string(id));
    row_of_id[id] = row;
  }

  json header = {{"dim", store.dim()},
                 {"count", n},
                 {"metric", std::string(to_string(store.metric()))},
                 {"version", kVsetFormatVersion}};
  const std::string header_text = header.dump();

  std::string bytes(kVsetMagic, sizeof(kVsetMagic));
  put_u32_le(bytes, static_cast<std::uint32_t>(header_text.size()));
  bytes += header_text;
  bytes.reserve(bytes.size() + n * store.dim() * 4);
  for (std::size_t id = 0; id < n; ++id) {
    for (float v : store.embedding_at(row_of_id[id])) put_u32_le(bytes, std::bit_cast<std::uint32_t>(v));
  }
  write_file(vset_path, bytes);

  if (meta_path) {
    std::string lines;
    for (std::size_t id = 0; id < n; ++id) {
      const std::size_t row = row_of_id[id];
      json obj = metadata_to_json(store.metadata_at(row));
      obj["id"] = id;
      const auto& label = store.label_at(row);
      obj["class"] = label ? json(*label) : json(nullptr);
      lines += obj.dump();
      lines += '\n';
    }
    write_file(*meta_path, lines);
  }
}

VectorStore load_store(const fs::path& vset_path, const std::optional<fs::path>& meta_path) {
  const std::string bytes = read_file(vset_path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < sizeof(kVsetMagic) || std::memcmp(p, kVsetMagic, sizeof(kVsetMagic)) != 0)
    throw FormatError(FormatErrorCode::kBadMagic, vset_path.string());
  std::size_t pos = sizeof(kVsetMagic);
  if (bytes.size() < pos + 4) throw FormatError(FormatErrorCode::kTruncated, "missing header length");
  const std::uint32_t header_len = get_u32_le(p + pos);
  pos += 4;
  if (bytes.size() < pos + header_len)
    throw FormatError(FormatErrorCode::kTruncated, "header shorter than declared");

  std::size_t dim = 0, count = 0;
  Metric metric = Metric::kEuclidean;
  try {
    const json header = json::parse(bytes.substr(pos, header_len));
    dim = header.at("dim").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
    metric = parse_metric(header.value("metric", std::string("euclidean")));
    if (header.value("version", kVsetFormatVersion) != kVsetFormatVersion)
      throw FormatError(FormatErrorCode::kBadHeader, "unsupported version");
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, e.what());
  }
  if (dim == 0) throw FormatError(FormatErrorCode::kBadHeader, "dim must be positive");
  pos += header_len;

  const std::size_t expected = count * dim * 4;
  const std::size_t available = bytes.size() - pos;
  if (available < expected)
    throw FormatError(FormatErrorCode::kTruncated,
                      "payload holds " + std::to_string(available / (dim * 4)) + " of " +
                          std::to_string(count) + " vectors");
  if (available > expected)
    throw FormatError(FormatErrorCode::kCountMismatch,
                      "payload larger than header count " + std::to_string(count));

  std::vector<std::optional<std::string>> labels(count);
  std::vector<Metadata> metadata(count);
  if (meta_path) {
    std::ifstream in(*meta_path);
    if (!in) throw FormatError(FormatErrorCode::kIo, "cannot open " + meta_path->string());
    std::vector<bool> seen(count, false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json obj;
      try {
        obj = json::parse(line);
      } catch (const std::exception& e) {
        throw FormatError(FormatErrorCode::kBadMetadata,
                          "line " + std::to_string(lineno) + ": " + e.what());
      }
      if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_number_integer())
        throw FormatError(FormatErrorCode::kBadMetadata,
                          "line " + std::to_string(lineno) + ": missing integer id");
      const auto id = obj["id"].get<std::int64_t>();
      if (id < 0 || static_cast<std::size_t>(id) >= count)
        throw FormatError(FormatErrorCode::kCountMismatch,
                          "metadata id " + std::to_string(id) + " outside 0.." +
                              std::to_string(count));
      if (seen[id]) throw FormatError(FormatErrorCode::kBadMetadata, "duplicate id " + std::to_string(id));
      seen[id] = true;
      if (obj.contains("class") && !obj["class"].is_null()) {
        if (!obj["class"].is_string())
          throw FormatError(FormatErrorCode::kBadMetadata, "class must be a string or null");
        labels[id] = obj["class"].get<std::string>();
      }
      obj.erase("id");
      obj.erase("class");
      metadata[id] = metadata_from_json(obj);
    }
  }

  VectorStore store(dim, metric);
  Embedding row(dim);
  for (std::size_t id = 0; id < count; ++id) {
    for (std::size_t d = 0; d < dim; ++d) {
      row[d] = std::bit_cast<float>(get_u32_le(p + pos));
      pos += 4;
    }
    try {
      store.insert(StoredItem{id, row, std::move(labels[id]), std::move(metadata[id])});
    } catch (const InvalidArgument& e) {
      throw FormatError(FormatErrorCode::kBadPayload, e.what());
    }
  }
  return store;
}

fs::path store_vset_path(const fs::path& dir) { return dir / "store.vset"; }
fs::path store_meta_path(const fs::path& dir) { return dir / "store.jsonl"; }

void save_store_dir(const VectorStore& store, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError(FormatErrorCode::kIo, "cannot create " + dir.string());
  save_store(store, store_vset_path(dir), store_meta_path(dir));
}

VectorStore load_store_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError(FormatErrorCode::kIo, "no store at " + dir.string());
  const auto meta = store_meta_path(dir);
  return load_store(store_vset_path(dir),
                    fs::exists(meta) ? std::optional<fs::path>(meta) : std::nullopt);
}

}  // namespace simsearch
