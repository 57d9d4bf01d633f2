#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "simsearch/store_io.hpp"

using namespace simsearch;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("simsearch_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string vset_bytes(const std::string& header, std::size_t floats) {
  std::string out("VSET1");
  const std::uint32_t len = static_cast<std::uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  out += header;
  out.append(floats * 4, '\0');
  return out;
}

FormatErrorCode load_error(const fs::path& p) {
  try {
    load_store(p);
  } catch (const FormatError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a FormatError";
  return FormatErrorCode::kIo;
}

}  // namespace

TEST(StoreIo, RoundTripIsExact) {
  std::mt19937_64 rng(3);
  VectorStore s(3);
  for (int i = 0; i < 50; ++i) {
    auto v = oracle::random_vector(rng, 3, 100.0);
    if (i == 7) v = {-0.0f, 1e-38f, 3.4e38f};
    Metadata md{{"n", std::int64_t{i}}, {"x", 0.1 * i}, {"flag", i % 2 == 0}, {"name", "item" + std::to_string(i)}};
    std::optional<std::string> label;
    if (i % 3) label = "c" + std::to_string(i % 3);
    s.add(v, label, md);
  }
  const auto dir = temp_dir("roundtrip");
  save_store(s, dir / "a.vset", dir / "a.jsonl");
  const auto back = load_store(dir / "a.vset", dir / "a.jsonl");
  EXPECT_TRUE(back == s);
  for (std::size_t r = 0; r < s.size(); ++r)
    EXPECT_EQ(std::memcmp(back.embedding_at(r).data(), s.embedding_at(r).data(), 12), 0);
  fs::remove_all(dir);
}

TEST(StoreIo, DirectoryLayout) {
  VectorStore s(2, Metric::kCosine);
  const Embedding v{1, 2};
  s.add(v, "a");
  const auto dir = temp_dir("layout");
  save_store_dir(s, dir);
  EXPECT_TRUE(fs::exists(store_vset_path(dir)));
  EXPECT_TRUE(fs::exists(store_meta_path(dir)));
  const auto back = load_store_dir(dir);
  EXPECT_TRUE(back == s);
  EXPECT_EQ(back.metric(), Metric::kCosine);
  fs::remove_all(dir);
}

TEST(StoreIo, HeaderLayout) {
  VectorStore s(2);
  const Embedding v{1.0f, -2.0f};
  s.add(v);
  const auto dir = temp_dir("layout_bytes");
  save_store(s, dir / "a.vset");
  const auto bytes = read_bytes(dir / "a.vset");
  ASSERT_GE(bytes.size(), 9u);
  EXPECT_EQ(bytes.substr(0, 5), "VSET1");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t len = p[5] | (p[6] << 8) | (p[7] << 16) | (static_cast<std::uint32_t>(p[8]) << 24);
  const auto header = nlohmann::json::parse(bytes.substr(9, len));
  EXPECT_EQ(header.at("dim"), 2);
  EXPECT_EQ(header.at("count"), 1);
  EXPECT_EQ(header.at("version"), 1);
  EXPECT_EQ(bytes.size(), 9 + len + 8);
  float x = 0;
  std::memcpy(&x, bytes.data() + 9 + len + 4, 4);
  EXPECT_EQ(x, -2.0f);
  fs::remove_all(dir);
}

TEST(StoreIo, BadMagic) {
  const auto dir = temp_dir("magic");
  auto bytes = vset_bytes(R"({"dim":1,"count":1,"metric":"euclidean","version":1})", 1);
  bytes[0] = 'X';
  write_bytes(dir / "a.vset", bytes);
  EXPECT_EQ(load_error(dir / "a.vset"), FormatErrorCode::kBadMagic);
  try {
    load_store(dir / "a.vset");
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(StoreIo, TruncatedPayload) {
  const auto dir = temp_dir("trunc");
  write_bytes(dir / "a.vset", vset_bytes(R"({"dim":2,"count":10,"metric":"euclidean","version":1})", 18));
  EXPECT_EQ(load_error(dir / "a.vset"), FormatErrorCode::kTruncated);
  fs::remove_all(dir);
}

TEST(StoreIo, ExtraPayloadIsCountMismatch) {
  const auto dir = temp_dir("extra");
  write_bytes(dir / "a.vset", vset_bytes(R"({"dim":2,"count":1,"metric":"euclidean","version":1})", 4));
  EXPECT_EQ(load_error(dir / "a.vset"), FormatErrorCode::kCountMismatch);
  fs::remove_all(dir);
}

TEST(StoreIo, BadHeader) {
  const auto dir = temp_dir("header");
  write_bytes(dir / "a.vset", vset_bytes("{not json", 0));
  EXPECT_EQ(load_error(dir / "a.vset"), FormatErrorCode::kBadHeader);
  write_bytes(dir / "b.vset", vset_bytes(R"({"dim":1,"count":0,"version":2})", 0));
  EXPECT_EQ(load_error(dir / "b.vset"), FormatErrorCode::kBadHeader);
  fs::remove_all(dir);
}

TEST(StoreIo, MissingFileIsIoError) {
  EXPECT_EQ(load_error("/nonexistent/path/a.vset"), FormatErrorCode::kIo);
}

TEST(StoreIo, MetadataErrors) {
  const auto dir = temp_dir("meta");
  write_bytes(dir / "a.vset", vset_bytes(R"({"dim":1,"count":2,"metric":"euclidean","version":1})", 2));
  write_bytes(dir / "bad.jsonl", "{\"id\":0}\nnot json\n");
  EXPECT_THROW(load_store(dir / "a.vset", dir / "bad.jsonl"), FormatError);
  write_bytes(dir / "range.jsonl", "{\"id\":5}\n");
  EXPECT_THROW(load_store(dir / "a.vset", dir / "range.jsonl"), FormatError);
  write_bytes(dir / "ok.jsonl", "{\"id\":1,\"class\":\"car\",\"w\":3}\n\n");
  const auto s = load_store(dir / "a.vset", dir / "ok.jsonl");
  EXPECT_EQ(s.label(1), std::optional<std::string>("car"));
  EXPECT_FALSE(s.label(0).has_value());
  fs::remove_all(dir);
}
