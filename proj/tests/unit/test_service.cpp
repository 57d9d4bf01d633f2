#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "oracles.hpp"
#include "simsearch/multibody_io.hpp"
#include "simsearch/service.hpp"
#include "simsearch/store_io.hpp"
#include "simsearch/synthetic.hpp"

using namespace simsearch;
using service::Response;
using service::Service;
using nlohmann::json;

namespace {

Response post(Service& svc, std::string_view path, const json& body) {
  return svc.handle("POST", path, body.dump());
}

void add_blobs(Service& svc, std::size_t n = 300, std::size_t dim = 6) {
  const auto r = post(svc, "/datasets", {{"name", "d"}, {"synthetic", {{"seed", 1}, {"n", n}, {"dim", dim}}}});
  EXPECT_EQ(r.status, 200) << r.body.dump();
}

std::vector<std::uint64_t> hit_ids(const json& body) {
  std::vector<std::uint64_t> out;
  for (const auto& h : body.at("hits")) out.push_back(h.at("id").get<std::uint64_t>());
  return out;
}

// Checks the documented hit schema and ordering.
void expect_hit_schema(const json& body) {
  ASSERT_TRUE(body.at("hits").is_array());
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& h : body.at("hits")) {
    ASSERT_TRUE(h.at("id").is_number_unsigned());
    ASSERT_TRUE(h.at("score").is_number());
    ASSERT_TRUE(h.contains("class"));
    ASSERT_TRUE(h.at("metadata").is_object());
    EXPECT_GE(h.at("score").get<double>(), prev);
    prev = h.at("score").get<double>();
  }
  EXPECT_TRUE(body.at("plan_used").is_string());
  EXPECT_TRUE(body.at("timings").is_object());
}

}  // namespace

TEST(ServiceRoutes, HealthAndUnknownRoutes) {
  Service svc;
  EXPECT_EQ(svc.handle("GET", "/health", "").status, 200);
  EXPECT_EQ(svc.handle("GET", "/nope", "").status, 404);
  EXPECT_EQ(svc.handle("DELETE", "/datasets", "").status, 404);
}

TEST(ServiceRoutes, ErrorCodes) {
  Service svc;
  add_blobs(svc);
  EXPECT_EQ(post(svc, "/search", {{"dataset", "missing"}, {"k", 3}, {"query_id", 0}}).status, 404);
  EXPECT_EQ(post(svc, "/search", {{"dataset", "d"}, {"k", 3}, {"query_id", 99999}}).status, 404);
  EXPECT_EQ(post(svc, "/search", {{"dataset", "d"}, {"k", 0}, {"query_id", 0}}).status, 400);
  EXPECT_EQ(post(svc, "/search", {{"dataset", "d"}, {"k", 3}, {"query_id", 0}, {"mode", "fancy"}}).status, 400);
  EXPECT_EQ(post(svc, "/search", {{"dataset", "d"}, {"k", 3}, {"query", {1.0, 2.0}}}).status, 400);
  EXPECT_EQ(svc.handle("POST", "/search", "{not json").status, 400);
  EXPECT_EQ(svc.handle("GET", "/sessions/none", "").status, 404);
  EXPECT_EQ(post(svc, "/datasets", {{"name", "x"}, {"vset_path", "/nonexistent/file.vset"}}).status, 404);

  const auto bad = std::filesystem::temp_directory_path() / "simsearch_service_bad.vset";
  std::ofstream(bad) << "not a vector file";
  EXPECT_EQ(post(svc, "/datasets", {{"name", "x"}, {"vset_path", bad.string()}}).status, 422);
  std::filesystem::remove(bad);
}

TEST(ServiceSearch, LocalWithLambdaZeroEqualsClassic) {
  Service svc;
  add_blobs(svc);
  for (int q = 0; q < 5; ++q) {
    const auto classic = post(svc, "/search", {{"dataset", "d"}, {"mode", "classic"}, {"k", 12}, {"query_id", q * 7}});
    const auto local = post(svc, "/search",
                            {{"dataset", "d"}, {"mode", "local"}, {"lambda", 0.0}, {"k", 12}, {"query_id", q * 7}});
    ASSERT_EQ(classic.status, 200);
    ASSERT_EQ(local.status, 200);
    EXPECT_EQ(classic.body.at("hits"), local.body.at("hits"));
  }
}

TEST(ServiceSearch, ClassicMatchesOracle) {
  Service svc;
  std::mt19937_64 rng(2);
  auto store = oracle::random_store(rng, 100, 3);
  const auto expected = ids_of(oracle::topk(store, store.embedding(5), 8, Metric::kEuclidean));
  svc.add_dataset("r", std::move(store));
  const auto r = post(svc, "/search", {{"dataset", "r"}, {"k", 8}, {"query_id", 5}});
  ASSERT_EQ(r.status, 200);
  expect_hit_schema(r.body);
  EXPECT_EQ(hit_ids(r.body), std::vector<std::uint64_t>(expected.begin(), expected.end()));
}

TEST(ServiceSearch, GlobalEndToEndOnThousandVectors) {
  Service svc;
  add_blobs(svc, 1000, 8);
  const auto r = post(svc, "/search", {{"dataset", "d"}, {"mode", "global"}, {"k", 10}, {"query_id", 3}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  expect_hit_schema(r.body);
  const auto ids = hit_ids(r.body);
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(std::set<std::uint64_t>(ids.begin(), ids.end()).size(), 10u);
  for (auto id : ids) EXPECT_LT(id, 1000u);
  EXPECT_EQ(r.body.at("mode"), "global");
}

TEST(ServiceSearch, FilteredSearchReportsPlan) {
  Service svc;
  svc.add_dataset("f", synthetic::filtered_store(3, 400, 4));
  const auto r = post(svc, "/search", {{"dataset", "f"}, {"k", 5}, {"query_id", 0}, {"filter", "group=2"}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  expect_hit_schema(r.body);
  for (const auto& h : r.body.at("hits")) EXPECT_EQ(h.at("metadata").at("group"), 2);
  const auto forced = post(svc, "/search",
                           {{"dataset", "f"}, {"k", 5}, {"query_id", 0}, {"filter", "group=2"}, {"alpha", 2.0}});
  ASSERT_EQ(forced.status, 200);
  EXPECT_EQ(forced.body.at("plan_used"), "postfilter");
  EXPECT_EQ(forced.body.at("hits"), r.body.at("hits"));
  const auto udf = post(svc, "/search",
                        {{"dataset", "f"}, {"k", 5}, {"query_id", 0}, {"udfs", {"threshold@0@0.0:100:0.5"}}});
  ASSERT_EQ(udf.status, 200) << udf.body.dump();
  for (const auto& h : udf.body.at("hits")) EXPECT_TRUE(h.at("metadata").is_object());
}

TEST(ServiceDatasets, ListAndProjection) {
  Service svc;
  add_blobs(svc, 50, 5);
  const auto list = svc.handle("GET", "/datasets", "");
  ASSERT_EQ(list.status, 200);
  ASSERT_EQ(list.body.at("datasets").size(), 1u);
  EXPECT_EQ(list.body.at("datasets")[0].at("count"), 50);
  const auto proj = svc.handle("GET", "/datasets/d/projection", "", {{"dims", "2"}});
  ASSERT_EQ(proj.status, 200);
  ASSERT_EQ(proj.body.at("points").size(), 50u);
  EXPECT_EQ(proj.body.at("points")[0].at("coords").size(), 2u);
  EXPECT_EQ(svc.handle("GET", "/datasets/zzz/projection", "").status, 404);
  EXPECT_EQ(svc.handle("GET", "/datasets/d/projection", "", {{"dims", "x"}}).status, 400);
}

TEST(ServiceDatasets, IngestFromFiles) {
  std::mt19937_64 rng(4);
  const auto store = oracle::random_store(rng, 20, 3);
  const auto dir = std::filesystem::temp_directory_path() / "simsearch_service_ingest";
  std::filesystem::remove_all(dir);
  save_store_dir(store, dir);
  Service svc;
  const auto r = post(svc, "/datasets", {{"name", "disk"}, {"store", dir.string()}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body.at("count"), 20);
  EXPECT_EQ(r.body.at("dim"), 3);
  Service rooted(dir.parent_path());
  std::filesystem::remove_all(dir);
}

TEST(ServiceSessions, ZeroLabelFeedbackLeavesHitsAndQuery) {
  Service svc;
  add_blobs(svc);
  const auto created = post(svc, "/sessions", {{"dataset", "d"}, {"query_id", 4}, {"k", 10}});
  ASSERT_EQ(created.status, 200) << created.body.dump();
  const auto id = created.body.at("session_id").get<std::string>();
  const auto fb = post(svc, "/sessions/" + id + "/feedback", {{"labels", json::array()}, {"strategy", "query"}});
  ASSERT_EQ(fb.status, 200) << fb.body.dump();
  EXPECT_EQ(fb.body.at("hits"), created.body.at("hits"));
  const auto session = svc.handle("GET", "/sessions/" + id, "");
  ASSERT_EQ(session.status, 200);
  EXPECT_EQ(fb.body.at("query"), session.body.at("query"));
  const auto fbw = post(svc, "/sessions/" + id + "/feedback", {{"labels", json::array()}, {"strategy", "weights"}});
  ASSERT_EQ(fbw.status, 200) << fbw.body.dump();
  EXPECT_EQ(fbw.body.at("hits"), created.body.at("hits"));
}

TEST(ServiceSessions, FeedbackMovesQueryAndReplaysDeterministically) {
  auto run = [] {
    Service svc;
  add_blobs(svc);
    const auto created = post(svc, "/sessions", {{"dataset", "d"}, {"query_id", 4}, {"k", 10}});
    const auto id = created.body.at("session_id").get<std::string>();
    const auto hits = created.body.at("hits");
    json labels = json::array();
    labels.push_back({{"id", hits[0].at("id")}, {"label", "positive"}});
    labels.push_back({{"id", hits[9].at("id")}, {"label", "negative"}});
    const auto fb = post(svc, "/sessions/" + id + "/feedback", {{"labels", labels}, {"strategy", "query"}});
    EXPECT_EQ(fb.status, 200) << fb.body.dump();
    EXPECT_TRUE(fb.body.contains("new_query"));
    const auto fb2 = post(svc, "/sessions/" + id + "/feedback", {{"labels", labels}, {"strategy", "weights"}});
    EXPECT_EQ(fb2.status, 200) << fb2.body.dump();
    EXPECT_TRUE(fb2.body.contains("pending_updates"));
    return svc.handle("GET", "/sessions/" + id, "").body;
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.at("rounds"), b.at("rounds"));
  // Round 0 is the initial search.
  ASSERT_EQ(a.at("rounds").size(), 3u);
  EXPECT_EQ(a.at("rounds")[0].at("round"), 0);
  EXPECT_EQ(a.at("rounds")[2].at("strategy"), "weights");
}

TEST(ServiceSessions, BadFeedbackRejected) {
  Service svc;
  add_blobs(svc);
  const auto id = post(svc, "/sessions", {{"dataset", "d"}, {"query_id", 4}, {"k", 5}}).body.at("session_id").get<std::string>();
  EXPECT_EQ(post(svc, "/sessions/" + id + "/feedback", {{"strategy", "magic"}}).status, 400);
  EXPECT_EQ(post(svc, "/sessions/" + id + "/feedback",
                 {{"labels", {{{"id", 123456}, {"label", "positive"}}}}, {"strategy", "query"}}).status, 404);
  EXPECT_EQ(post(svc, "/sessions/" + id + "/feedback",
                 {{"labels", {{{"id", 1}, {"label", "maybe"}}}}, {"strategy", "query"}}).status, 400);
}

TEST(ServiceMultibody, PlayerScenesSearch) {
  const auto inst = synthetic::player_scenes(5);
  Service svc;
  VectorStore store(inst.objects.front().embedding.size());
  for (const auto& o : inst.objects) store.add(o.embedding, o.class_label);
  svc.add_dataset("scenes", std::move(store), inst.objects);
  const auto r = post(svc, "/search", {{"dataset", "scenes"},
                                       {"mode", "multibody"},
                                       {"k", 1},
                                       {"multi_query", multi_query_to_json(inst.query)},
                                       {"constraints", constraints_to_json(inst.constraints)}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const auto want = brute_force_best(inst.objects, inst.query, inst.constraints, Metric::kEuclidean);
  ASSERT_TRUE(want.has_value());
  EXPECT_DOUBLE_EQ(r.body.at("alignment").at("score").get<double>(), want->score);
  EXPECT_TRUE(r.body.at("stats").contains("tuples_evaluated"));
}

TEST(ServiceBind, ResolveBindAddress) {
  ::unsetenv("BIND_ADDR");
  EXPECT_EQ(service::resolve_bind("127.0.0.1", 8080), std::make_pair(std::string("127.0.0.1"), 8080));
  ::setenv("BIND_ADDR", "0.0.0.0:9000", 1);
  EXPECT_EQ(service::resolve_bind("127.0.0.1", 8080), std::make_pair(std::string("0.0.0.0"), 9000));
  ::setenv("BIND_ADDR", ":7000", 1);
  EXPECT_EQ(service::resolve_bind("127.0.0.1", 8080).second, 7000);
  ::setenv("BIND_ADDR", "nope", 1);
  EXPECT_THROW(service::resolve_bind("127.0.0.1", 8080), InvalidArgument);
  ::unsetenv("BIND_ADDR");
}
