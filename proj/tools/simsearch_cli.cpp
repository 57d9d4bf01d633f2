// Command-line front end: ingest, search, serve, bench.
//
// Every successful command prints one JSON document on stdout and exits 0.
// A missing store or input file exits 2; other failures exit 1.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simsearch/bench.hpp"
#include "simsearch/error.hpp"
#include "simsearch/multibody_io.hpp"
#include "simsearch/service.hpp"
#include "simsearch/store_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simsearch;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNotFound = 2;

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw NotFound(what + " not found: " + p.string());
}

Embedding parse_vector(const std::string& text) {
  Embedding out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stof(tok, &used));
      if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument("bad number '" + tok + "' in --query");
    }
  }
  if (out.empty()) throw InvalidArgument("--query is empty");
  return out;
}

// Inline JSON when the argument starts with '[' or '{', else a file path.
json json_arg(const std::string& value, const std::string& what) {
  if (!value.empty() && (value.front() == '[' || value.front() == '{')) return json::parse(value);
  require_exists(value, what);
  return read_json_file(value);
}

void emit(const json& out) { std::cout << out.dump(2) << "\n"; }

struct IngestArgs {
  std::string input, meta, store, scenes;
};

int run_ingest(const IngestArgs& a) {
  require_exists(a.input, "input file");
  std::optional<fs::path> meta;
  if (!a.meta.empty()) {
    require_exists(a.meta, "metadata file");
    meta = a.meta;
  }
  const auto store = load_store(a.input, meta);
  fs::create_directories(a.store);
  save_store_dir(store, a.store);
  json out{{"store", a.store}, {"count", store.size()}, {"dim", store.dim()}};
  if (!a.scenes.empty()) {
    require_exists(a.scenes, "scenes file");
    const auto scenes = read_scenes(a.scenes);
    write_scenes(scenes, fs::path(a.store) / "scenes.json");
    out["scene_objects"] = scenes.size();
  }
  emit(out);
  return 0;
}

struct SearchArgs {
  std::string store, mode = "classic", query, scenes, constraints, multi_query, metric, strategy, plan;
  std::optional<std::int64_t> query_id;
  std::size_t k = 10;
  std::optional<double> lambda, reg_c, alpha;
  std::optional<std::size_t> batch, epochs, coreset, seed;
  std::vector<std::string> filters, udfs;
};

int run_search(const SearchArgs& a) {
  require_exists(store_vset_path(a.store), "store");
  std::optional<std::vector<SceneObject>> scenes;
  fs::path scenes_path = a.scenes.empty() ? fs::path(a.store) / "scenes.json" : fs::path(a.scenes);
  if (!a.scenes.empty()) require_exists(scenes_path, "scenes file");
  if (fs::exists(scenes_path)) scenes = read_scenes(scenes_path);

  service::Service svc;
  svc.add_dataset("store", load_store_dir(a.store), std::move(scenes));

  json req{{"dataset", "store"}, {"mode", a.mode}, {"k", a.k}};
  if (a.mode == "multibody") {
    if (a.multi_query.empty()) throw InvalidArgument("--mode multibody needs --multi-query");
    req["multi_query"] = json_arg(a.multi_query, "multi-query file");
    if (!a.constraints.empty()) req["constraints"] = json_arg(a.constraints, "constraints file");
    if (!a.strategy.empty()) req["strategy"] = a.strategy;
  } else if (a.query_id) {
    req["query_id"] = *a.query_id;
  } else if (!a.query.empty()) {
    req["query"] = parse_vector(a.query);
  } else {
    throw InvalidArgument("need --query or --query-id");
  }
  if (!a.metric.empty()) req["metric"] = a.metric;
  if (a.lambda) req["lambda"] = *a.lambda;
  if (a.batch) req["batch"] = *a.batch;
  if (a.reg_c) req["reg_c"] = *a.reg_c;
  if (a.epochs) req["epochs"] = *a.epochs;
  if (a.coreset) req["coreset_size"] = *a.coreset;
  if (a.seed) req["seed"] = *a.seed;
  if (a.alpha) req["alpha"] = *a.alpha;
  if (!a.plan.empty()) req["plan"] = a.plan;
  if (!a.filters.empty()) {
    std::string expr;
    for (const auto& f : a.filters) expr += (expr.empty() ? "" : ",") + f;
    req["filter"] = expr;
  }
  if (!a.udfs.empty()) req["udfs"] = a.udfs;

  const auto resp = svc.search(req);
  emit(resp.body);
  return resp.status == 200 ? 0 : kExitError;
}

struct ServeArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string store_root = ".";
};

int run_serve(const ServeArgs& a) {
  require_exists(a.store_root, "store root");
  service::Service svc(a.store_root);
  const auto [host, port] = service::resolve_bind(a.host, a.port);
  std::cerr << "listening on " << host << ":" << port << "\n";
  return service::serve_http(svc, host, port) ? 0 : kExitError;
}

struct BenchArgs {
  std::string kind, out;
  bench::BenchOptions opt;
};

int run_bench(const BenchArgs& a) {
  const auto result = bench::run(a.kind, a.opt);
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw std::runtime_error("cannot write " + a.out);
    f << result.dump(2) << "\n";
  }
  emit(result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vector similarity search engine"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Import a .vset (+ .jsonl) into a store directory");
  ingest_cmd->add_option("--input", ingest.input, "Vector file (.vset)")->required();
  ingest_cmd->add_option("--meta", ingest.meta, "Metadata sidecar (.jsonl)");
  ingest_cmd->add_option("--store", ingest.store, "Destination store directory")->required();
  ingest_cmd->add_option("--scenes", ingest.scenes, "Scenes file copied into the store");

  SearchArgs search;
  auto* search_cmd = app.add_subcommand("search", "Search a store directory");
  search_cmd->add_option("--store", search.store, "Store directory")->required();
  search_cmd->add_option("--mode", search.mode, "classic|local|global|multibody")
      ->check(CLI::IsMember({"classic", "local", "global", "multibody"}));
  search_cmd->add_option("--k", search.k, "Number of hits")->check(CLI::PositiveNumber);
  search_cmd->add_option("--query", search.query, "Comma-separated query vector");
  search_cmd->add_option("--query-id", search.query_id, "Use a stored item as the query");
  search_cmd->add_option("--metric", search.metric, "euclidean|cosine-distance|negative-inner-product");
  search_cmd->add_option("--lambda", search.lambda, "Decay factor for local search");
  search_cmd->add_option("--batch", search.batch, "Batch size for local search");
  search_cmd->add_option("--reg-c", search.reg_c, "Inverse regularization for global search");
  search_cmd->add_option("--epochs", search.epochs, "Training epochs for global search");
  search_cmd->add_option("--coreset", search.coreset, "Coreset size for global search");
  search_cmd->add_option("--seed", search.seed, "Training seed");
  search_cmd->add_option("--scenes", search.scenes, "Scenes file (default DIR/scenes.json)");
  search_cmd->add_option("--constraints", search.constraints, "Constraint list (file or inline JSON)");
  search_cmd->add_option("--multi-query", search.multi_query, "Multi-object query (file or inline JSON)");
  search_cmd->add_option("--strategy", search.strategy, "auto|per_object|constraint_first|brute_force");
  search_cmd->add_option("--filter", search.filters, "Filter expression, e.g. class=car or score=0.2..0.8");
  search_cmd->add_option("--udf", search.udfs, "UDF predicate SPEC:COST:SEL");
  search_cmd->add_option("--alpha", search.alpha, "Post-filter fetch multiplier");
  search_cmd->add_option("--plan", search.plan, "auto|prefilter|postfilter");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API (BIND_ADDR overrides --port)");
  serve_cmd->add_option("--port", serve.port, "Port");
  serve_cmd->add_option("--host", serve.host, "Host");
  serve_cmd->add_option("--store-root", serve.store_root, "Directory of store directories");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Run an experiment and emit its measurements");
  bench_cmd->add_option("kind", bench_args.kind, "subseq|clusters|multibody|planner")
      ->required()
      ->check(CLI::IsMember({"subseq", "clusters", "multibody", "planner"}));
  bench_cmd->add_option("--seed", bench_args.opt.seed, "Base seed");
  bench_cmd->add_option("--runs", bench_args.opt.runs, "Seeds per experiment");
  bench_cmd->add_option("--tasks", bench_args.opt.tasks, "Planted tasks (subseq)");
  bench_cmd->add_option("--instances", bench_args.opt.instances, "Instances per task (subseq)");
  bench_cmd->add_option("--out", bench_args.out, "Also write the JSON to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) return run_ingest(ingest);
    if (*search_cmd) return run_search(search);
    if (*serve_cmd) return run_serve(serve);
    if (*bench_cmd) return run_bench(bench_args);
  } catch (const NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNotFound;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == FormatErrorCode::kIo ? kExitNotFound : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
