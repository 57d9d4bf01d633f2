#pragma once

// JSON request handling shared by the HTTP server, the CLI and tests. Every
// endpoint is reachable without sockets through Service::handle.
//
// Endpoints:
//   GET  /health
//   GET  /datasets
//   POST /datasets                     {name, vset_path, meta_path?, scenes_path?} or {name, store}
//   GET  /datasets/{name}/projection?dims=2
//   POST /search                       see SearchSpec
//   POST /sessions                     {dataset, query?|query_id?, k?, mode?, ...}
//   GET  /sessions/{id}
//   POST /sessions/{id}/feedback       {labels:[{id, label}], strategy, params?}
//
// Status codes: 200 success, 400 malformed request, 404 unknown dataset /
// session / route / file, 422 unreadable or invalid data file.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "simsearch/core.hpp"
#include "simsearch/multibody.hpp"

namespace simsearch::service {

struct Response {
  int status = 200;
  nlohmann::json body;
};

struct Dataset;
struct Session;

class Service {
 public:
  // Datasets under `store_root` (directories holding store.vset, optionally
  // store.jsonl and scenes.json) are loaded eagerly, named by directory.
  explicit Service(std::filesystem::path store_root = {});
  ~Service();

  Response handle(std::string_view method, std::string_view path, std::string_view body,
                  const std::map<std::string, std::string>& params = {});

  // Registers or replaces (as a new version) an in-memory dataset.
  std::uint64_t add_dataset(const std::string& name, VectorStore store,
                            std::optional<std::vector<SceneObject>> scenes = std::nullopt);

  Response list_datasets() const;
  Response ingest(const nlohmann::json& req);
  Response search(const nlohmann::json& req) const;
  Response projection(const std::string& name, std::size_t dims) const;
  Response create_session(const nlohmann::json& req);
  Response get_session(const std::string& id) const;
  Response feedback(const std::string& id, const nlohmann::json& req);

 private:
  std::shared_ptr<Dataset> find_dataset(const std::string& name) const;
  std::shared_ptr<Session> find_session(const std::string& id) const;

  std::filesystem::path store_root_;
  mutable std::shared_mutex datasets_mu_;
  std::map<std::string, std::shared_ptr<Dataset>> datasets_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
};

// host:port from BIND_ADDR ("host:port", ":port" or "port"), else the defaults.
std::pair<std::string, int> resolve_bind(const std::string& default_host, int default_port);

// Blocks serving HTTP until the process is stopped. Returns false when the
// socket cannot be bound.
bool serve_http(Service& service, const std::string& host, int port);

}  // namespace simsearch::service
