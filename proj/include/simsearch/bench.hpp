#pragma once

// Experiment runners behind `simsearch bench`. Output layout is described in
// docs/results_schema.md.

#include <cstdint>
#include <string_view>

#include <json.hpp>

namespace simsearch::bench {

struct BenchOptions {
  std::uint64_t seed = 0;
  std::size_t runs = 100;        // seeds / instances per experiment
  std::size_t tasks = 3;         // subseq only
  std::size_t instances = 24;    // subseq only, per task
};

nlohmann::json run_subseq(const BenchOptions& opt);
nlohmann::json run_clusters(const BenchOptions& opt);
nlohmann::json run_multibody(const BenchOptions& opt);
nlohmann::json run_planner(const BenchOptions& opt);

// Dispatch by name: subseq, clusters, multibody, planner.
nlohmann::json run(std::string_view kind, const BenchOptions& opt);

}  // namespace simsearch::bench
