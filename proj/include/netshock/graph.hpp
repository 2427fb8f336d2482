#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "netshock/ingest.hpp"

namespace netshock {

struct GraphEdge {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  double weight = 0;
};

// Firm-level trade graph over a fixed node universe. Directed weighted edges
// are kept as given; the undirected 0/1 adjacency (g_ij = 1 iff trade in either
// direction, no self-loops) is derived once at construction. Removed nodes stay
// in the universe but are marked absent, so every centrality vector computed on
// a subgraph aligns index-by-index with the original graph.
class TradeGraph {
 public:
  TradeGraph() = default;
  TradeGraph(std::vector<std::string> nodes, std::vector<GraphEdge> edges, std::vector<char> present = {});

  // Universe = sorted union of flow endpoints, plus any extra ids.
  static TradeGraph from_flows(const std::vector<Flow>& flows, const std::vector<std::string>& extra_nodes = {});

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t present_count() const noexcept;
  bool present(std::size_t i) const { return present_[i] != 0; }
  const std::string& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  // Returns size() for unknown ids.
  std::size_t index_of(const std::string& id) const;

  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {adj_.data() + adj_ptr_[i], adj_ptr_[i + 1] - adj_ptr_[i]};
  }
  std::span<const std::uint32_t> out_neighbors(std::size_t i) const {
    return {out_.data() + out_ptr_[i], out_ptr_[i + 1] - out_ptr_[i]};
  }
  std::span<const std::uint32_t> in_neighbors(std::size_t i) const {
    return {in_.data() + in_ptr_[i], in_ptr_[i + 1] - in_ptr_[i]};
  }
  std::size_t undirected_edge_count() const noexcept { return adj_.size() / 2; }
  const std::vector<GraphEdge>& edges() const noexcept { return edges_; }

 private:
  std::vector<std::string> nodes_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<char> present_;
  std::vector<GraphEdge> edges_;
  std::vector<std::size_t> adj_ptr_, out_ptr_, in_ptr_;
  std::vector<std::uint32_t> adj_, out_, in_;
};

enum class CentralityKind { degree, indegree, outdegree, betweenness, eigenvector };
enum class CentralityTransform { none, log1p };

std::string_view to_string(CentralityKind kind);
CentralityKind parse_centrality_kind(std::string_view text);

// Per-node scores aligned with TradeGraph::nodes(). Absent nodes hold NaN.
struct CentralityVector {
  CentralityKind kind = CentralityKind::degree;
  CentralityTransform transform = CentralityTransform::none;
  std::vector<double> values;

  static constexpr double missing() noexcept { return std::numeric_limits<double>::quiet_NaN(); }
  bool is_missing(std::size_t i) const { return values[i] != values[i]; }
};

enum class DegreeVariant { total, in, out };

CentralityVector degree_centrality(const TradeGraph& graph, DegreeVariant variant = DegreeVariant::total);

// Sum over unordered connected pairs {k, j}, i not in {k, j}, of the share of
// shortest k-j paths through i. Brandes accumulation, unnormalised.
CentralityVector betweenness_centrality(const TradeGraph& graph);

struct EigenvectorOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

struct EigenvectorResult {
  CentralityVector centrality;
  double eigenvalue = 0;
  int iterations = 0;
};

// Dominant eigenvector of the undirected 0/1 adjacency, non-negative with unit
// Euclidean norm. Throws Error{domain} when the graph has no edges and
// ConvergenceError when max_iter is exhausted.
EigenvectorResult eigenvector_centrality(const TradeGraph& graph, const EigenvectorOptions& options = {});

CentralityVector compute_centrality(const TradeGraph& graph, CentralityKind kind,
                                    const EigenvectorOptions& options = {});

// Induced subgraph on the nodes not listed; ids missing from the graph are ignored.
TradeGraph remove_nodes(const TradeGraph& graph, const std::unordered_set<std::string>& ids);

// Mean 0, sample standard deviation 1. Throws Error{domain} for fewer than two
// values or zero variance.
std::vector<double> standardize(std::span<const double> values);

struct PredictedCentralityChange {
  CentralityKind kind = CentralityKind::degree;
  CentralityTransform transform = CentralityTransform::none;
  std::vector<std::string> firm_ids;  // surviving non-conflict firms, sorted
  std::vector<double> raw_delta;
  std::vector<double> transformed_delta;
  std::vector<double> standardized;
};

// Change in centrality when the conflict firms are cut out of the preconflict
// graph, for every surviving firm, standardized over those firms.
PredictedCentralityChange predicted_centrality_change(const TradeGraph& graph,
                                                      const std::unordered_set<std::string>& conflict_ids,
                                                      CentralityKind kind,
                                                      CentralityTransform transform = CentralityTransform::none,
                                                      const EigenvectorOptions& options = {});

void write_centrality(std::ostream& out, const PredictedCentralityChange& change);

}  // namespace netshock
