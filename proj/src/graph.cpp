#include "netshock/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <ostream>

#include "netshock/csv.hpp"
#include "netshock/error.hpp"
#include "netshock/parallel.hpp"

namespace netshock {

namespace {

void build_csr(std::size_t n, std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
               std::vector<std::size_t>& ptr, std::vector<std::uint32_t>& idx) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  ptr.assign(n + 1, 0);
  for (const auto& [u, v] : pairs) ++ptr[u + 1];
  std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
  idx.resize(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) idx[k] = pairs[k].second;
}

// Sum of f(i) over [0, n) with a fixed block decomposition, so the rounding is
// independent of the thread count.
template <typename F>
double blocked_sum(std::size_t n, F&& f) {
  const std::size_t n_blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(n_blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
    double s = 0;
    const std::size_t hi = std::min(n, (b + 1) * kReductionBlock);
    for (std::size_t i = b * kReductionBlock; i < hi; ++i) s += f(i);
    partial[b] = s;
  }
  double total = 0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

TradeGraph::TradeGraph(std::vector<std::string> nodes, std::vector<GraphEdge> edges, std::vector<char> present)
    : nodes_(std::move(nodes)), present_(std::move(present)) {
  const std::size_t n = nodes_.size();
  if (present_.empty()) present_.assign(n, 1);
  if (present_.size() != n) throw Error(ErrorCategory::dimension, "presence mask does not match node count");
  for (std::size_t i = 0; i < n; ++i) {
    if (!index_.emplace(nodes_[i], static_cast<std::uint32_t>(i)).second) {
      throw Error(ErrorCategory::domain, "duplicate graph node '" + nodes_[i] + "'");
    }
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> und, out, in;
  for (const auto& e : edges) {
    if (e.from >= n || e.to >= n) throw Error(ErrorCategory::dimension, "edge endpoint outside node universe");
    if (!present_[e.from] || !present_[e.to]) continue;
    edges_.push_back(e);
    if (e.from == e.to) continue;
    und.emplace_back(e.from, e.to);
    und.emplace_back(e.to, e.from);
    out.emplace_back(e.from, e.to);
    in.emplace_back(e.to, e.from);
  }
  build_csr(n, und, adj_ptr_, adj_);
  build_csr(n, out, out_ptr_, out_);
  build_csr(n, in, in_ptr_, in_);
}

TradeGraph TradeGraph::from_flows(const std::vector<Flow>& flows, const std::vector<std::string>& extra_nodes) {
  std::vector<std::string> ids = extra_nodes;
  for (const auto& f : flows) {
    ids.push_back(f.from);
    ids.push_back(f.to);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::unordered_map<std::string, std::uint32_t> idx;
  for (std::size_t i = 0; i < ids.size(); ++i) idx.emplace(ids[i], static_cast<std::uint32_t>(i));
  std::vector<GraphEdge> edges;
  edges.reserve(flows.size());
  for (const auto& f : flows) edges.push_back({idx.at(f.from), idx.at(f.to), f.weight});
  return TradeGraph(std::move(ids), std::move(edges));
}

std::size_t TradeGraph::present_count() const noexcept {
  return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), 1));
}

std::size_t TradeGraph::index_of(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nodes_.size() : it->second;
}

std::string_view to_string(CentralityKind kind) {
  switch (kind) {
    case CentralityKind::degree: return "degree";
    case CentralityKind::indegree: return "indegree";
    case CentralityKind::outdegree: return "outdegree";
    case CentralityKind::betweenness: return "betweenness";
    case CentralityKind::eigenvector: return "eigenvector";
  }
  return "unknown";
}

CentralityKind parse_centrality_kind(std::string_view text) {
  for (auto k : {CentralityKind::degree, CentralityKind::indegree, CentralityKind::outdegree,
                 CentralityKind::betweenness, CentralityKind::eigenvector}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCategory::usage, "unknown centrality kind '" + std::string(text) + "'");
}

CentralityVector degree_centrality(const TradeGraph& graph, DegreeVariant variant) {
  CentralityVector out;
  out.kind = variant == DegreeVariant::total ? CentralityKind::degree
             : variant == DegreeVariant::in  ? CentralityKind::indegree
                                             : CentralityKind::outdegree;
  out.values.resize(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (!graph.present(i)) {
      out.values[i] = CentralityVector::missing();
      continue;
    }
    const std::size_t d = variant == DegreeVariant::total ? graph.neighbors(i).size()
                          : variant == DegreeVariant::in  ? graph.in_neighbors(i).size()
                                                          : graph.out_neighbors(i).size();
    out.values[i] = static_cast<double>(d);
  }
  return out;
}

CentralityVector betweenness_centrality(const TradeGraph& graph) {
  const std::size_t n = graph.size();
  // Block count depends on n only; each block sums its sources in order and
  // blocks are combined in order, so the result is thread-count independent.
  const std::size_t block = std::max<std::size_t>(64, (n + 63) / 64);
  const std::size_t n_blocks = (n + block - 1) / block;
  std::vector<std::vector<double>> partial(n_blocks);

#pragma omp parallel
  {
    std::vector<double> sigma(n), delta(n);
    std::vector<int> dist(n);
    std::vector<std::uint32_t> order;
    order.reserve(n);
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
      std::vector<double> acc(n, 0.0);
      const std::size_t hi = std::min(n, (b + 1) * block);
      for (std::size_t s = b * block; s < hi; ++s) {
        if (!graph.present(s)) continue;
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(delta.begin(), delta.end(), 0.0);
        std::fill(dist.begin(), dist.end(), -1);
        order.clear();
        sigma[s] = 1;
        dist[s] = 0;
        order.push_back(static_cast<std::uint32_t>(s));
        for (std::size_t head = 0; head < order.size(); ++head) {
          const auto v = order[head];
          for (auto w : graph.neighbors(v)) {
            if (dist[w] < 0) {
              dist[w] = dist[v] + 1;
              order.push_back(w);
            }
            if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
          }
        }
        for (std::size_t k = order.size(); k-- > 1;) {
          const auto w = order[k];
          for (auto v : graph.neighbors(w)) {
            if (dist[v] == dist[w] - 1) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
          }
          acc[w] += delta[w];
        }
      }
      partial[b] = std::move(acc);
    }
  }

  CentralityVector out;
  out.kind = CentralityKind::betweenness;
  out.values.assign(n, 0.0);
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < n; ++i) out.values[i] += p[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = graph.present(i) ? out.values[i] / 2.0 : CentralityVector::missing();
  }
  return out;
}

EigenvectorResult eigenvector_centrality(const TradeGraph& graph, const EigenvectorOptions& options) {
  const std::size_t n = graph.size();
  const std::size_t m = graph.present_count();
  if (m == 0) throw Error(ErrorCategory::domain, "eigenvector centrality of an empty graph");
  if (graph.undirected_edge_count() == 0) {
    throw Error(ErrorCategory::domain, "eigenvector centrality undefined: adjacency is zero (dominant eigenvalue 0)");
  }

  std::vector<double> v(n, 0.0), av(n), next(n);
  const double start = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 0; i < n; ++i) v[i] = graph.present(i) ? start : 0.0;

  auto multiply = [&](const std::vector<double>& x, std::vector<double>& y) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      double s = 0;
      for (auto j : graph.neighbors(i)) s += x[j];
      y[i] = s;
    }
  };

  // Power iteration on A + I: same eigenvectors as A, but the dominant
  // eigenvalue is strictly largest in modulus even for bipartite graphs.
  double lambda = 0;
  double change = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    multiply(v, av);
    lambda = blocked_sum(n, [&](std::size_t i) { return v[i] * av[i]; });
    double residual = 0;
    for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(av[i] - lambda * v[i]));
    for (std::size_t i = 0; i < n; ++i) next[i] = av[i] + v[i];
    const double norm = std::sqrt(blocked_sum(n, [&](std::size_t i) { return next[i] * next[i]; }));
    change = 0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= norm;
      change = std::max(change, std::abs(next[i] - v[i]));
    }
    v.swap(next);
    if (change < options.tol && residual <= options.tol) {
      EigenvectorResult res;
      res.centrality.kind = CentralityKind::eigenvector;
      res.centrality.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        res.centrality.values[i] = graph.present(i) ? std::max(0.0, v[i]) : CentralityVector::missing();
      }
      res.eigenvalue = lambda;
      res.iterations = iter;
      return res;
    }
  }
  throw ConvergenceError("eigenvector power iteration did not converge in " + std::to_string(options.max_iter) +
                             " iterations (last change " + csv::format_double(change) + ", eigenvalue estimate " +
                             csv::format_double(lambda) + ")",
                         options.max_iter, change);
}

CentralityVector compute_centrality(const TradeGraph& graph, CentralityKind kind, const EigenvectorOptions& options) {
  switch (kind) {
    case CentralityKind::degree: return degree_centrality(graph, DegreeVariant::total);
    case CentralityKind::indegree: return degree_centrality(graph, DegreeVariant::in);
    case CentralityKind::outdegree: return degree_centrality(graph, DegreeVariant::out);
    case CentralityKind::betweenness: return betweenness_centrality(graph);
    case CentralityKind::eigenvector: return eigenvector_centrality(graph, options).centrality;
  }
  throw Error(ErrorCategory::domain, "unsupported centrality kind");
}

TradeGraph remove_nodes(const TradeGraph& graph, const std::unordered_set<std::string>& ids) {
  std::vector<char> present(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    present[i] = graph.present(i) && ids.count(graph.node(i)) == 0 ? 1 : 0;
  }
  return TradeGraph(graph.nodes(), graph.edges(), std::move(present));
}

std::vector<double> standardize(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw Error(ErrorCategory::domain, "standardization needs at least two values");
  double mean = 0;
  for (double x : values) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0;
  for (double x : values) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0) || sd <= 1e-14 * std::max(1.0, std::abs(mean))) {
    throw Error(ErrorCategory::domain, "standardization of a constant vector (zero variance)");
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

PredictedCentralityChange predicted_centrality_change(const TradeGraph& graph,
                                                      const std::unordered_set<std::string>& conflict_ids,
                                                      CentralityKind kind, CentralityTransform transform,
                                                      const EigenvectorOptions& options) {
  const TradeGraph after = remove_nodes(graph, conflict_ids);
  const CentralityVector before_c = compute_centrality(graph, kind, options);
  const CentralityVector after_c = compute_centrality(after, kind, options);

  std::vector<std::size_t> sample;
  for (std::size_t i = 0; i < after.size(); ++i) {
    if (after.present(i)) sample.push_back(i);
  }
  std::sort(sample.begin(), sample.end(),
            [&](std::size_t a, std::size_t b) { return graph.node(a) < graph.node(b); });

  PredictedCentralityChange out;
  out.kind = kind;
  out.transform = transform;
  for (auto i : sample) {
    const double b = before_c.values[i];
    const double a = after_c.values[i];
    out.firm_ids.push_back(graph.node(i));
    out.raw_delta.push_back(a - b);
    out.transformed_delta.push_back(transform == CentralityTransform::log1p ? std::log1p(a) - std::log1p(b) : a - b);
  }
  out.standardized = standardize(out.transformed_delta);
  return out;
}

void write_centrality(std::ostream& out, const PredictedCentralityChange& change) {
  csv::Writer w(out, {"firm_id", "kind", "raw", "transformed", "standardized"});
  for (std::size_t k = 0; k < change.firm_ids.size(); ++k) {
    w.field(change.firm_ids[k])
        .field(to_string(change.kind))
        .field(change.raw_delta[k])
        .field(change.transformed_delta[k])
        .field(change.standardized[k]);
    w.end_row();
  }
}

}  // namespace netshock
