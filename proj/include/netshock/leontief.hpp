#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "netshock/ingest.hpp"
#include "netshock/kv_config.hpp"
#include "netshock/sparse.hpp"

namespace netshock {

struct EconomyConfig {
  double alpha = 0.18;  // labor (non-intermediate) share
  double tol = 1e-10;
  int max_iter = 10000;
  // Optional per-year labor share; years not listed use alpha.
  std::map<int, double> alpha_by_year;

  double alpha_for(int year) const;
  void validate() const;

  // Keys: alpha, tol, max_iter, and alpha_<year>.
  static EconomyConfig from_config(const KeyValueConfig& cfg);
};

// Firm-level input-output matrix. omega(i, j) is the share of buyer j's
// in-network inputs supplied by i (row = supplier, column = buyer).
struct IOMatrix {
  int year = 0;
  std::vector<std::string> firms;
  SparseMatrix omega;

  std::size_t size() const noexcept { return firms.size(); }
  std::unordered_map<std::string, std::size_t> index() const;
};

struct RevenueVector {
  int year = 0;
  std::vector<double> values;
};

struct DemandVector {
  int year = 0;
  std::vector<double> values;
  std::size_t negative_count = 0;
  double negative_mass = 0;  // sum of the negative entries (<= 0)
};

// Column shares of yearly weights. Self-flows and flows with an endpoint
// outside `universe` are ignored; buyers without inputs get a zero column.
IOMatrix build_io_matrix(const std::vector<Flow>& flows, const std::vector<std::string>& universe, int year);

// Zero every row and column of the listed firms. Surviving columns keep their
// original shares unless renormalize is set.
IOMatrix truncate_network(const IOMatrix& io, const std::unordered_set<std::string>& conflict_firms,
                          bool renormalize = false);

// xi = r - (1 - alpha) * Omega * r.
DemandVector backout_demand(const IOMatrix& io, const RevenueVector& revenue, const EconomyConfig& config);

struct RevenueSolution {
  RevenueVector revenue;
  int iterations = 0;
  // L1 norm of r_{k+1} - r_k for each iteration.
  std::vector<double> step_norms;
};

// Solves [I - (1 - alpha) Omega] r = xi by Neumann iteration
// r_{k+1} = (1 - alpha) Omega r_k + xi, starting from r_0 = xi. Stops when
// |r_{k+1} - r_k|_1 <= tol * max(1, |r_{k+1}|_1). Throws ConvergenceError with
// the largest column sum when max_iter is exhausted.
RevenueSolution solve_revenue(const IOMatrix& io, const DemandVector& demand, const EconomyConfig& config);

// Dense LU solve of the same system; limited to n <= 2000.
RevenueVector solve_revenue_direct(const IOMatrix& io, const DemandVector& demand, const EconomyConfig& config);

void write_io_matrix(std::ostream& out, const IOMatrix& io);
IOMatrix parse_io_matrix(std::istream& in, const std::vector<std::string>& universe, int year);

void write_firm_vector(std::ostream& out, const std::vector<std::string>& firms, const std::vector<double>& values);
std::map<std::string, double> parse_firm_vector(std::istream& in);

}  // namespace netshock
