#include "netshock/leontief.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <Eigen/Dense>

#include "netshock/csv.hpp"
#include "netshock/error.hpp"
#include "netshock/parallel.hpp"

namespace netshock {

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  SparseMatrix m(rows, cols);
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t k = 0; k < triplets.size();) {
    const auto& t = triplets[k];
    if (t.row >= rows || t.col >= cols) throw Error(ErrorCategory::dimension, "triplet outside matrix bounds");
    double v = 0;
    std::size_t j = k;
    while (j < triplets.size() && triplets[j].row == t.row && triplets[j].col == t.col) v += triplets[j++].value;
    if (v != 0.0) {
      m.col_idx_.push_back(t.col);
      m.values_.push_back(v);
      ++m.row_ptr_[t.row + 1];
    }
    k = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

double SparseMatrix::coeff(std::size_t r, std::size_t c) const {
  auto idx = row_indices(r);
  auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<std::uint32_t>(c));
  if (it == idx.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - idx.begin())];
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y, double scale) const {
  if (x.size() != cols_ || y.size() != rows_) throw Error(ErrorCategory::dimension, "matrix-vector size mismatch");
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows_); ++r) {
    double s = 0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
    y[r] = scale * s;
  }
}

std::vector<double> SparseMatrix::column_sums() const {
  std::vector<double> sums(cols_, 0.0);
  for (std::size_t k = 0; k < values_.size(); ++k) sums[col_idx_[k]] += values_[k];
  return sums;
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(values_.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out.push_back({static_cast<std::uint32_t>(r), col_idx_[k], values_[k]});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

double EconomyConfig::alpha_for(int year) const {
  auto it = alpha_by_year.find(year);
  return it == alpha_by_year.end() ? alpha : it->second;
}

void EconomyConfig::validate() const {
  auto check = [](double a) {
    if (!(a > 0.0 && a <= 1.0)) {
      throw Error(ErrorCategory::domain, "labor share alpha must lie in (0, 1], got " + csv::format_double(a));
    }
  };
  check(alpha);
  for (const auto& [y, a] : alpha_by_year) check(a);
  if (!(tol > 0)) throw Error(ErrorCategory::domain, "solver tol must be positive");
  if (max_iter < 1) throw Error(ErrorCategory::domain, "solver max_iter must be positive");
}

EconomyConfig EconomyConfig::from_config(const KeyValueConfig& cfg) {
  EconomyConfig c;
  c.alpha = cfg.get_double("alpha", c.alpha);
  c.tol = cfg.get_double("tol", c.tol);
  c.max_iter = static_cast<int>(cfg.get_int("max_iter", c.max_iter));
  for (const auto& [key, value] : cfg.values()) {
    if (key.rfind("alpha_", 0) == 0 && key.size() == 10) {
      c.alpha_by_year[static_cast<int>(csv::parse_int(key.substr(6), 0, key))] = cfg.get_double(key, c.alpha);
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// IO matrix

std::unordered_map<std::string, std::size_t> IOMatrix::index() const {
  std::unordered_map<std::string, std::size_t> idx;
  idx.reserve(firms.size());
  for (std::size_t i = 0; i < firms.size(); ++i) idx.emplace(firms[i], i);
  return idx;
}

IOMatrix build_io_matrix(const std::vector<Flow>& flows, const std::vector<std::string>& universe, int year) {
  IOMatrix io;
  io.year = year;
  io.firms = universe;
  const auto idx = io.index();
  if (idx.size() != universe.size()) throw Error(ErrorCategory::domain, "duplicate firm in IO universe");

  std::vector<Triplet> trips;
  std::vector<double> inputs(universe.size(), 0.0);
  for (const auto& f : flows) {
    if (f.weight < 0) throw Error(ErrorCategory::domain, "negative flow weight " + f.from + "->" + f.to);
    if (f.from == f.to || f.weight == 0) continue;
    auto i = idx.find(f.from);
    auto j = idx.find(f.to);
    if (i == idx.end() || j == idx.end()) continue;
    trips.push_back({static_cast<std::uint32_t>(i->second), static_cast<std::uint32_t>(j->second), f.weight});
  }
  // Sum duplicates first so the column totals see the merged weights.
  SparseMatrix weights = SparseMatrix::from_triplets(universe.size(), universe.size(), std::move(trips));
  const auto totals = weights.column_sums();
  auto shares = weights.triplets();
  for (auto& t : shares) t.value /= totals[t.col];
  io.omega = SparseMatrix::from_triplets(universe.size(), universe.size(), std::move(shares));
  return io;
}

IOMatrix truncate_network(const IOMatrix& io, const std::unordered_set<std::string>& conflict_firms,
                          bool renormalize) {
  std::vector<char> drop(io.size(), 0);
  for (std::size_t i = 0; i < io.size(); ++i) drop[i] = conflict_firms.count(io.firms[i]) ? 1 : 0;
  auto trips = io.omega.triplets();
  std::erase_if(trips, [&](const Triplet& t) { return drop[t.row] || drop[t.col]; });
  IOMatrix out;
  out.year = io.year;
  out.firms = io.firms;
  out.omega = SparseMatrix::from_triplets(io.size(), io.size(), std::move(trips));
  if (renormalize) {
    const auto sums = out.omega.column_sums();
    auto t2 = out.omega.triplets();
    for (auto& t : t2) t.value /= sums[t.col];
    out.omega = SparseMatrix::from_triplets(io.size(), io.size(), std::move(t2));
  }
  return out;
}

DemandVector backout_demand(const IOMatrix& io, const RevenueVector& revenue, const EconomyConfig& config) {
  config.validate();
  if (revenue.values.size() != io.size()) {
    throw Error(ErrorCategory::dimension, "revenue vector has " + std::to_string(revenue.values.size()) +
                                              " entries, IO matrix has " + std::to_string(io.size()) + " firms");
  }
  const double q = 1.0 - config.alpha_for(io.year);
  DemandVector xi;
  xi.year = revenue.year;
  xi.values.resize(io.size());
  io.omega.multiply(revenue.values, xi.values, q);
  for (std::size_t i = 0; i < io.size(); ++i) {
    xi.values[i] = revenue.values[i] - xi.values[i];
    if (xi.values[i] < 0) {
      ++xi.negative_count;
      xi.negative_mass += xi.values[i];
    }
  }
  return xi;
}

RevenueSolution solve_revenue(const IOMatrix& io, const DemandVector& demand, const EconomyConfig& config) {
  config.validate();
  const std::size_t n = io.size();
  if (demand.values.size() != n) throw Error(ErrorCategory::dimension, "demand vector does not match IO matrix");
  const double q = 1.0 - config.alpha_for(io.year);

  RevenueSolution sol;
  sol.revenue.year = demand.year;
  std::vector<double> r = demand.values, next(n);
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    io.omega.multiply(r, next, q);
    double step = 0, norm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] += demand.values[i];
      step += std::abs(next[i] - r[i]);
      norm += std::abs(next[i]);
    }
    r.swap(next);
    sol.step_norms.push_back(step);
    if (!std::isfinite(step)) break;
    if (step <= config.tol * std::max(1.0, norm)) {
      sol.iterations = iter;
      sol.revenue.values = std::move(r);
      return sol;
    }
  }
  const auto sums = io.omega.column_sums();
  const double max_col = sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
  throw ConvergenceError("revenue iteration did not converge in " + std::to_string(config.max_iter) +
                             " iterations; max column sum " + csv::format_double(max_col) +
                             " gives contraction bound " + csv::format_double(q * max_col) +
                             (q * max_col >= 1.0 ? " (>= 1: column-sum precondition violated)" : ""),
                         config.max_iter, sol.step_norms.empty() ? 0.0 : sol.step_norms.back());
}

RevenueVector solve_revenue_direct(const IOMatrix& io, const DemandVector& demand, const EconomyConfig& config) {
  config.validate();
  const std::size_t n = io.size();
  if (n > 2000) throw Error(ErrorCategory::domain, "direct solve limited to n <= 2000");
  if (demand.values.size() != n) throw Error(ErrorCategory::dimension, "demand vector does not match IO matrix");
  const double q = 1.0 - config.alpha_for(io.year);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& t : io.omega.triplets()) a(t.row, t.col) -= q * t.value;
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(demand.values.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd x = a.partialPivLu().solve(b);
  return {demand.year, std::vector<double>(x.data(), x.data() + x.size())};
}

// ---------------------------------------------------------------------------
// Serialization

void write_io_matrix(std::ostream& out, const IOMatrix& io) {
  csv::Writer w(out, {"row_firm", "col_firm", "omega"});
  for (const auto& t : io.omega.triplets()) {
    w.field(io.firms[t.row]).field(io.firms[t.col]).field(t.value);
    w.end_row();
  }
}

IOMatrix parse_io_matrix(std::istream& in, const std::vector<std::string>& universe, int year) {
  csv::Reader reader(in, {"row_firm", "col_firm", "omega"});
  std::vector<std::tuple<std::string, std::string, double>> rows;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != 3) throw ParseError(reader.line(), "expected 3 fields");
    const double v = csv::parse_double(fields[2], reader.line(), "omega");
    if (v < 0) throw ParseError(reader.line(), "negative omega");
    rows.emplace_back(fields[0], fields[1], v);
  }
  IOMatrix io;
  io.year = year;
  io.firms = universe;
  if (io.firms.empty()) {
    for (const auto& [r, c, v] : rows) {
      io.firms.push_back(r);
      io.firms.push_back(c);
    }
    std::sort(io.firms.begin(), io.firms.end());
    io.firms.erase(std::unique(io.firms.begin(), io.firms.end()), io.firms.end());
  }
  const auto idx = io.index();
  std::vector<Triplet> trips;
  for (const auto& [r, c, v] : rows) {
    auto i = idx.find(r);
    auto j = idx.find(c);
    if (i == idx.end() || j == idx.end()) {
      throw Error(ErrorCategory::referential, "IO matrix entry " + r + "->" + c + " outside firm universe");
    }
    trips.push_back({static_cast<std::uint32_t>(i->second), static_cast<std::uint32_t>(j->second), v});
  }
  io.omega = SparseMatrix::from_triplets(io.size(), io.size(), std::move(trips));
  return io;
}

void write_firm_vector(std::ostream& out, const std::vector<std::string>& firms, const std::vector<double>& values) {
  if (firms.size() != values.size()) throw Error(ErrorCategory::dimension, "firm vector size mismatch");
  csv::Writer w(out, {"firm_id", "value"});
  for (std::size_t i = 0; i < firms.size(); ++i) {
    w.field(firms[i]).field(values[i]);
    w.end_row();
  }
}

std::map<std::string, double> parse_firm_vector(std::istream& in) {
  csv::Reader reader(in, {"firm_id", "value"});
  std::map<std::string, double> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != 2) throw ParseError(reader.line(), "expected 2 fields");
    if (!out.emplace(fields[0], csv::parse_double(fields[1], reader.line(), "value")).second) {
      throw ParseError(reader.line(), "duplicate firm id '" + fields[0] + "'");
    }
  }
  return out;
}

}  // namespace netshock
