#include "netshock/econometrics.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "netshock/csv.hpp"
#include "netshock/error.hpp"
#include "netshock/graph.hpp"

namespace netshock {

namespace {

// Dense 0..G-1 relabelling in order of first appearance.
std::vector<std::uint32_t> densify(std::span<const std::uint32_t> ids, std::size_t& n_groups) {
  std::unordered_map<std::uint32_t, std::uint32_t> map;
  map.reserve(ids.size() / 4 + 16);
  std::vector<std::uint32_t> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = map.emplace(ids[i], static_cast<std::uint32_t>(map.size()));
    out[i] = it->second;
  }
  n_groups = map.size();
  return out;
}

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

}  // namespace

void PanelDataset::validate() const {
  const auto n = rows();
  if (static_cast<std::size_t>(x.rows()) != n) throw Error(ErrorCategory::dimension, "regressor rows != outcome rows");
  if (names.size() != static_cast<std::size_t>(x.cols())) {
    throw Error(ErrorCategory::dimension, "regressor names do not match columns");
  }
  for (const auto& f : fe) {
    if (f.size() != n) throw Error(ErrorCategory::dimension, "fixed-effect ids do not cover every row");
  }
  if (cluster.size() != n) throw Error(ErrorCategory::dimension, "cluster ids do not cover every row");
  if (!weights.empty()) {
    if (weights.size() != n) throw Error(ErrorCategory::dimension, "weights do not cover every row");
    for (double w : weights) {
      if (!(w > 0) || !std::isfinite(w)) throw Error(ErrorCategory::domain, "weights must be positive and finite");
    }
  }
  if (!y.allFinite() || !x.allFinite()) throw Error(ErrorCategory::domain, "missing or non-finite values in sample");
}

DemeanDiagnostics demean_columns(Eigen::MatrixXd& m, const std::vector<std::vector<std::uint32_t>>& fe,
                                 std::span<const double> weights, const FeOlsOptions& options) {
  DemeanDiagnostics diag;
  if (fe.empty()) {
    diag.converged = true;
    return diag;
  }
  const Eigen::Index n = m.rows();
  const bool weighted = !weights.empty();
  std::vector<std::vector<double>> group_weight(fe.size());
  for (std::size_t d = 0; d < fe.size(); ++d) {
    std::uint32_t g_max = 0;
    for (auto g : fe[d]) g_max = std::max(g_max, g);
    group_weight[d].assign(static_cast<std::size_t>(g_max) + 1, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) group_weight[d][fe[d][i]] += weighted ? weights[i] : 1.0;
  }

  std::vector<int> sweeps(m.cols(), 0);
  std::vector<double> final_mean(m.cols(), 0.0);
  std::vector<char> converged(m.cols(), 0);

#pragma omp parallel for schedule(dynamic, 1)
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    double* col = m.col(c).data();
    const double scale = std::max(1.0, m.col(c).cwiseAbs().maxCoeff());
    const double threshold = options.demean_tol * scale;
    std::vector<double> sums;
    auto sweep_dim = [&](std::size_t d, bool subtract) {
      const auto& ids = fe[d];
      sums.assign(group_weight[d].size(), 0.0);
      for (Eigen::Index i = 0; i < n; ++i) sums[ids[i]] += weighted ? weights[i] * col[i] : col[i];
      double worst = 0;
      for (std::size_t g = 0; g < sums.size(); ++g) {
        if (group_weight[d][g] > 0) {
          sums[g] /= group_weight[d][g];
          worst = std::max(worst, std::abs(sums[g]));
        }
      }
      if (subtract) {
        for (Eigen::Index i = 0; i < n; ++i) col[i] -= sums[ids[i]];
      }
      return worst;
    };
    for (int s = 1; s <= options.max_sweeps; ++s) {
      double worst = 0;
      for (std::size_t d = 0; d < fe.size(); ++d) worst = std::max(worst, sweep_dim(d, true));
      sweeps[c] = s;
      if (worst < threshold) {
        converged[c] = 1;
        break;
      }
    }
    double remaining = 0;
    for (std::size_t d = 0; d < fe.size(); ++d) remaining = std::max(remaining, sweep_dim(d, false) / scale);
    final_mean[c] = remaining;
  }

  diag.converged = std::all_of(converged.begin(), converged.end(), [](char v) { return v != 0; });
  diag.sweeps = sweeps.empty() ? 0 : *std::max_element(sweeps.begin(), sweeps.end());
  diag.max_group_mean = final_mean.empty() ? 0 : *std::max_element(final_mean.begin(), final_mean.end());
  return diag;
}

Eigen::MatrixXd cluster_robust_covariance(const Eigen::MatrixXd& xd, const Eigen::VectorXd& u,
                                          std::span<const std::uint32_t> cluster, std::size_t absorbed_dof,
                                          std::span<const double> weights) {
  const auto n = static_cast<std::size_t>(xd.rows());
  const auto k = static_cast<std::size_t>(xd.cols());
  if (static_cast<std::size_t>(u.size()) != n || cluster.size() != n) {
    throw Error(ErrorCategory::dimension, "cluster covariance inputs disagree on row count");
  }
  std::size_t g_count = 0;
  const auto dense = densify(cluster, g_count);
  if (g_count < 2) throw Error(ErrorCategory::domain, "cluster-robust covariance needs at least two clusters");
  const std::size_t k_total = k + absorbed_dof;
  if (n <= k_total) throw Error(ErrorCategory::domain, "no residual degrees of freedom (N <= K)");

  const bool weighted = !weights.empty();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(g_count, k);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? weights[i] : 1.0;
    scores.row(dense[i]) += (w * u(i)) * xd.row(i);
  }
  if (weighted) {
    Eigen::Map<const Eigen::VectorXd> wv(weights.data(), static_cast<Eigen::Index>(n));
    xtx = xd.transpose() * wv.asDiagonal() * xd;
  } else {
    xtx = xd.transpose() * xd;
  }
  const Eigen::MatrixXd bread = xtx.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  const double g = static_cast<double>(g_count);
  const double factor = g / (g - 1.0) * (static_cast<double>(n) - 1.0) / static_cast<double>(n - k_total);
  Eigen::MatrixXd v = factor * bread * meat * bread;
  return 0.5 * (v + v.transpose());
}

double RegressionResult::p_value(std::size_t k) const {
  if (!(se(k) > 0) || n_clusters < 2) return std::numeric_limits<double>::quiet_NaN();
  boost::math::students_t dist(static_cast<double>(n_clusters - 1));
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t_stat(k))));
}

std::size_t RegressionResult::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorCategory::domain, "no coefficient named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

RegressionResult twoway_fe_ols(const PanelDataset& data, const FeOlsOptions& options) {
  data.validate();
  const std::size_t n_all = data.rows();
  const std::size_t n_dims = data.fe.size();

  // Iteratively drop rows that are alone in some FE group.
  std::vector<char> keep(n_all, 1);
  std::size_t dropped = 0;
  if (options.drop_singletons && n_dims > 0) {
    std::vector<std::vector<std::uint32_t>> dense(n_dims);
    std::vector<std::size_t> groups(n_dims);
    for (std::size_t d = 0; d < n_dims; ++d) dense[d] = densify(data.fe[d], groups[d]);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t d = 0; d < n_dims; ++d) {
        std::vector<std::uint32_t> count(groups[d], 0);
        for (std::size_t i = 0; i < n_all; ++i) {
          if (keep[i]) ++count[dense[d][i]];
        }
        for (std::size_t i = 0; i < n_all; ++i) {
          if (keep[i] && count[dense[d][i]] == 1) {
            keep[i] = 0;
            ++dropped;
            changed = true;
          }
        }
      }
    }
  }

  std::vector<std::size_t> rows;
  rows.reserve(n_all - dropped);
  for (std::size_t i = 0; i < n_all; ++i) {
    if (keep[i]) rows.push_back(i);
  }
  const std::size_t n = rows.size();
  const auto k = static_cast<std::size_t>(data.x.cols());
  if (n == 0) throw Error(ErrorCategory::domain, "empty estimation sample");

  std::vector<std::vector<std::uint32_t>> fe(n_dims);
  std::size_t absorbed = 0;
  for (std::size_t d = 0; d < n_dims; ++d) {
    std::vector<std::uint32_t> sub(n);
    for (std::size_t r = 0; r < n; ++r) sub[r] = data.fe[d][rows[r]];
    std::size_t g = 0;
    fe[d] = densify(sub, g);
    if (g < 2) {
      throw Error(ErrorCategory::domain, "fixed-effect dimension " + std::to_string(d) + " has fewer than two groups");
    }
    absorbed += g - 1;
  }
  std::vector<std::uint32_t> cluster(n);
  std::vector<double> weights;
  for (std::size_t r = 0; r < n; ++r) cluster[r] = data.cluster[rows[r]];
  if (!data.weights.empty()) {
    weights.resize(n);
    for (std::size_t r = 0; r < n; ++r) weights[r] = data.weights[rows[r]];
  }

  Eigen::MatrixXd m(n, k + 1);
  for (std::size_t r = 0; r < n; ++r) {
    m(r, 0) = data.y(rows[r]);
    for (std::size_t c = 0; c < k; ++c) m(r, c + 1) = data.x(rows[r], c);
  }
  const Eigen::MatrixXd raw = m;
  RegressionResult res;
  res.demean = demean_columns(m, fe, weights, options);
  if (!res.demean.converged) {
    throw ConvergenceError("fixed-effect demeaning did not converge in " + std::to_string(options.max_sweeps) +
                               " sweeps (max group mean " + csv::format_double(res.demean.max_group_mean) + ")",
                           res.demean.sweeps, res.demean.max_group_mean);
  }

  const Eigen::VectorXd yd = m.col(0);
  Eigen::MatrixXd xd = m.rightCols(k);
  Eigen::VectorXd sqrt_w = Eigen::VectorXd::Ones(n);
  if (!weights.empty()) {
    for (std::size_t r = 0; r < n; ++r) sqrt_w(r) = std::sqrt(weights[r]);
  }

  // Collinearity: columns absorbed by the fixed effects, then rank of the rest.
  std::vector<std::string> bad;
  Eigen::VectorXd col_scale(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double before = raw.col(c + 1).norm();
    const double after = xd.col(c).norm();
    col_scale(c) = after > 0 ? 1.0 / after : 1.0;
    if (!(after > 1e-10 * std::max(before, 1e-300))) bad.push_back(data.names[c]);
  }
  if (!bad.empty()) {
    throw Error(ErrorCategory::singular, "regressors collinear with fixed effects: " + join(bad));
  }
  const Eigen::MatrixXd xs = sqrt_w.asDiagonal() * xd * col_scale.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  qr.setThreshold(1e-10);
  if (static_cast<std::size_t>(qr.rank()) < k) {
    const auto perm = qr.colsPermutation().indices();
    for (std::size_t p = static_cast<std::size_t>(qr.rank()); p < k; ++p) bad.push_back(data.names[perm(p)]);
    throw Error(ErrorCategory::singular, "collinear regressors: " + join(bad));
  }
  const Eigen::VectorXd beta_scaled = qr.solve(sqrt_w.asDiagonal() * yd);
  res.coef = col_scale.asDiagonal() * beta_scaled;
  const Eigen::VectorXd u = yd - xd * res.coef;

  auto wsum = [&](const Eigen::VectorXd& v) {
    double s = 0;
    for (std::size_t r = 0; r < n; ++r) s += (weights.empty() ? 1.0 : weights[r]) * v(r) * v(r);
    return s;
  };
  const double ssr = wsum(u);
  const double tss_within = wsum(yd);
  double ybar = 0, wtot = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double w = weights.empty() ? 1.0 : weights[r];
    ybar += w * raw(r, 0);
    wtot += w;
  }
  ybar /= wtot;
  const double tss = wsum((raw.col(0).array() - ybar).matrix());
  res.r2 = tss > 0 ? 1.0 - ssr / tss : 0.0;
  res.r2_within = tss_within > 0 ? 1.0 - ssr / tss_within : 0.0;

  res.names = data.names;
  res.n = n;
  res.dropped_singletons = dropped;
  res.absorbed_dof = absorbed;
  std::size_t g = 0;
  densify(cluster, g);
  res.n_clusters = g;
  res.cov = cluster_robust_covariance(xd, u, cluster, absorbed, weights);
  res.se = res.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return res;
}

std::string significance_stars(double p) {
  if (!(p == p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

void write_results(std::ostream& out, const RegressionResult& result) {
  csv::Writer w(out, {"term", "estimate", "se", "stars"});
  for (std::size_t k = 0; k < result.names.size(); ++k) {
    w.field(result.names[k]).field(result.coef(k)).field(result.se(k)).field(significance_stars(result.p_value(k)));
    w.end_row();
  }
}

double ihs(double x) { return std::asinh(x); }

double log1p_checked(double x) {
  if (x < 0) throw Error(ErrorCategory::domain, "log(1 + x) requires x >= 0, got " + csv::format_double(x));
  return std::log1p(x);
}

double underestimation_share(double beta_naive, double beta1_full, double beta2_full, double share1,
                             double share2) {
  for (double s : {share1, share2}) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCategory::domain, "link shares must lie in [0, 1]");
  }
  const double full = beta1_full * share1 + beta2_full * share2;
  if (full == 0.0) throw Error(ErrorCategory::domain, "full two-degree impact is zero");
  return 1.0 - (beta_naive * share1) / full;
}

// ---------------------------------------------------------------------------
// Propagation

TradeOutcome parse_trade_outcome(std::string_view text) {
  if (text == "any" || text == "any_shipment") return TradeOutcome::any_shipment;
  if (text == "log_shipments" || text == "log_count") return TradeOutcome::log_shipments;
  if (text == "log_weight") return TradeOutcome::log_weight;
  throw Error(ErrorCategory::usage, "unknown trade outcome '" + std::string(text) + "'");
}

namespace {

struct PanelGeography {
  std::vector<std::uint32_t> province;  // per establishment, dense
  std::size_t n_provinces = 0;
};

PanelGeography panel_geography(const TradePanel& panel, const FirmTable& firms) {
  std::vector<std::string> names(panel.establishments.size());
  for (std::size_t e = 0; e < names.size(); ++e) {
    const auto& est = panel.establishments[e];
    names[e] = firms.province_of_rayon(est.rayon_id, firms.at(est.firm_id).province_id);
  }
  std::vector<std::string> sorted = names;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  PanelGeography geo;
  geo.n_provinces = sorted.size();
  geo.province.resize(names.size());
  for (std::size_t e = 0; e < names.size(); ++e) {
    geo.province[e] =
        static_cast<std::uint32_t>(std::lower_bound(sorted.begin(), sorted.end(), names[e]) - sorted.begin());
  }
  return geo;
}

double trade_outcome(const PanelCell& c, TradeOutcome outcome) {
  switch (outcome) {
    case TradeOutcome::any_shipment: return c.any_shipment() ? 1.0 : 0.0;
    case TradeOutcome::log_shipments: return std::log1p(static_cast<double>(c.n_shipments));
    case TradeOutcome::log_weight: return std::log1p(static_cast<double>(c.total_weight_kg));
  }
  return 0;
}

}  // namespace

PanelDataset propagation_dataset(const TradePanel& panel, const FirmTable& firms, const PropagationSpec& spec) {
  if (!panel.flags_assigned) throw Error(ErrorCategory::domain, "treatment flags have not been assigned");
  const auto geo = panel_geography(panel, firms);

  std::vector<std::size_t> pairs;
  for (std::size_t p = 0; p < panel.pairs.size(); ++p) {
    if (spec.include_both_conflict || !panel.pairs[p].both_conflict) pairs.push_back(p);
  }
  const std::size_t t_count = static_cast<std::size_t>(panel.n_months);
  const std::size_t n = pairs.size() * t_count;

  using Getter = std::function<double(const PairDirection&)>;
  std::vector<std::pair<std::string, Getter>> treat;
  switch (spec.variant) {
    case PropagationVariant::first_degree:
      treat.emplace_back("Conflict x Post", [](const PairDirection& p) { return double(p.conflict); });
      break;
    case PropagationVariant::both_degrees:
      treat.emplace_back("Conflict x Post", [](const PairDirection& p) { return double(p.conflict); });
      treat.emplace_back("PartnerConflict x Post", [](const PairDirection& p) { return double(p.partner_conflict); });
      break;
    case PropagationVariant::buyer_supplier:
      treat.emplace_back("BuyerConflict x Post", [](const PairDirection& p) { return double(p.buyer_conflict); });
      treat.emplace_back("SupplierConflict x Post",
                         [](const PairDirection& p) { return double(p.supplier_conflict); });
      treat.emplace_back("PartnerBuyerConflict x Post",
                         [](const PairDirection& p) { return double(p.partner_buyer_conflict); });
      treat.emplace_back("PartnerSupplierConflict x Post",
                         [](const PairDirection& p) { return double(p.partner_supplier_conflict); });
      break;
  }
  if (spec.partner_count_controls) {
    treat.emplace_back("SupplierPartners x Post",
                       [](const PairDirection& p) { return double(p.origin_partners_pre); });
    treat.emplace_back("BuyerPartners x Post",
                       [](const PairDirection& p) { return double(p.destination_partners_pre); });
  }
  if (spec.rayon_distance) {
    const auto& dist = *spec.rayon_distance;
    double max_d = 0;
    for (const auto& [r, d] : dist) max_d = std::max(max_d, std::abs(d));
    if (max_d == 0) max_d = 1;
    auto lookup = [&dist, max_d, &panel](std::uint32_t est) {
      const auto& rayon = panel.establishments[est].rayon_id;
      auto it = dist.find(rayon);
      if (it == dist.end()) throw Error(ErrorCategory::referential, "no distance for rayon '" + rayon + "'");
      return it->second / max_d;
    };
    for (int power = 1; power <= 5; ++power) {
      treat.emplace_back("SenderDistance^" + std::to_string(power) + " x Post",
                         [lookup, power](const PairDirection& p) { return std::pow(lookup(p.origin), power); });
    }
    for (int power = 1; power <= 5; ++power) {
      treat.emplace_back("ReceiverDistance^" + std::to_string(power) + " x Post",
                         [lookup, power](const PairDirection& p) { return std::pow(lookup(p.destination), power); });
    }
  }

  PanelDataset ds;
  ds.y.resize(n);
  ds.x.resize(n, static_cast<Eigen::Index>(treat.size()));
  for (const auto& [name, g] : treat) ds.names.push_back(name);
  ds.fe.assign(spec.post_province_effects ? 4 : 2, std::vector<std::uint32_t>(n));
  ds.cluster.resize(n);

  std::vector<double> pair_values(treat.size());
  std::size_t row = 0;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto& pd = panel.pairs[pairs[pi]];
    for (std::size_t c = 0; c < treat.size(); ++c) pair_values[c] = treat[c].second(pd);
    const auto po = geo.province[pd.origin];
    const auto pdst = geo.province[pd.destination];
    for (std::size_t t = 0; t < t_count; ++t, ++row) {
      const bool post = panel.is_post(static_cast<int>(t));
      ds.y(row) = trade_outcome(panel.cell(pairs[pi], static_cast<int>(t)), spec.outcome);
      for (std::size_t c = 0; c < treat.size(); ++c) ds.x(row, c) = post ? pair_values[c] : 0.0;
      ds.fe[0][row] = static_cast<std::uint32_t>(pi);
      ds.fe[1][row] = static_cast<std::uint32_t>(t);
      if (spec.post_province_effects) {
        ds.fe[2][row] = po * 2 + (post ? 1 : 0);
        ds.fe[3][row] = pdst * 2 + (post ? 1 : 0);
      }
      ds.cluster[row] = static_cast<std::uint32_t>(po * geo.n_provinces + pdst);
    }
  }
  return ds;
}

RegressionResult did_propagation(const TradePanel& panel, const FirmTable& firms, const PropagationSpec& spec,
                                 const FeOlsOptions& options) {
  return twoway_fe_ols(propagation_dataset(panel, firms, spec), options);
}

// ---------------------------------------------------------------------------
// Event studies

EventStudyResult event_study(const EventStudyInput& in, const FeOlsOptions& options) {
  const std::size_t n = in.base.rows();
  const auto m = static_cast<std::size_t>(in.treatment.cols());
  if (static_cast<std::size_t>(in.treatment.rows()) != n || in.period.size() != n) {
    throw Error(ErrorCategory::dimension, "event-study treatment or periods do not cover every row");
  }
  if (in.treatment_names.size() != m) throw Error(ErrorCategory::dimension, "treatment names mismatch");
  std::set<int> period_set(in.period.begin(), in.period.end());
  if (!period_set.count(in.baseline_period)) {
    throw Error(ErrorCategory::domain, "baseline period " + std::to_string(in.baseline_period) + " not in data");
  }
  std::vector<int> periods(period_set.begin(), period_set.end());
  std::vector<int> estimated;
  for (int p : periods) {
    if (p != in.baseline_period) estimated.push_back(p);
  }

  PanelDataset ds = in.base;
  const auto extra = static_cast<std::size_t>(in.base.x.cols());
  ds.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m * estimated.size() + extra));
  ds.x.setZero();
  ds.names.clear();
  std::unordered_map<int, std::size_t> slot;
  for (std::size_t e = 0; e < estimated.size(); ++e) slot[estimated[e]] = e;
  for (std::size_t k = 0; k < m; ++k) {
    for (int p : estimated) ds.names.push_back(in.treatment_names[k] + "@" + std::to_string(p));
  }
  for (std::size_t r = 0; r < n; ++r) {
    auto it = slot.find(in.period[r]);
    if (it == slot.end()) continue;
    for (std::size_t k = 0; k < m; ++k) ds.x(r, k * estimated.size() + it->second) = in.treatment(r, k);
  }
  for (std::size_t c = 0; c < extra; ++c) {
    ds.x.col(m * estimated.size() + c) = in.base.x.col(c);
    ds.names.push_back(in.base.names[c]);
  }

  EventStudyResult res;
  res.treatment_names = in.treatment_names;
  res.periods = periods;
  res.regression = twoway_fe_ols(ds, options);
  res.coef = Eigen::MatrixXd::Zero(periods.size(), m);
  res.se = Eigen::MatrixXd::Zero(periods.size(), m);
  for (std::size_t pi = 0; pi < periods.size(); ++pi) {
    auto it = slot.find(periods[pi]);
    if (it == slot.end()) continue;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t col = k * estimated.size() + it->second;
      res.coef(pi, k) = res.regression.coef(col);
      res.se(pi, k) = res.regression.se(col);
    }
  }
  return res;
}

EventStudyResult propagation_event_study(const TradePanel& panel, const FirmTable& firms, const PropagationSpec& spec,
                                         YearMonth baseline, const FeOlsOptions& options) {
  PropagationSpec base_spec = spec;
  base_spec.variant = PropagationVariant::first_degree;
  base_spec.partner_count_controls = false;
  base_spec.rayon_distance.reset();
  PanelDataset ds = propagation_dataset(panel, firms, base_spec);

  std::vector<std::size_t> pairs;
  for (std::size_t p = 0; p < panel.pairs.size(); ++p) {
    if (spec.include_both_conflict || !panel.pairs[p].both_conflict) pairs.push_back(p);
  }
  EventStudyInput in;
  const std::size_t n = ds.rows();
  in.treatment_names = {"Conflict", "PartnerConflict"};
  in.treatment.resize(static_cast<Eigen::Index>(n), 2);
  in.period.resize(n);
  std::size_t row = 0;
  for (auto p : pairs) {
    for (int t = 0; t < panel.n_months; ++t, ++row) {
      const auto ym = panel.month_at(t);
      in.period[row] = ym.year * 10 + ym.quarter();
      in.treatment(row, 0) = panel.pairs[p].conflict ? 1.0 : 0.0;
      in.treatment(row, 1) = panel.pairs[p].partner_conflict ? 1.0 : 0.0;
    }
  }
  in.baseline_period = baseline.year * 10 + baseline.quarter();
  ds.x.resize(static_cast<Eigen::Index>(n), 0);
  ds.names.clear();
  in.base = std::move(ds);
  return event_study(in, options);
}

// ---------------------------------------------------------------------------
// Centrality

FirmOutcome parse_firm_outcome(std::string_view text) {
  if (text == "log_sales") return FirmOutcome::log_sales;
  if (text == "ihs_profits") return FirmOutcome::ihs_profits;
  if (text == "ihs_profits_minus_ihs_costs") return FirmOutcome::ihs_profits_minus_ihs_costs;
  throw Error(ErrorCategory::usage, "unknown firm outcome '" + std::string(text) + "'");
}

CentralityEstimate did_centrality(const std::vector<AccountingRecord>& accounting,
                                  const std::vector<std::string>& firm_ids, std::span<const double> delta,
                                  const CentralitySpec& spec, const FeOlsOptions& options) {
  if (firm_ids.size() != delta.size()) throw Error(ErrorCategory::dimension, "centrality ids and values differ");
  std::unordered_map<std::string, std::uint32_t> firm_index;
  for (std::size_t i = 0; i < firm_ids.size(); ++i) firm_index.emplace(firm_ids[i], static_cast<std::uint32_t>(i));

  std::vector<const AccountingRecord*> sample;
  for (const auto& r : accounting) {
    if (firm_index.count(r.firm_id)) sample.push_back(&r);
  }
  std::sort(sample.begin(), sample.end(), [](const AccountingRecord* a, const AccountingRecord* b) {
    return a->firm_id != b->firm_id ? a->firm_id < b->firm_id : a->year < b->year;
  });
  if (sample.empty()) throw Error(ErrorCategory::domain, "no accounting rows for firms with a centrality change");

  // Standardize over the firms that enter the estimation sample.
  std::vector<std::uint32_t> in_sample;
  for (const auto* r : sample) in_sample.push_back(firm_index.at(r->firm_id));
  std::sort(in_sample.begin(), in_sample.end());
  in_sample.erase(std::unique(in_sample.begin(), in_sample.end()), in_sample.end());
  std::vector<double> raw;
  for (auto i : in_sample) raw.push_back(delta[i]);
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  if (raw.size() < 2 || *lo == *hi) {
    throw Error(ErrorCategory::singular,
                "centrality change has no cross-sectional variation; collinear with year fixed effects");
  }
  const auto z = standardize(raw);
  std::unordered_map<std::uint32_t, double> zmap;
  for (std::size_t k = 0; k < in_sample.size(); ++k) zmap[in_sample[k]] = z[k];

  std::set<int> year_set;
  for (const auto* r : sample) year_set.insert(r->year);
  std::vector<int> years(year_set.begin(), year_set.end());
  std::vector<int> estimated;
  if (spec.variant != CentralityVariant::pre_post) {
    if (!year_set.count(spec.baseline_year)) throw Error(ErrorCategory::domain, "baseline year missing from data");
    for (int y : years) {
      if (y != spec.baseline_year) estimated.push_back(y);
    }
  }

  const std::size_t n = sample.size();
  PanelDataset ds;
  ds.y.resize(static_cast<Eigen::Index>(n));
  std::size_t k = 0;
  if (spec.variant == CentralityVariant::pre_post) {
    ds.names = {"DeltaCentrality x Post"};
  } else {
    for (int y : estimated) ds.names.push_back("DeltaCentrality x " + std::to_string(y));
    if (spec.variant == CentralityVariant::joint) {
      for (int y : estimated) ds.names.push_back("Conflict2013 x " + std::to_string(y));
    }
  }
  k = ds.names.size();
  ds.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  ds.fe.assign(2, std::vector<std::uint32_t>(n));
  ds.cluster.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = *sample[r];
    switch (spec.outcome) {
      case FirmOutcome::log_sales: ds.y(r) = log1p_checked(rec.sales); break;
      case FirmOutcome::ihs_profits: ds.y(r) = ihs(rec.profits); break;
      case FirmOutcome::ihs_profits_minus_ihs_costs: ds.y(r) = ihs(rec.profits) - ihs(rec.total_costs); break;
    }
    const auto fi = firm_index.at(rec.firm_id);
    const double dz = zmap.at(fi);
    if (spec.variant == CentralityVariant::pre_post) {
      ds.x(r, 0) = rec.year >= spec.post_year ? dz : 0.0;
    } else {
      auto it = std::find(estimated.begin(), estimated.end(), rec.year);
      if (it != estimated.end()) {
        const auto e = static_cast<std::size_t>(it - estimated.begin());
        ds.x(r, e) = dz;
        if (spec.variant == CentralityVariant::joint) {
          auto ct = spec.conflict_trade.find(rec.firm_id);
          ds.x(r, estimated.size() + e) = (ct != spec.conflict_trade.end() && ct->second) ? 1.0 : 0.0;
        }
      }
    }
    ds.fe[0][r] = fi;
    ds.fe[1][r] = static_cast<std::uint32_t>(rec.year);
    ds.cluster[r] = fi;
  }

  CentralityEstimate est;
  est.regression = twoway_fe_ols(ds, options);
  if (spec.variant != CentralityVariant::pre_post) {
    est.years = years;
    for (int y : years) {
      auto it = std::find(estimated.begin(), estimated.end(), y);
      if (it == estimated.end()) {
        est.year_coef.push_back(0.0);
        est.year_se.push_back(0.0);
      } else {
        const auto e = static_cast<Eigen::Index>(it - estimated.begin());
        est.year_coef.push_back(est.regression.coef(e));
        est.year_se.push_back(est.regression.se(e));
      }
    }
  }
  return est;
}

std::vector<double> residualize(std::span<const double> delta, const Eigen::MatrixXd& characteristics) {
  const auto n = static_cast<Eigen::Index>(delta.size());
  if (characteristics.rows() != n) throw Error(ErrorCategory::dimension, "characteristics rows != firms");
  Eigen::MatrixXd x(n, characteristics.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(characteristics.cols()) = characteristics;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) throw Error(ErrorCategory::singular, "baseline characteristics are rank deficient");
  Eigen::Map<const Eigen::VectorXd> d(delta.data(), n);
  const Eigen::VectorXd resid = d - x * qr.solve(d);
  return standardize(std::span<const double>(resid.data(), static_cast<std::size_t>(n)));
}

BaselineCharacteristics baseline_characteristics(const std::vector<TransactionRecord>& records,
                                                 const FirmTable& firms,
                                                 const std::vector<AccountingRecord>& accounting, int year,
                                                 const std::vector<std::string>& firm_ids) {
  struct Tally {
    double shipments = 0, conflict_shipments = 0;
    double sent_weight = 0, sent_conflict_weight = 0;
    double conflict_weight = 0;  // shipped to or received from conflict areas
    std::set<std::string> partners;
  };
  std::unordered_map<std::string, Tally> tally;
  for (const auto& r : records) {
    if (r.date.year != year) continue;
    const bool to_conflict = firms.is_conflict_rayon(r.receiver_rayon_id);
    const bool from_conflict = firms.is_conflict_rayon(r.sender_rayon_id);
    const auto w = static_cast<double>(r.weight_kg);
    auto& s = tally[r.sender_firm_id];
    s.shipments += 1;
    s.sent_weight += w;
    s.partners.insert(r.receiver_firm_id);
    if (to_conflict) {
      s.conflict_shipments += 1;
      s.sent_conflict_weight += w;
      s.conflict_weight += w;
    }
    auto& d = tally[r.receiver_firm_id];
    d.shipments += 1;
    d.partners.insert(r.sender_firm_id);
    if (from_conflict) {
      d.conflict_shipments += 1;
      d.conflict_weight += w;
    }
  }
  std::unordered_map<std::string, const AccountingRecord*> acc;
  for (const auto& a : accounting) {
    if (a.year == year) acc[a.firm_id] = &a;
  }

  BaselineCharacteristics out;
  out.names = {"conflict_trade", "conflict_transaction_share", "conflict_sales_share",
               "partners_conflict_weight", "log_sales", "ihs_profits"};
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(firm_ids.size()), 6);
  for (std::size_t i = 0; i < firm_ids.size(); ++i) {
    const auto& id = firm_ids[i];
    auto a = acc.find(id);
    if (a == acc.end()) {
      throw Error(ErrorCategory::referential, "no " + std::to_string(year) + " accounting record for firm '" + id + "'");
    }
    auto t = tally.find(id);
    if (t != tally.end()) {
      const auto& s = t->second;
      out.values(i, 0) = s.conflict_shipments > 0 ? 1.0 : 0.0;
      out.values(i, 1) = s.shipments > 0 ? s.conflict_shipments / s.shipments : 0.0;
      out.values(i, 2) = s.sent_weight > 0 ? s.sent_conflict_weight / s.sent_weight : 0.0;
      double partner_weight = 0;
      for (const auto& p : s.partners) {
        if (firms.is_conflict_firm(p)) continue;
        auto pt = tally.find(p);
        if (pt != tally.end()) partner_weight += pt->second.conflict_weight;
      }
      out.values(i, 3) = std::log1p(partner_weight);
    }
    out.values(i, 4) = log1p_checked(a->second->sales);
    out.values(i, 5) = ihs(a->second->profits);
  }
  return out;
}

AlphaEstimate estimate_alpha(const std::vector<LaborCostRecord>& records, int first_year, int last_year) {
  AlphaEstimate est;
  std::vector<const LaborCostRecord*> used;
  for (const auto& r : records) {
    if (r.year < first_year || r.year > last_year) continue;
    if (!(r.revenue > 0) || !(r.labor_cost > 0)) {
      ++est.n_excluded;
      continue;
    }
    used.push_back(&r);
  }
  est.n_used = used.size();
  if (used.empty()) throw Error(ErrorCategory::domain, "no firm-years with positive revenue and labor cost");
  double mean_log_ratio = 0;
  for (const auto* r : used) mean_log_ratio += std::log(r->labor_cost) - std::log(r->revenue);
  mean_log_ratio /= static_cast<double>(used.size());
  est.alpha = std::exp(mean_log_ratio);

  // Elasticity diagnostic; undefined when revenue never varies within a firm.
  est.elasticity = std::numeric_limits<double>::quiet_NaN();
  try {
    std::map<std::string, std::uint32_t> firm_ids;
    for (const auto* r : used) firm_ids.emplace(r->firm_id, 0);
    std::uint32_t next = 0;
    for (auto& [id, v] : firm_ids) v = next++;
    PanelDataset ds;
    const auto n = static_cast<Eigen::Index>(used.size());
    ds.y.resize(n);
    ds.x.resize(n, 1);
    ds.names = {"log_revenue"};
    ds.fe.assign(1, std::vector<std::uint32_t>(used.size()));
    ds.cluster.resize(used.size());
    for (std::size_t i = 0; i < used.size(); ++i) {
      ds.y(i) = std::log(used[i]->labor_cost);
      ds.x(i, 0) = std::log(used[i]->revenue);
      ds.fe[0][i] = ds.cluster[i] = firm_ids.at(used[i]->firm_id);
    }
    est.elasticity = twoway_fe_ols(ds).coef(0);
  } catch (const Error&) {
  }
  return est;
}

std::vector<LaborCostRecord> parse_labor_costs(std::istream& in) {
  csv::Reader reader(in, {"firm_id", "year", "revenue", "labor_cost"});
  std::vector<LaborCostRecord> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != 4) throw ParseError(reader.line(), "expected 4 fields");
    out.push_back({f[0], static_cast<int>(csv::parse_int(f[1], reader.line(), "year")),
                   csv::parse_double(f[2], reader.line(), "revenue"),
                   csv::parse_double(f[3], reader.line(), "labor_cost")});
  }
  return out;
}

void write_labor_costs(std::ostream& out, const std::vector<LaborCostRecord>& records) {
  csv::Writer w(out, {"firm_id", "year", "revenue", "labor_cost"});
  for (const auto& r : records) {
    w.field(r.firm_id).field(r.year).field(r.revenue).field(r.labor_cost);
    w.end_row();
  }
}

}  // namespace netshock
