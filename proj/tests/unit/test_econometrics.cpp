#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "netshock/econometrics.hpp"
#include "netshock/error.hpp"
#include "oracles.hpp"

using namespace netshock;

namespace {

PanelDataset did_2x2() {
  PanelDataset d;
  d.y.resize(4);
  d.y << 1, 1, 1, 2;  // control (pre, post), treated (pre, post)
  d.x.resize(4, 1);
  d.x << 0, 0, 0, 1;
  d.names = {"Treated x Post"};
  d.fe = {{0, 0, 1, 1}, {0, 1, 0, 1}};
  d.cluster = {0, 0, 1, 1};
  return d;
}

double max_rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return ((a - b).cwiseAbs().array() / b.cwiseAbs().array().max(1e-300)).maxCoeff();
}

// The sandwich written out observation by observation.
Eigen::MatrixXd hand_sandwich(const Eigen::MatrixXd& x, const Eigen::VectorXd& u, const std::vector<std::uint32_t>& g,
                              std::size_t absorbed) {
  const auto n = x.rows();
  const auto k = x.cols();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index r = 0; r < n; ++r) xtx += x.row(r).transpose() * x.row(r);
  std::map<std::uint32_t, Eigen::VectorXd> score;
  for (Eigen::Index r = 0; r < n; ++r) {
    auto [it, fresh] = score.emplace(g[r], Eigen::VectorXd::Zero(k));
    it->second += x.row(r).transpose() * u(r);
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [id, s] : score) meat += s * s.transpose();
  const Eigen::MatrixXd bread = xtx.inverse();
  const double G = static_cast<double>(score.size());
  const double N = static_cast<double>(n);
  const double K = static_cast<double>(k + absorbed);
  return (G / (G - 1)) * ((N - 1) / (N - K)) * bread * meat * bread;
}

TransactionRecord tx(const std::string& date, const std::string& s, const std::string& r, const std::string& rs,
                     const std::string& rr, std::int64_t w) {
  return {parse_date(date), s, r, rs, rr, w};
}

}  // namespace

TEST_SUITE("econometrics") {
  TEST_CASE("2x2 difference in differences is exactly one") {
    const auto res = twoway_fe_ols(did_2x2());
    CHECK(res.coef(0) == 1.0);
    CHECK(res.se(0) == 0.0);
    CHECK(res.n == 4);
    CHECK(res.absorbed_dof == 2);
  }

  TEST_CASE("constant shift of the outcome leaves beta unchanged") {
    std::mt19937_64 rng(4);
    auto d = oracle::random_panel(20, 6, 2, 0.1, rng);
    const auto a = twoway_fe_ols(d);
    d.y.array() += 17.5;
    const auto b = twoway_fe_ols(d);
    CHECK(std::abs(a.coef(0) - b.coef(0)) < 1e-10);
    CHECK(std::abs(a.se(1) - b.se(1)) < 1e-10);
  }

  TEST_CASE("TWFE equals dense dummy regression") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 15; ++trial) {
      auto d = oracle::random_panel(10 + trial, 4 + trial % 5, 1 + trial % 3, 0.2, rng);
      FeOlsOptions opt;
      opt.drop_singletons = false;
      opt.demean_tol = 1e-13;
      const auto res = twoway_fe_ols(d, opt);
      CHECK(max_rel_diff(res.coef, oracle::dummy_ols(d)) < 1e-8);
    }
  }

  TEST_CASE("weighted TWFE equals weighted dummy regression") {
    std::mt19937_64 rng(10);
    auto d = oracle::random_panel(15, 6, 2, 0.1, rng);
    std::uniform_real_distribution<double> u(0.5, 3);
    for (std::size_t r = 0; r < d.rows(); ++r) d.weights.push_back(u(rng));
    FeOlsOptions opt;
    opt.drop_singletons = false;
    opt.demean_tol = 1e-13;
    CHECK(max_rel_diff(twoway_fe_ols(d, opt).coef, oracle::dummy_ols(d)) < 1e-8);
  }

  TEST_CASE("singletons are dropped and counted") {
    std::mt19937_64 rng(12);
    auto d = oracle::random_panel(8, 5, 1, 0.0, rng);
    // Unit 99 appears once.
    d.y.conservativeResize(d.y.size() + 1);
    d.y(d.y.size() - 1) = 3.0;
    d.x.conservativeResize(d.x.rows() + 1, Eigen::NoChange);
    d.x(d.x.rows() - 1, 0) = 1.0;
    d.fe[0].push_back(99);
    d.fe[1].push_back(1000);
    d.cluster.push_back(0);
    const auto res = twoway_fe_ols(d);
    CHECK(res.dropped_singletons == 1);
    CHECK(res.n == d.rows() - 1);
  }

  TEST_CASE("cluster sandwich matches the hand formula on three clusters") {
    Eigen::MatrixXd x(7, 2);
    x << 1.0, 0.5, -0.3, 2.0, 0.7, -1.1, 1.9, 0.0, -0.8, 0.4, 0.2, 1.3, -1.5, -0.6;
    Eigen::VectorXd u(7);
    u << 0.3, -0.2, 0.5, -0.7, 0.1, 0.05, -0.4;
    const std::vector<std::uint32_t> g = {0, 0, 1, 1, 1, 2, 2};
    const auto got = cluster_robust_covariance(x, u, g, 1);
    const auto want = hand_sandwich(x, u, g, 1);
    CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-15 * want.cwiseAbs().maxCoeff());

    const std::vector<std::uint32_t> relabel = {7, 7, 3, 3, 3, 5, 5};
    CHECK((cluster_robust_covariance(x, u, relabel, 1) - got).cwiseAbs().maxCoeff() == 0.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(got);
    CHECK(es.eigenvalues().minCoeff() >= -1e-15);

    CHECK(cluster_robust_covariance(x, Eigen::VectorXd::Zero(7), g, 1).cwiseAbs().maxCoeff() == 0.0);
    const std::vector<std::uint32_t> one(7, 0);
    CHECK_THROWS_AS(cluster_robust_covariance(x, u, one, 1), Error);
  }

  TEST_CASE("TWFE standard errors equal the sandwich on demeaned data") {
    std::mt19937_64 rng(14);
    auto d = oracle::random_panel(12, 5, 2, 0.0, rng);
    FeOlsOptions opt;
    opt.demean_tol = 1e-13;
    const auto res = twoway_fe_ols(d, opt);
    Eigen::MatrixXd m(d.rows(), 3);
    m.col(0) = d.y;
    m.rightCols(2) = d.x;
    demean_columns(m, d.fe, {}, opt);
    const Eigen::VectorXd u = m.col(0) - m.rightCols(2) * res.coef;
    const auto want = hand_sandwich(m.rightCols(2), u, d.cluster, res.absorbed_dof);
    for (int k = 0; k < 2; ++k) CHECK(res.se(k) == doctest::Approx(std::sqrt(want(k, k))).epsilon(1e-9));
    CHECK(res.n_clusters == 5);
  }

  TEST_CASE("collinear regressors are named") {
    std::mt19937_64 rng(15);
    auto d = oracle::random_panel(10, 5, 2, 0.0, rng);
    d.x.col(1) = 2.0 * d.x.col(0);
    d.names = {"a", "b"};
    try {
      twoway_fe_ols(d);
      FAIL("expected singular error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::singular);
      CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
    // A regressor constant within units is absorbed by the unit effects.
    auto e = oracle::random_panel(10, 5, 1, 0.0, rng);
    for (Eigen::Index r = 0; r < e.x.rows(); ++r) e.x(r, 0) = e.fe[0][r] % 3;
    CHECK_THROWS_AS(twoway_fe_ols(e), Error);
  }

  TEST_CASE("a single group in a fixed-effect dimension is rejected") {
    auto d = did_2x2();
    d.fe[1] = {0, 0, 0, 0};
    CHECK_THROWS_AS(twoway_fe_ols(d), Error);
  }

  TEST_CASE("event study: baseline zero and invariance to unit and time terms") {
    std::mt19937_64 rng(16);
    std::normal_distribution<double> noise(0, 0.1);
    EventStudyInput in;
    const int units = 30, periods = 6, event = 3;
    std::vector<double> ys;
    std::vector<double> treat;
    for (int i = 0; i < units; ++i) {
      for (int t = 0; t < periods; ++t) {
        const bool treated = i % 2 == 0;
        ys.push_back(0.1 * i + 0.2 * t + (treated && t >= event ? 0.5 : 0.0) + noise(rng));
        treat.push_back(treated ? 1.0 : 0.0);
        in.base.fe.resize(2);
        in.base.fe[0].push_back(i);
        in.base.fe[1].push_back(t);
        in.base.cluster.push_back(i);
        in.period.push_back(t);
      }
    }
    const auto n = static_cast<Eigen::Index>(ys.size());
    in.base.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    in.base.x.resize(n, 0);
    in.treatment = Eigen::Map<Eigen::MatrixXd>(treat.data(), n, 1);
    in.treatment_names = {"Treated"};
    in.baseline_period = event - 1;
    const auto es = event_study(in);
    REQUIRE(es.periods.size() == periods);
    CHECK(es.coef(event - 1, 0) == 0.0);
    CHECK(es.se(event - 1, 0) == 0.0);
    for (int t = 0; t < event - 1; ++t) CHECK(std::abs(es.coef(t, 0)) < 0.1);
    for (int t = event; t < periods; ++t) CHECK(es.coef(t, 0) == doctest::Approx(0.5).epsilon(0.2));

    auto shifted = in;
    for (Eigen::Index r = 0; r < n; ++r) shifted.base.y(r) += std::sin(in.base.fe[0][r]) + 3.0 * in.period[r];
    const auto es2 = event_study(shifted);
    CHECK((es2.coef - es.coef).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("ihs and log1p") {
    CHECK(ihs(0) == 0);
    CHECK(ihs(-3.5) == -ihs(3.5));
    CHECK(ihs(10) == doctest::Approx(2.99822295029797).epsilon(1e-14));
    CHECK(ihs(10) == doctest::Approx(std::log(10 + std::sqrt(101.0))).epsilon(1e-14));
    CHECK(log1p_checked(0) == 0);
    CHECK_THROWS_AS(log1p_checked(-0.5), Error);
  }

  TEST_CASE("underestimation share") {
    CHECK(underestimation_share(-0.131, -0.131, 0, 0.105, 0.625) == doctest::Approx(0.0));
    const double s = underestimation_share(-0.114, -0.131, -0.025, 0.105, 0.625);
    CHECK(s == doctest::Approx(0.593).epsilon(1e-3));
    CHECK(underestimation_share(-0.228, -0.262, -0.05, 0.105, 0.625) == doctest::Approx(s));
    CHECK_THROWS_AS(underestimation_share(-0.1, 0, 0, 0.1, 0.6), Error);
  }

  TEST_CASE("significance stars") {
    CHECK(significance_stars(0.0005) == "***");
    CHECK(significance_stars(0.005) == "**");
    CHECK(significance_stars(0.03) == "*");
    CHECK(significance_stars(0.2).empty());
  }

  TEST_CASE("propagation: Post identically zero is a collinearity error") {
    FirmTable firms({{"F1", "R1", "P1", false}, {"F2", "R2", "P2", false}, {"F3", "RC", "PC", true},
                     {"F4", "R4", "P3", false}});
    std::vector<TransactionRecord> recs = {tx("2013-01-05", "F1", "F3", "R1", "RC", 10),
                                           tx("2013-01-05", "F1", "F2", "R1", "R2", 10),
                                           tx("2013-02-05", "F4", "F2", "R4", "R2", 10),
                                           tx("2013-03-05", "F3", "F4", "RC", "R4", 10),
                                           tx("2013-03-05", "F2", "F4", "R2", "R4", 10)};
    PanelOptions po;
    po.post_start = {2020, 1};
    const auto panel = assign_treatment_flags(build_trade_panel(recs, firms, po), firms, {});
    try {
      did_propagation(panel, firms, {});
      FAIL("expected singular error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::singular);
    }
  }

  TEST_CASE("propagation estimates equal the dummy regression on the same rows") {
    FirmTable firms({{"F1", "R1", "P1", false}, {"F2", "R2", "P2", false}, {"F3", "RC", "PC", true},
                     {"F4", "R4", "P3", false}, {"F5", "R5", "P4", false}});
    std::mt19937_64 rng(17);
    std::bernoulli_distribution ship(0.5);
    const std::vector<std::pair<std::string, std::string>> links = {
        {"F1", "F3"}, {"F1", "F2"}, {"F4", "F2"}, {"F3", "F4"}, {"F2", "F5"}, {"F5", "F1"}, {"F4", "F5"}};
    std::vector<TransactionRecord> recs;
    for (int m = 0; m < 48; ++m) {
      for (const auto& [s, r] : links) {
        if (m > 0 && !ship(rng)) continue;
        const auto ym = YearMonth{2013, 1}.plus(m);
        char date[16];
        std::snprintf(date, sizeof date, "%04d-%02d-10", ym.year, ym.month);
        recs.push_back(tx(date, s, r, firms.at(s).rayon_id, firms.at(r).rayon_id, 5 + m));
      }
    }
    const auto panel = assign_treatment_flags(build_trade_panel(recs, firms, {}), firms, {});
    PropagationSpec spec;
    const auto ds = propagation_dataset(panel, firms, spec);
    CHECK(ds.rows() == panel.pairs.size() * 48);
    FeOlsOptions opt;
    opt.demean_tol = 1e-13;
    const auto res = twoway_fe_ols(ds, opt);
    CHECK(max_rel_diff(res.coef, oracle::dummy_ols(ds)) < 1e-8);
    CHECK(res.names[0] == "Conflict x Post");
    CHECK(res.names[1] == "PartnerConflict x Post");
  }

  TEST_CASE("centrality DiD: constant change is collinear and scaling is irrelevant") {
    std::vector<AccountingRecord> acc;
    std::vector<std::string> ids;
    std::vector<double> delta;
    std::mt19937_64 rng(18);
    std::normal_distribution<double> n(0, 1);
    for (int i = 0; i < 40; ++i) {
      const std::string id = "F" + std::to_string(100 + i);
      ids.push_back(id);
      delta.push_back(n(rng));
      for (int y = 2011; y <= 2016; ++y) {
        const double s = std::exp(5 + 0.1 * i + 0.3 * delta.back() * (y >= 2014) + 0.05 * n(rng));
        acc.push_back({id, y, s, 0.1 * s, 0.9 * s});
      }
    }
    const std::vector<double> flat(ids.size(), 0.4);
    CHECK_THROWS_AS(did_centrality(acc, ids, flat, {}), Error);
    const auto a = did_centrality(acc, ids, delta, {});
    std::vector<double> scaled = delta;
    for (auto& v : scaled) v *= 7.0;
    const auto b = did_centrality(acc, ids, scaled, {});
    CHECK(a.regression.coef(0) == doctest::Approx(b.regression.coef(0)).epsilon(1e-12));
    CHECK(a.regression.se(0) == doctest::Approx(b.regression.se(0)).epsilon(1e-12));
    CHECK(a.regression.n_clusters == 40);

    CentralitySpec yearly;
    yearly.variant = CentralityVariant::yearly;
    const auto y = did_centrality(acc, ids, delta, yearly);
    CHECK(y.years == std::vector<int>{2011, 2012, 2013, 2014, 2015, 2016});
    CHECK(y.year_coef[2] == 0.0);
  }

  TEST_CASE("residualize: orthogonal residuals with zero mean") {
    std::mt19937_64 rng(19);
    std::normal_distribution<double> n(0, 1);
    const int m = 60;
    Eigen::MatrixXd c(m, 3);
    std::vector<double> delta(m);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < 3; ++k) c(i, k) = n(rng);
      delta[i] = 0.7 * c(i, 0) - 0.2 * c(i, 2) + n(rng);
    }
    const auto r = residualize(delta, c);
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), m);
    CHECK(std::abs(rv.mean()) < 1e-12);
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd ck = c.col(k).array() - c.col(k).mean();
      CHECK(std::abs(rv.dot(ck)) < 1e-9);
    }
    Eigen::MatrixXd bad = c;
    bad.col(2) = bad.col(0) * 2.0;
    CHECK_THROWS_AS(residualize(delta, bad), Error);
  }

  TEST_CASE("alpha estimate") {
    std::vector<LaborCostRecord> recs;
    std::mt19937_64 rng(20);
    std::lognormal_distribution<double> rev(5, 1);
    for (int i = 0; i < 50; ++i) {
      for (int y = 2013; y <= 2015; ++y) {
        const double r = rev(rng);
        recs.push_back({"F" + std::to_string(i), y, r, 0.18 * r});
      }
    }
    recs.push_back({"bad", 2014, 0.0, 1.0});
    const auto est = estimate_alpha(recs, 2013, 2015);
    CHECK(std::abs(est.alpha - 0.18) < 1e-9);
    CHECK(est.elasticity == doctest::Approx(1.0));
    CHECK(est.n_excluded == 1);
    for (auto& r : recs) r.labor_cost = r.revenue;
    CHECK(std::abs(estimate_alpha(recs, 2013, 2015).alpha - 1.0) < 1e-9);

    std::stringstream ss;
    write_labor_costs(ss, recs);
    CHECK(parse_labor_costs(ss).size() == recs.size());
  }

  TEST_CASE("results CSV layout") {
    const auto res = twoway_fe_ols(did_2x2());
    std::ostringstream out;
    write_results(out, res);
    CHECK(out.str().rfind("term,estimate,se,stars\n", 0) == 0);
    CHECK(out.str().find("Treated x Post,1,0,") != std::string::npos);
  }
}
